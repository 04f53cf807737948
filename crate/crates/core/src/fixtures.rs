//! A small gallery of reference games used in tests and documentation.

use crate::curve::PiecewiseCostCurve;
use crate::model::CongestionGame;

/// Two equiprobable states, two singleton actions. Resource `a` costs 0 or 1
/// depending on the state; resource `b` costs `2x + 1/3` in both states.
/// The potential is convex but not strictly so (`a` has zero slope).
pub fn two_state_binary() -> CongestionGame {
    CongestionGame::new(
        vec!["low".into(), "high".into()],
        vec![0.5, 0.5],
        vec!["a".into(), "b".into()],
        vec![vec![0], vec![1]],
        vec![
            vec![
                PiecewiseCostCurve::constant(0.0),
                PiecewiseCostCurve::constant(1.0),
            ],
            vec![
                PiecewiseCostCurve::affine(1.0 / 3.0, 2.0),
                PiecewiseCostCurve::affine(1.0 / 3.0, 2.0),
            ],
        ],
    )
    .expect("fixture is valid")
}

/// One state, two singleton actions. Resource `a` costs 1; resource `b` costs
/// `max(2 - 4x, 4x - 2)`, decreasing below load 1/2, so the potential is not
/// convex and the complete-information game has three equilibria.
pub fn single_state_vshape() -> CongestionGame {
    CongestionGame::new(
        vec!["base".into()],
        vec![1.0],
        vec!["a".into(), "b".into()],
        vec![vec![0], vec![1]],
        vec![
            vec![PiecewiseCostCurve::constant(1.0)],
            vec![PiecewiseCostCurve::new(
                vec![0.0, 0.5, 1.0],
                vec![vec![2.0, -4.0], vec![-2.0, 4.0]],
            )
            .expect("fixture is valid")],
        ],
    )
    .expect("fixture is valid")
}

/// One state, two singleton actions, identically zero costs.
pub fn zero_cost_game() -> CongestionGame {
    CongestionGame::new(
        vec!["s0".into()],
        vec![1.0],
        vec!["a".into(), "b".into()],
        vec![vec![0], vec![1]],
        vec![
            vec![PiecewiseCostCurve::constant(0.0)],
            vec![PiecewiseCostCurve::constant(0.0)],
        ],
    )
    .expect("fixture is valid")
}

/// Two states, two singleton actions with strictly increasing affine curves:
/// the potential is strictly convex on the simplex in every state.
pub fn strict_singleton_example() -> CongestionGame {
    CongestionGame::new(
        vec!["s0".into(), "s1".into()],
        vec![0.4, 0.6],
        vec!["a".into(), "b".into()],
        vec![vec![0], vec![1]],
        vec![
            vec![
                PiecewiseCostCurve::affine(0.5, 1.0),
                PiecewiseCostCurve::affine(1.0, 0.5),
            ],
            vec![
                PiecewiseCostCurve::affine(0.1, 2.0),
                PiecewiseCostCurve::affine(0.3, 1.5),
            ],
        ],
    )
    .expect("fixture is valid")
}

/// One state, two singleton actions with constant costs `lo` and `lo + gap`.
pub fn constant_gap_game(lo: f64, gap: f64) -> CongestionGame {
    CongestionGame::new(
        vec!["s0".into()],
        vec![1.0],
        vec!["a".into(), "b".into()],
        vec![vec![0], vec![1]],
        vec![
            vec![PiecewiseCostCurve::constant(lo)],
            vec![PiecewiseCostCurve::constant(lo + gap)],
        ],
    )
    .expect("fixture is valid")
}

/// One state, one action.
pub fn single_action_game() -> CongestionGame {
    CongestionGame::new(
        vec!["s0".into()],
        vec![1.0],
        vec!["only".into()],
        vec![vec![0]],
        vec![vec![PiecewiseCostCurve::affine(0.2, 1.0)]],
    )
    .expect("fixture is valid")
}
