//! Complete-information Wardrop equilibria per state via potential
//! minimization.
//!
//! A unit-mass flow is a Wardrop equilibrium of the state game when every
//! action with positive mass has minimal cost among all actions. For
//! nondecreasing curves those flows are exactly the minimizers of the state
//! potential over the simplex, which is what the conditional-gradient engine
//! in [`crate::descent`] computes.

use serde::Serialize;

use crate::descent::{self, DescentConfig, ObjectiveOracle, SUPPORT_THRESHOLD};
use crate::error::{Error, Result};
use crate::model::{CongestionGame, ConvexityClass, FlowProfile};

/// Per-action entry of an equilibrium gap report (supported actions only).
#[derive(Debug, Clone, Serialize)]
pub struct ActionGap {
    pub action: String,
    pub flow: f64,
    pub cost: f64,
    /// Cheapest alternative action cost; infinite when there is no alternative.
    pub min_alternative_cost: f64,
    /// `cost - min(all action costs)`; negative when this action is strictly cheapest.
    pub slack: f64,
}

/// Wardrop-condition audit of a flow in one state.
#[derive(Debug, Clone, Serialize)]
pub struct EquilibriumGapReport {
    pub per_action: Vec<ActionGap>,
    /// `max(0, max slack over supported actions)`.
    pub gap: f64,
    pub tolerance: f64,
    pub certified: bool,
}

/// Wardrop solve output with its convergence certificate.
#[derive(Debug, Clone)]
pub struct WardropSolution {
    pub flow: FlowProfile,
    pub duality_gap: f64,
    pub support_slack: f64,
    pub iterations: usize,
    pub polished: bool,
    pub objective_trace: Vec<f64>,
}

/// Check the Wardrop conditions for `flow` in `state`.
pub fn verify_wardrop(
    game: &CongestionGame,
    flow: &FlowProfile,
    state: &str,
    tol: f64,
) -> Result<EquilibriumGapReport> {
    let s = game.state_index(state)?;
    if flow.len() != game.n_actions() {
        return Err(Error::InvalidFlow(format!(
            "flow has {} entries for {} actions",
            flow.len(),
            game.n_actions()
        )));
    }
    if (flow.mass() - 1.0).abs() > crate::model::MASS_TOL {
        return Err(Error::Domain(format!(
            "flow mass {} must be 1",
            flow.mass()
        )));
    }
    let costs = game.action_costs_raw(flow.entries(), s);
    let report = gap_report_from_costs(game, flow.entries(), &costs, tol);
    Ok(report)
}

pub(crate) fn gap_report_from_costs(
    game: &CongestionGame,
    entries: &[f64],
    costs: &[f64],
    tol: f64,
) -> EquilibriumGapReport {
    let mut per_action = Vec::new();
    let mut gap: f64 = 0.0;
    for (a, (&y, &cost)) in entries.iter().zip(costs).enumerate() {
        if y <= SUPPORT_THRESHOLD {
            continue;
        }
        let min_alt = costs
            .iter()
            .enumerate()
            .filter(|&(b, _)| b != a)
            .map(|(_, &c)| c)
            .fold(f64::INFINITY, f64::min);
        let slack = if min_alt.is_finite() {
            cost - min_alt
        } else {
            0.0
        };
        gap = gap.max(slack.max(0.0));
        per_action.push(ActionGap {
            action: game.actions()[a].label().to_string(),
            flow: y,
            cost,
            min_alternative_cost: min_alt,
            slack,
        });
    }
    EquilibriumGapReport {
        per_action,
        gap,
        tolerance: tol,
        certified: gap <= tol,
    }
}

/// State potential as a one-block objective for the descent engine.
pub(crate) struct StatePotential<'g> {
    game: &'g CongestionGame,
    state: usize,
    /// actions using each resource, for Hessian assembly
    incidence: Vec<Vec<usize>>,
}

impl<'g> StatePotential<'g> {
    pub(crate) fn new(game: &'g CongestionGame, state: usize) -> Self {
        let mut incidence = vec![Vec::new(); game.n_resources()];
        for (a, set) in game.actions().iter().enumerate() {
            for &e in set.resources() {
                incidence[e].push(a);
            }
        }
        Self {
            game,
            state,
            incidence,
        }
    }
}

impl ObjectiveOracle for StatePotential<'_> {
    fn n_blocks(&self) -> usize {
        1
    }
    fn dim(&self) -> usize {
        self.game.n_actions()
    }
    fn block_mass(&self, _b: usize) -> f64 {
        1.0
    }
    fn value(&self, point: &[Vec<f64>]) -> f64 {
        self.game.potential_raw(&point[0], self.state)
    }
    fn gradient(&self, point: &[Vec<f64>], out: &mut [Vec<f64>]) {
        out[0] = self.game.action_costs_raw(&point[0], self.state);
    }
    fn hessian(&self, point: &[Vec<f64>], out: &mut Vec<Vec<f64>>) {
        let n = self.dim();
        *out = vec![vec![0.0; n]; n];
        let loads = self.game.loads(&point[0]);
        for (e, users) in self.incidence.iter().enumerate() {
            let d = self.game.curve(e, self.state).derivative(loads[e]);
            for &a in users {
                for &b in users {
                    out[a][b] += d;
                }
            }
        }
    }
}

fn require_convex(game: &CongestionGame) -> Result<()> {
    if game.classify_potential() == ConvexityClass::NonConvex {
        return Err(Error::Unsupported(
            "potential is not convex; equilibrium solving needs nondecreasing cost curves"
                .to_string(),
        ));
    }
    Ok(())
}

/// Solve the complete-information Wardrop equilibrium of one state.
pub fn solve_wardrop(
    game: &CongestionGame,
    state: &str,
    cfg: &DescentConfig,
) -> Result<FlowProfile> {
    Ok(solve_wardrop_detailed(game, state, cfg, None)?.flow)
}

/// As [`solve_wardrop`], with the convergence certificate and an optional
/// custom starting flow (defaults to one linear-minimization step from the
/// uniform flow).
pub fn solve_wardrop_detailed(
    game: &CongestionGame,
    state: &str,
    cfg: &DescentConfig,
    start: Option<&FlowProfile>,
) -> Result<WardropSolution> {
    require_convex(game)?;
    let s = game.state_index(state)?;
    let oracle = StatePotential::new(game, s);
    let start = start.map(|f| vec![f.entries().to_vec()]);
    let sol = descent::minimize(&oracle, start, cfg)?;
    Ok(WardropSolution {
        flow: FlowProfile::new(1.0, sol.point.into_iter().next().unwrap())?,
        duality_gap: sol.duality_gap,
        support_slack: sol.support_slack,
        iterations: sol.iterations,
        polished: sol.polished,
        objective_trace: sol.objective_trace,
    })
}

/// Wardrop equilibrium of the prior-averaged complete-information game.
///
/// Convexity is checked on the averaged curves: averaging can only preserve
/// or improve convexity of the state potentials.
pub fn solve_average_wardrop(game: &CongestionGame, cfg: &DescentConfig) -> Result<FlowProfile> {
    let avg = game.average_game();
    if avg.classify_potential() == ConvexityClass::NonConvex {
        return Err(Error::Unsupported(
            "average-game potential is not convex".to_string(),
        ));
    }
    let oracle = StatePotential::new(&avg, 0);
    let sol = descent::minimize(&oracle, None, cfg)?;
    FlowProfile::new(1.0, sol.point.into_iter().next().unwrap())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use approx::assert_abs_diff_eq;

    #[test]
    fn verifies_known_equilibria_of_the_vshape_game() {
        let g = fixtures::single_state_vshape();
        for entries in [vec![1.0, 0.0], vec![0.75, 0.25], vec![0.25, 0.75]] {
            let flow = FlowProfile::simplex(entries).unwrap();
            let rep = verify_wardrop(&g, &flow, "base", 1e-12).unwrap();
            assert_abs_diff_eq!(rep.gap, 0.0, epsilon = 1e-12);
            assert!(rep.certified);
        }
        let off = FlowProfile::simplex(vec![0.6, 0.4]).unwrap();
        let rep = verify_wardrop(&g, &off, "base", 1e-12).unwrap();
        assert_abs_diff_eq!(rep.gap, 0.6, epsilon = 1e-12);
        assert!(!rep.certified);
        // supported b is strictly cheapest: slack is negative but clamped out of the gap
        let b_entry = rep.per_action.iter().find(|e| e.action == "b").unwrap();
        assert_abs_diff_eq!(b_entry.slack, -0.6, epsilon = 1e-12);
    }

    #[test]
    fn solves_interior_equilibrium() {
        let g = fixtures::two_state_binary();
        let cfg = DescentConfig::default();
        let sol = solve_wardrop_detailed(&g, "high", &cfg, None).unwrap();
        assert_abs_diff_eq!(sol.flow.entries()[0], 2.0 / 3.0, epsilon = 1e-6);
        assert_abs_diff_eq!(sol.flow.entries()[1], 1.0 / 3.0, epsilon = 1e-6);
        assert!(sol.duality_gap <= cfg.target_gap);
        let rep = verify_wardrop(&g, &sol.flow, "high", cfg.target_gap).unwrap();
        assert!(rep.certified, "gap {}", rep.gap);
        // the duality gap upper-bounds the Wardrop gap at the returned point
        assert!(rep.gap <= sol.duality_gap + 1e-9);
    }

    #[test]
    fn solves_corner_equilibrium() {
        let g = fixtures::two_state_binary();
        let flow = solve_wardrop(&g, "low", &DescentConfig::default()).unwrap();
        assert_abs_diff_eq!(flow.entries()[0], 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(flow.entries()[1], 0.0, epsilon = 1e-9);
    }

    #[test]
    fn single_action_is_trivial() {
        let g = fixtures::single_action_game();
        let flow = solve_wardrop(&g, "s0", &DescentConfig::default()).unwrap();
        assert_eq!(flow.entries(), &[1.0]);
    }

    #[test]
    fn average_game_equilibrium() {
        let g = fixtures::two_state_binary();
        let flow = solve_average_wardrop(&g, &DescentConfig::default()).unwrap();
        assert_abs_diff_eq!(flow.entries()[0], 11.0 / 12.0, epsilon = 1e-6);
        assert_abs_diff_eq!(flow.entries()[1], 1.0 / 12.0, epsilon = 1e-6);
    }

    #[test]
    fn uniform_prior_over_identical_states_matches_single_state() {
        use crate::curve::PiecewiseCostCurve as C;
        let g = crate::model::CongestionGame::new(
            vec!["s0".into(), "s1".into()],
            vec![0.5, 0.5],
            vec!["a".into(), "b".into()],
            vec![vec![0], vec![1]],
            vec![
                vec![C::affine(0.4, 1.0), C::affine(0.4, 1.0)],
                vec![C::affine(0.1, 2.0), C::affine(0.1, 2.0)],
            ],
        )
        .unwrap();
        let cfg = DescentConfig::default();
        let avg = solve_average_wardrop(&g, &cfg).unwrap();
        let single = solve_wardrop(&g, "s0", &cfg).unwrap();
        assert!(avg.sup_distance(&single) <= 1e-7);
    }

    #[test]
    fn near_degenerate_prior_tracks_the_heavy_state() {
        use crate::curve::PiecewiseCostCurve as C;
        let g = crate::model::CongestionGame::new(
            vec!["s0".into(), "s1".into()],
            vec![1.0 - 1e-9, 1e-9],
            vec!["a".into(), "b".into()],
            vec![vec![0], vec![1]],
            vec![
                vec![C::affine(0.4, 1.0), C::affine(0.9, 1.0)],
                vec![C::affine(0.1, 2.0), C::affine(0.2, 2.0)],
            ],
        )
        .unwrap();
        let cfg = DescentConfig::default();
        let avg = solve_average_wardrop(&g, &cfg).unwrap();
        let heavy = solve_wardrop(&g, "s0", &cfg).unwrap();
        assert!(avg.sup_distance(&heavy) <= 1e-6);
    }

    #[test]
    fn rejects_nonconvex_games() {
        let g = fixtures::single_state_vshape();
        assert!(matches!(
            solve_wardrop(&g, "base", &DescentConfig::default()),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn convergence_error_carries_best_gap() {
        let g = fixtures::two_state_binary();
        let cfg = DescentConfig {
            target_gap: -1.0,
            max_iters: 40,
            seed: 0,
        };
        match solve_wardrop(&g, "high", &cfg) {
            Err(Error::Convergence { best_gap, .. }) => assert!(best_gap >= 0.0),
            other => panic!("expected convergence error, got {other:?}"),
        }
    }
}
