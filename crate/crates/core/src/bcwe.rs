//! Bayes correlated Wardrop equilibria: obedience verification, canonical
//! constructions, and designer-objective optimization by linear programming.
//!
//! An outcome (a state-conditional distribution over unit flows) is obedient
//! when for every ordered action pair `(a, b)` the expected cost of following
//! recommendation `a` does not exceed the expected cost of deviating to `b`:
//!
//! ```text
//! sum_s p(s) sum_atoms mu(y|s) y_a cost_a(y, s)
//!     <= sum_s p(s) sum_atoms mu(y|s) y_a cost_b(y, s)
//! ```
//!
//! Restricted to outcomes supported on a rational flow grid the obedience
//! conditions are linear in the atom probabilities, so minimizing any
//! per-atom designer objective is a small dense LP.

use serde::Serialize;

use crate::descent::DescentConfig;
use crate::error::{Error, Result};
use crate::grid::FlowGrid;
use crate::model::{CongestionGame, FiniteOutcome, FlowProfile, OutcomeAtom};
use crate::simplex::{self, StandardLp};
use crate::solver;

/// Atoms below this probability are dropped from emitted outcomes.
pub const ATOM_PRUNE_TOL: f64 = 1e-12;

/// One ordered action pair of an obedience audit.
#[derive(Debug, Clone, Serialize)]
pub struct PairObedience {
    pub recommended: String,
    pub alternative: String,
    /// Expected cost of obeying the recommendation.
    pub lhs: f64,
    /// Expected cost of deviating to the alternative.
    pub rhs: f64,
    /// `rhs - lhs`; negative means the pair is violated.
    pub slack: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ObedienceReport {
    /// All ordered action pairs, diagonal included.
    pub pairs: Vec<PairObedience>,
    /// `max(0, -min slack)`.
    pub violation: f64,
    pub tolerance: f64,
    pub certified: bool,
}

impl ObedienceReport {
    pub fn pair(&self, recommended: &str, alternative: &str) -> Option<&PairObedience> {
        self.pairs
            .iter()
            .find(|p| p.recommended == recommended && p.alternative == alternative)
    }
}

fn check_outcome_shape(game: &CongestionGame, outcome: &FiniteOutcome) -> Result<()> {
    if outcome.n_states() != game.n_states() {
        return Err(Error::Inconsistent(format!(
            "outcome covers {} states, game has {}",
            outcome.n_states(),
            game.n_states()
        )));
    }
    for s in 0..game.n_states() {
        for atom in outcome.atoms(s) {
            if atom.flow.len() != game.n_actions() {
                return Err(Error::Inconsistent(format!(
                    "state {s}: atom flow has {} entries for {} actions",
                    atom.flow.len(),
                    game.n_actions()
                )));
            }
        }
    }
    Ok(())
}

/// Audit the obedience constraints of an outcome.
pub fn verify_bcwe(
    game: &CongestionGame,
    outcome: &FiniteOutcome,
    tol: f64,
) -> Result<ObedienceReport> {
    check_outcome_shape(game, outcome)?;
    let n = game.n_actions();
    // weighted[a][b] = sum p mu y_a cost_b; the obey side is the diagonal
    let mut weighted = vec![vec![0.0f64; n]; n];
    for s in 0..game.n_states() {
        let p = game.prior()[s];
        for atom in outcome.atoms(s) {
            let costs = game.action_costs_raw(atom.flow.entries(), s);
            for (a, &y) in atom.flow.entries().iter().enumerate() {
                let w = p * atom.prob * y;
                for (b, &cb) in costs.iter().enumerate() {
                    weighted[a][b] += w * cb;
                }
            }
        }
    }
    let mut pairs = Vec::with_capacity(n * n);
    let mut violation: f64 = 0.0;
    for a in 0..n {
        for b in 0..n {
            let lhs = weighted[a][a];
            let rhs = weighted[a][b];
            let slack = rhs - lhs;
            violation = violation.max(-slack);
            pairs.push(PairObedience {
                recommended: game.actions()[a].label().to_string(),
                alternative: game.actions()[b].label().to_string(),
                lhs,
                rhs,
                slack,
            });
        }
    }
    let violation = violation.max(0.0);
    Ok(ObedienceReport {
        pairs,
        violation,
        tolerance: tol,
        certified: violation <= tol,
    })
}

fn certified_outcome(
    game: &CongestionGame,
    flows: Vec<FlowProfile>,
    tol: f64,
) -> Result<FiniteOutcome> {
    let outcome = FiniteOutcome::deterministic(flows)?;
    let report = verify_bcwe(game, &outcome, tol)?;
    if !report.certified {
        return Err(Error::Internal(format!(
            "constructed outcome violates obedience by {:.3e}",
            report.violation
        )));
    }
    Ok(outcome)
}

/// Point mass on the per-state Wardrop equilibrium in every state.
pub fn fully_revealing_bcwe(game: &CongestionGame, cfg: &DescentConfig) -> Result<FiniteOutcome> {
    let mut flows = Vec::with_capacity(game.n_states());
    for s in 0..game.n_states() {
        let state = game.states()[s].clone();
        flows.push(solver::solve_wardrop(game, &state, cfg)?);
    }
    certified_outcome(game, flows, 10.0 * cfg.target_gap)
}

/// Point mass on the average-game Wardrop equilibrium in every state.
pub fn non_revealing_bcwe(game: &CongestionGame, cfg: &DescentConfig) -> Result<FiniteOutcome> {
    let flow = solver::solve_average_wardrop(game, cfg)?;
    let flows = vec![flow; game.n_states()];
    certified_outcome(game, flows, 10.0 * cfg.target_gap)
}

/// Designer objective, evaluated per (state, grid atom) and minimized.
#[derive(Debug, Clone)]
pub enum Objective {
    SocialCost,
    NegSocialCost,
    /// Explicit values indexed `[state][grid point]`.
    Table(Vec<Vec<f64>>),
}

impl Objective {
    fn evaluate(&self, game: &CongestionGame, grid: &FlowGrid, state: usize, point: usize) -> f64 {
        match self {
            Objective::SocialCost => game.social_cost_raw(grid.flow(point).entries(), state),
            Objective::NegSocialCost => -game.social_cost_raw(grid.flow(point).entries(), state),
            Objective::Table(t) => t[state][point],
        }
    }
}

/// Minimize a designer objective over grid-supported obedient outcomes.
///
/// Variables are the atom probabilities per state; constraints are per-state
/// total mass plus the `|A|(|A|-1)` obedience inequalities, solved by the
/// dense Bland-rule simplex. The returned outcome drops atoms below
/// [`ATOM_PRUNE_TOL`] and is re-verified at tolerance 1e-8 before emission.
pub fn optimize_bcwe(
    game: &CongestionGame,
    objective: &Objective,
    grid: &FlowGrid,
) -> Result<(FiniteOutcome, f64)> {
    if grid.n_actions() != game.n_actions() {
        return Err(Error::Inconsistent(format!(
            "grid over {} actions, game has {}",
            grid.n_actions(),
            game.n_actions()
        )));
    }
    if let Objective::Table(t) = objective {
        if t.len() != game.n_states() || t.iter().any(|row| row.len() != grid.n_points()) {
            return Err(Error::Inconsistent(
                "objective table shape must be [states][grid points]".to_string(),
            ));
        }
    }
    let n_states = game.n_states();
    let n_actions = game.n_actions();
    let n_points = grid.n_points();
    let n_mu = n_states * n_points;
    let pairs: Vec<(usize, usize)> = (0..n_actions)
        .flat_map(|a| (0..n_actions).filter(move |&b| b != a).map(move |b| (a, b)))
        .collect();
    let n_cols = n_mu + pairs.len();
    let var = |s: usize, k: usize| s * n_points + k;

    let mut grid_costs = vec![vec![Vec::new(); n_points]; n_states];
    for (s, row) in grid_costs.iter_mut().enumerate() {
        for (k, slot) in row.iter_mut().enumerate() {
            *slot = game.action_costs_raw(grid.flow(k).entries(), s);
        }
    }

    let mut rows = Vec::with_capacity(n_states + pairs.len());
    let mut rhs = Vec::with_capacity(n_states + pairs.len());
    for s in 0..n_states {
        let mut row = vec![0.0; n_cols];
        for k in 0..n_points {
            row[var(s, k)] = 1.0;
        }
        rows.push(row);
        rhs.push(1.0);
    }
    for (i, &(a, b)) in pairs.iter().enumerate() {
        let mut row = vec![0.0; n_cols];
        for s in 0..n_states {
            let p = game.prior()[s];
            for k in 0..n_points {
                let y_a = grid.flow(k).entries()[a];
                let c = &grid_costs[s][k];
                row[var(s, k)] = p * y_a * (c[a] - c[b]);
            }
        }
        row[n_mu + i] = 1.0;
        rows.push(row);
        rhs.push(0.0);
    }

    let mut cost = vec![0.0; n_cols];
    for s in 0..n_states {
        let p = game.prior()[s];
        for k in 0..n_points {
            cost[var(s, k)] = p * objective.evaluate(game, grid, s, k);
        }
    }

    let sol = simplex::solve(&StandardLp {
        objective: cost,
        rows,
        rhs,
    })?;

    let mut per_state = Vec::with_capacity(n_states);
    for s in 0..n_states {
        let mut atoms = Vec::new();
        for k in 0..n_points {
            let prob = sol.x[var(s, k)];
            if prob > ATOM_PRUNE_TOL {
                atoms.push(OutcomeAtom {
                    flow: grid.flow(k),
                    prob,
                });
            }
        }
        // snap basic-solution roundoff onto the largest atom so emitted
        // probabilities sum to 1 exactly
        let total: f64 = atoms.iter().map(|a| a.prob).sum();
        if let Some(top) = atoms
            .iter_mut()
            .max_by(|a, b| a.prob.partial_cmp(&b.prob).unwrap())
        {
            top.prob += 1.0 - total;
        }
        per_state.push(atoms);
    }
    let outcome = FiniteOutcome::new(per_state)?;
    let report = verify_bcwe(game, &outcome, 1e-8)?;
    if !report.certified {
        return Err(Error::Internal(format!(
            "LP outcome violates obedience by {:.3e}",
            report.violation
        )));
    }
    Ok((outcome, sol.value))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::model::CongestionGame;
    use approx::assert_abs_diff_eq;

    fn binary_optimal_outcome() -> FiniteOutcome {
        FiniteOutcome::deterministic(vec![
            FlowProfile::simplex(vec![1.0, 0.0]).unwrap(),
            FlowProfile::simplex(vec![5.0 / 6.0, 1.0 / 6.0]).unwrap(),
        ])
        .unwrap()
    }

    #[test]
    fn obedience_arithmetic_on_the_binary_fixture() {
        let g = fixtures::two_state_binary();
        let report = verify_bcwe(&g, &binary_optimal_outcome(), 1e-9).unwrap();
        assert!(report.certified);
        let ab = report.pair("a", "b").unwrap();
        assert_abs_diff_eq!(ab.lhs, 5.0 / 12.0, epsilon = 1e-12);
        assert_abs_diff_eq!(ab.rhs, 16.0 / 36.0, epsilon = 1e-12);
        let ba = report.pair("b", "a").unwrap();
        assert_abs_diff_eq!(ba.lhs, 1.0 / 18.0, epsilon = 1e-12);
        assert_abs_diff_eq!(ba.rhs, 1.0 / 12.0, epsilon = 1e-12);
        assert_eq!(report.pairs.len(), 4);
    }

    #[test]
    fn vshape_mixture_is_obedient() {
        let g = fixtures::single_state_vshape();
        let outcome = FiniteOutcome::new(vec![vec![
            OutcomeAtom {
                flow: FlowProfile::simplex(vec![1.0, 0.0]).unwrap(),
                prob: 1.0 / 3.0,
            },
            OutcomeAtom {
                flow: FlowProfile::simplex(vec![0.5, 0.5]).unwrap(),
                prob: 2.0 / 3.0,
            },
        ]])
        .unwrap();
        let report = verify_bcwe(&g, &outcome, 1e-12).unwrap();
        assert!(report.certified);
        assert_abs_diff_eq!(report.pair("a", "b").unwrap().slack, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(
            report.pair("b", "a").unwrap().slack,
            1.0 / 3.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn off_equilibrium_point_mass_is_flagged() {
        let g = fixtures::single_state_vshape();
        let outcome =
            FiniteOutcome::deterministic(vec![FlowProfile::simplex(vec![0.6, 0.4]).unwrap()])
                .unwrap();
        let report = verify_bcwe(&g, &outcome, 1e-9).unwrap();
        assert!(!report.certified);
        assert_abs_diff_eq!(report.violation, 0.36, epsilon = 1e-12);
    }

    #[test]
    fn fully_revealing_uses_per_state_equilibria() {
        let g = fixtures::two_state_binary();
        let outcome = fully_revealing_bcwe(&g, &DescentConfig::default()).unwrap();
        let low = &outcome.atoms(0)[0];
        let high = &outcome.atoms(1)[0];
        assert_abs_diff_eq!(low.flow.entries()[0], 1.0, epsilon = 1e-8);
        assert_abs_diff_eq!(high.flow.entries()[1], 1.0 / 3.0, epsilon = 1e-6);
    }

    #[test]
    fn non_revealing_uses_the_average_equilibrium() {
        let g = fixtures::two_state_binary();
        let outcome = non_revealing_bcwe(&g, &DescentConfig::default()).unwrap();
        for s in 0..2 {
            assert_abs_diff_eq!(
                outcome.atoms(s)[0].flow.entries()[1],
                1.0 / 12.0,
                epsilon = 1e-6
            );
        }
    }

    #[test]
    fn single_state_revealing_and_non_revealing_agree() {
        let g = fixtures::single_action_game();
        let cfg = DescentConfig::default();
        let a = fully_revealing_bcwe(&g, &cfg).unwrap();
        let b = non_revealing_bcwe(&g, &cfg).unwrap();
        assert!(a.atoms(0)[0].flow.sup_distance(&b.atoms(0)[0].flow) <= 1e-9);
    }

    #[test]
    fn identical_curves_give_state_independent_point_mass() {
        use crate::curve::PiecewiseCostCurve as C;
        let g = CongestionGame::new(
            vec!["s0".into(), "s1".into()],
            vec![0.3, 0.7],
            vec!["a".into(), "b".into()],
            vec![vec![0], vec![1]],
            vec![
                vec![C::affine(0.4, 1.0), C::affine(0.4, 1.0)],
                vec![C::affine(0.1, 2.0), C::affine(0.1, 2.0)],
            ],
        )
        .unwrap();
        let outcome = fully_revealing_bcwe(&g, &DescentConfig::default()).unwrap();
        assert!(
            outcome.atoms(0)[0]
                .flow
                .sup_distance(&outcome.atoms(1)[0].flow)
                <= 1e-7
        );
    }

    #[test]
    fn constant_average_costs_fall_back_to_the_lowest_corner() {
        use crate::curve::PiecewiseCostCurve as C;
        // state curves 1 + x and 1 - x: the average game is constant, every
        // flow is an average equilibrium, and the deterministic vertex start
        // picks the lowest-index corner
        let g = CongestionGame::new(
            vec!["s0".into(), "s1".into()],
            vec![0.5, 0.5],
            vec!["a".into(), "b".into()],
            vec![vec![0], vec![1]],
            vec![
                vec![C::affine(1.0, 1.0), C::affine(1.0, -1.0)],
                vec![C::constant(1.0), C::constant(1.0)],
            ],
        )
        .unwrap();
        let outcome = non_revealing_bcwe(&g, &DescentConfig::default()).unwrap();
        for s in 0..2 {
            assert_eq!(outcome.atoms(s)[0].flow.entries(), &[1.0, 0.0]);
        }
    }

    #[test]
    fn lp_reproduces_the_oracle_optimum_on_the_binary_fixture() {
        let g = fixtures::two_state_binary();
        let grid = FlowGrid::new(6, 2).unwrap();
        let (outcome, value) = optimize_bcwe(&g, &Objective::SocialCost, &grid).unwrap();
        // frozen by the exact rational brute-force oracle (tests/lp_oracle.rs)
        assert_abs_diff_eq!(value, 17.0 / 36.0, epsilon = 1e-9);
        assert_eq!(outcome.atoms(0).len(), 1);
        assert_eq!(outcome.atoms(1).len(), 1);
        assert_abs_diff_eq!(outcome.atoms(0)[0].flow.entries()[1], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(
            outcome.atoms(1)[0].flow.entries()[1],
            1.0 / 6.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn lp_reproduces_the_vshape_mixture() {
        let g = fixtures::single_state_vshape();
        let grid = FlowGrid::new(2, 2).unwrap();
        let (outcome, value) = optimize_bcwe(&g, &Objective::SocialCost, &grid).unwrap();
        assert_abs_diff_eq!(value, 2.0 / 3.0, epsilon = 1e-9);
        let atoms = outcome.atoms(0);
        assert_eq!(atoms.len(), 2);
        let full = atoms
            .iter()
            .find(|a| a.flow.entries()[1] < 0.25)
            .expect("corner atom");
        let split = atoms
            .iter()
            .find(|a| a.flow.entries()[1] > 0.25)
            .expect("split atom");
        assert_abs_diff_eq!(full.prob, 1.0 / 3.0, epsilon = 1e-9);
        assert_abs_diff_eq!(split.prob, 2.0 / 3.0, epsilon = 1e-9);
        assert_abs_diff_eq!(split.flow.entries()[1], 0.5, epsilon = 1e-12);
    }

    #[test]
    fn constant_objective_returns_the_constant() {
        let g = fixtures::two_state_binary();
        let grid = FlowGrid::new(3, 2).unwrap();
        let table = vec![vec![4.25; grid.n_points()]; 2];
        let (_, value) = optimize_bcwe(&g, &Objective::Table(table), &grid).unwrap();
        assert_abs_diff_eq!(value, 4.25, epsilon = 1e-9);
    }

    #[test]
    fn coarse_grid_without_obedient_support_is_infeasible() {
        use crate::curve::PiecewiseCostCurve as C;
        // both corners violate obedience, and D = 1 offers nothing else
        let g = CongestionGame::new(
            vec!["s0".into()],
            vec![1.0],
            vec!["a".into(), "b".into()],
            vec![vec![0], vec![1]],
            vec![vec![C::constant(1.0)], vec![C::affine(0.0, 2.0)]],
        )
        .unwrap();
        let grid = FlowGrid::new(1, 2).unwrap();
        match optimize_bcwe(&g, &Objective::SocialCost, &grid) {
            Err(Error::Infeasible { residual, .. }) => assert!(residual > 1e-3),
            other => panic!("expected infeasible, got {other:?}"),
        }
    }
}
