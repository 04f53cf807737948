//! Games, flows, outcomes, costs, and state-wise potentials.
//!
//! A game couples a finite state set with full-support prior, a finite
//! resource set, actions given as nonempty resource subsets, and one cost
//! curve per (resource, state). The cost of an action is the sum of its
//! resource costs at the loads induced by a unit-mass flow over actions:
//!
//! ```text
//! cost_a(y, s)   = sum_{e in a} curve_e(load_e, s),  load_e = sum_{a owns e} y_a
//! social(y, s)   = sum_a y_a cost_a(y, s)            = sum_e load_e curve_e(load_e, s)
//! potential(y,s) = sum_e  int_0^{load_e} curve_e(t, s) dt
//! ```
//!
//! The potential's partial derivative in `y_a` is `cost_a`, so per-state
//! equilibria are exactly its minimizers over the simplex when the curves are
//! nondecreasing (convex potential). With singleton actions in bijection with
//! resources and strictly increasing curves the potential is strictly convex
//! on the simplex.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::curve::PiecewiseCostCurve;
use crate::error::{Error, GameValidationError, Result};

/// Absolute tolerance for probability/flow mass checks.
pub const MASS_TOL: f64 = 1e-10;

/// Two flows closer than this (sup norm) are considered the same point.
pub const FLOW_DISTINCT_TOL: f64 = 1e-12;

/// A nonnegative vector over actions summing to a prescribed mass.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowProfile {
    mass: f64,
    entries: Vec<f64>,
}

impl FlowProfile {
    pub fn new(mass: f64, entries: Vec<f64>) -> Result<Self> {
        if !(mass >= 0.0) {
            return Err(Error::InvalidFlow(format!("mass {mass} must be >= 0")));
        }
        if let Some((i, &v)) = entries
            .iter()
            .enumerate()
            .find(|(_, v)| !v.is_finite() || **v < 0.0)
        {
            return Err(Error::InvalidFlow(format!("entry {i} is {v}")));
        }
        let sum: f64 = entries.iter().sum();
        if (sum - mass).abs() > MASS_TOL {
            return Err(Error::InvalidFlow(format!(
                "entries sum to {sum}, expected mass {mass}"
            )));
        }
        Ok(Self { mass, entries })
    }

    /// Unit-mass flow.
    pub fn simplex(entries: Vec<f64>) -> Result<Self> {
        Self::new(1.0, entries)
    }

    pub fn uniform(mass: f64, n: usize) -> Self {
        Self {
            mass,
            entries: vec![mass / n as f64; n],
        }
    }

    /// All mass on one action.
    pub fn point(mass: f64, n: usize, index: usize) -> Self {
        let mut entries = vec![0.0; n];
        entries[index] = mass;
        Self { mass, entries }
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn sup_distance(&self, other: &FlowProfile) -> f64 {
        self.entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Convexity classification of the state-wise potentials.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ConvexityClass {
    NonConvex,
    Convex,
    StrictlyConvexOnSimplex,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActionSet {
    label: String,
    resources: Vec<usize>,
}

impl ActionSet {
    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn resources(&self) -> &[usize] {
        &self.resources
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CongestionGame {
    states: Vec<String>,
    prior: Vec<f64>,
    resources: Vec<String>,
    actions: Vec<ActionSet>,
    /// curves[resource][state]
    curves: Vec<Vec<PiecewiseCostCurve>>,
}

fn check_distinct(labels: &[String]) -> std::result::Result<(), GameValidationError> {
    let mut seen = BTreeSet::new();
    for l in labels {
        if !seen.insert(l.as_str()) {
            return Err(GameValidationError::DuplicateLabel { label: l.clone() });
        }
    }
    Ok(())
}

impl CongestionGame {
    /// Build and validate a game. `actions` lists resource indices; action
    /// labels are derived from the resource labels (joined with `+`).
    pub fn new(
        states: Vec<String>,
        prior: Vec<f64>,
        resources: Vec<String>,
        actions: Vec<Vec<usize>>,
        curves: Vec<Vec<PiecewiseCostCurve>>,
    ) -> std::result::Result<Self, GameValidationError> {
        if states.is_empty() {
            return Err(GameValidationError::Empty { what: "states" });
        }
        if resources.is_empty() {
            return Err(GameValidationError::Empty { what: "resources" });
        }
        if actions.is_empty() {
            return Err(GameValidationError::Empty { what: "actions" });
        }
        check_distinct(&states)?;
        check_distinct(&resources)?;
        if prior.len() != states.len() {
            return Err(GameValidationError::PriorLength {
                expected: states.len(),
                got: prior.len(),
            });
        }
        if let Some((i, &p)) = prior.iter().enumerate().find(|(_, p)| **p <= 0.0) {
            return Err(GameValidationError::PriorNonPositive { index: i, value: p });
        }
        let sum: f64 = prior.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(GameValidationError::PriorSum { sum });
        }

        let mut used = vec![false; resources.len()];
        let mut sets: Vec<ActionSet> = Vec::with_capacity(actions.len());
        for (i, mut subset) in actions.into_iter().enumerate() {
            subset.sort_unstable();
            subset.dedup();
            if subset.is_empty() {
                return Err(GameValidationError::ActionEmpty { index: i });
            }
            for &e in &subset {
                used[e] = true;
            }
            if let Some(j) = sets.iter().position(|s| s.resources == subset) {
                return Err(GameValidationError::ActionDuplicate {
                    first: j,
                    second: i,
                });
            }
            let label = subset
                .iter()
                .map(|&e| resources[e].as_str())
                .collect::<Vec<_>>()
                .join("+");
            sets.push(ActionSet {
                label,
                resources: subset,
            });
        }
        if let Some(e) = used.iter().position(|u| !u) {
            return Err(GameValidationError::ResourceUnused {
                resource: resources[e].clone(),
            });
        }
        if curves.len() != resources.len() || curves.iter().any(|row| row.len() != states.len()) {
            let (e, s) = curves
                .iter()
                .enumerate()
                .find_map(|(e, row)| (row.len() != states.len()).then_some((e, row.len())))
                .unwrap_or((curves.len().min(resources.len().saturating_sub(1)), 0));
            return Err(GameValidationError::CurveMissing {
                resource: resources.get(e).cloned().unwrap_or_default(),
                state: states.get(s).cloned().unwrap_or_default(),
            });
        }
        Ok(Self {
            states,
            prior,
            resources,
            actions: sets,
            curves,
        })
    }

    pub fn n_states(&self) -> usize {
        self.states.len()
    }

    pub fn n_actions(&self) -> usize {
        self.actions.len()
    }

    pub fn n_resources(&self) -> usize {
        self.resources.len()
    }

    pub fn states(&self) -> &[String] {
        &self.states
    }

    pub fn prior(&self) -> &[f64] {
        &self.prior
    }

    pub fn resources(&self) -> &[String] {
        &self.resources
    }

    pub fn actions(&self) -> &[ActionSet] {
        &self.actions
    }

    pub fn action_labels(&self) -> Vec<String> {
        self.actions.iter().map(|a| a.label.clone()).collect()
    }

    pub fn curve(&self, resource: usize, state: usize) -> &PiecewiseCostCurve {
        &self.curves[resource][state]
    }

    pub fn state_index(&self, label: &str) -> Result<usize> {
        self.states
            .iter()
            .position(|s| s == label)
            .ok_or_else(|| Error::UnknownLabel {
                kind: "state",
                label: label.to_string(),
            })
    }

    pub fn action_index(&self, label: &str) -> Result<usize> {
        self.actions
            .iter()
            .position(|a| a.label == label)
            .ok_or_else(|| Error::UnknownLabel {
                kind: "action",
                label: label.to_string(),
            })
    }

    /// Per-resource loads induced by raw flow entries over actions.
    pub fn loads(&self, entries: &[f64]) -> Vec<f64> {
        let mut loads = vec![0.0; self.resources.len()];
        for (a, &y) in self.actions.iter().zip(entries) {
            for &e in &a.resources {
                loads[e] += y;
            }
        }
        loads
    }

    fn check_unit_flow(&self, flow: &FlowProfile) -> Result<()> {
        if flow.len() != self.actions.len() {
            return Err(Error::InvalidFlow(format!(
                "flow has {} entries for {} actions",
                flow.len(),
                self.actions.len()
            )));
        }
        if (flow.mass() - 1.0).abs() > MASS_TOL {
            return Err(Error::Domain(format!(
                "flow mass {} must be 1",
                flow.mass()
            )));
        }
        Ok(())
    }

    /// Cost of one action at raw entries (extended-domain evaluation; no mass check).
    pub fn action_cost_raw(&self, action: usize, entries: &[f64], state: usize) -> f64 {
        let loads = self.loads(entries);
        self.actions[action]
            .resources
            .iter()
            .map(|&e| self.curves[e][state].value(loads[e]))
            .sum()
    }

    /// Costs of all actions at raw entries, sharing one load computation.
    pub fn action_costs_raw(&self, entries: &[f64], state: usize) -> Vec<f64> {
        let loads = self.loads(entries);
        self.actions
            .iter()
            .map(|a| {
                a.resources
                    .iter()
                    .map(|&e| self.curves[e][state].value(loads[e]))
                    .sum()
            })
            .collect()
    }

    /// Cost of `action` in `state` under a unit-mass flow.
    pub fn action_cost(&self, action: &str, flow: &FlowProfile, state: &str) -> Result<f64> {
        let a = self.action_index(action)?;
        let s = self.state_index(state)?;
        self.check_unit_flow(flow)?;
        Ok(self.action_cost_raw(a, flow.entries(), s))
    }

    /// Flow-weighted total cost `sum_a y_a cost_a(y, state)`.
    pub fn social_cost(&self, flow: &FlowProfile, state: &str) -> Result<f64> {
        let s = self.state_index(state)?;
        self.check_unit_flow(flow)?;
        Ok(self.social_cost_raw(flow.entries(), s))
    }

    pub fn social_cost_raw(&self, entries: &[f64], state: usize) -> f64 {
        self.action_costs_raw(entries, state)
            .iter()
            .zip(entries)
            .map(|(c, y)| c * y)
            .sum()
    }

    /// State potential: summed load integrals of the resource curves.
    pub fn potential_value(&self, flow: &FlowProfile, state: &str) -> Result<f64> {
        let s = self.state_index(state)?;
        self.check_unit_flow(flow)?;
        Ok(self.potential_raw(flow.entries(), s))
    }

    pub fn potential_raw(&self, entries: &[f64], state: usize) -> f64 {
        self.loads(entries)
            .iter()
            .enumerate()
            .map(|(e, &x)| self.curves[e][state].integral_to(x))
            .sum()
    }

    /// Sufficient-condition convexity classification of the potentials.
    ///
    /// Convex when every curve is nondecreasing on [0, 1]; strictly convex on
    /// the simplex when additionally actions are singletons in bijection with
    /// resources and every curve is strictly increasing.
    pub fn classify_potential(&self) -> ConvexityClass {
        let all_nondecreasing = self
            .curves
            .iter()
            .flatten()
            .all(PiecewiseCostCurve::is_nondecreasing);
        if !all_nondecreasing {
            return ConvexityClass::NonConvex;
        }
        let singleton_bijection = self.actions.len() == self.resources.len()
            && self.actions.iter().all(|a| a.resources.len() == 1);
        let all_strict = self
            .curves
            .iter()
            .flatten()
            .all(PiecewiseCostCurve::is_strictly_increasing);
        if singleton_bijection && all_strict {
            ConvexityClass::StrictlyConvexOnSimplex
        } else {
            ConvexityClass::Convex
        }
    }

    /// The complete-information game with prior-averaged curves.
    pub fn average_game(&self) -> CongestionGame {
        let curves = self
            .curves
            .iter()
            .map(|row| {
                let weighted: Vec<(f64, &PiecewiseCostCurve)> = self
                    .prior
                    .iter()
                    .zip(row)
                    .map(|(&p, c)| (p, c))
                    .collect();
                vec![PiecewiseCostCurve::weighted_average(&weighted)]
            })
            .collect();
        CongestionGame {
            states: vec!["average".to_string()],
            prior: vec![1.0],
            resources: self.resources.clone(),
            actions: self.actions.clone(),
            curves,
        }
    }
}

/// One support point of a state-conditional flow distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct OutcomeAtom {
    pub flow: FlowProfile,
    pub prob: f64,
}

/// A finite-support outcome: per state, a probability distribution over
/// unit-mass flows.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteOutcome {
    per_state: Vec<Vec<OutcomeAtom>>,
}

impl FiniteOutcome {
    pub fn new(per_state: Vec<Vec<OutcomeAtom>>) -> Result<Self> {
        for (s, atoms) in per_state.iter().enumerate() {
            if atoms.is_empty() {
                return Err(Error::InvalidOutcome(format!("state {s} has no atoms")));
            }
            let n = atoms[0].flow.len();
            let mut total = 0.0;
            for (i, atom) in atoms.iter().enumerate() {
                if atom.flow.len() != n {
                    return Err(Error::InvalidOutcome(format!(
                        "state {s}: atom {i} has {} entries, expected {n}",
                        atom.flow.len()
                    )));
                }
                if (atom.flow.mass() - 1.0).abs() > MASS_TOL {
                    return Err(Error::InvalidOutcome(format!(
                        "state {s}: atom {i} has mass {}",
                        atom.flow.mass()
                    )));
                }
                if !(atom.prob >= 0.0) {
                    return Err(Error::InvalidOutcome(format!(
                        "state {s}: atom {i} has probability {}",
                        atom.prob
                    )));
                }
                total += atom.prob;
                for earlier in &atoms[..i] {
                    if earlier.flow.sup_distance(&atom.flow) <= FLOW_DISTINCT_TOL {
                        return Err(Error::InvalidOutcome(format!(
                            "state {s}: atom {i} duplicates an earlier flow"
                        )));
                    }
                }
            }
            if (total - 1.0).abs() > MASS_TOL {
                return Err(Error::InvalidOutcome(format!(
                    "state {s}: probabilities sum to {total}"
                )));
            }
        }
        Ok(Self { per_state })
    }

    /// Point mass per state.
    pub fn deterministic(flows: Vec<FlowProfile>) -> Result<Self> {
        Self::new(
            flows
                .into_iter()
                .map(|flow| vec![OutcomeAtom { flow, prob: 1.0 }])
                .collect(),
        )
    }

    pub fn n_states(&self) -> usize {
        self.per_state.len()
    }

    pub fn atoms(&self, state: usize) -> &[OutcomeAtom] {
        &self.per_state[state]
    }

    pub fn per_state(&self) -> &[Vec<OutcomeAtom>] {
        &self.per_state
    }

    /// Distinct support flows across all states (sup-distance > 1e-12).
    pub fn support_flows(&self) -> Vec<FlowProfile> {
        let mut support: Vec<FlowProfile> = Vec::new();
        for atoms in &self.per_state {
            for atom in atoms {
                if !support
                    .iter()
                    .any(|f| f.sup_distance(&atom.flow) <= FLOW_DISTINCT_TOL)
                {
                    support.push(atom.flow.clone());
                }
            }
        }
        support
    }

    /// `sum_s prior(s) sum_atoms prob * objective(flow, s)`.
    pub fn expected_value<F>(&self, prior: &[f64], mut objective: F) -> f64
    where
        F: FnMut(&FlowProfile, usize) -> f64,
    {
        self.per_state
            .iter()
            .enumerate()
            .map(|(s, atoms)| {
                prior[s]
                    * atoms
                        .iter()
                        .map(|a| a.prob * objective(&a.flow, s))
                        .sum::<f64>()
            })
            .sum()
    }

    /// Expected social cost under the game's prior.
    pub fn expected_social_cost(&self, game: &CongestionGame) -> f64 {
        self.expected_value(game.prior(), |flow, s| {
            game.social_cost_raw(flow.entries(), s)
        })
    }
}
