//! The complete-information auxiliary game of a basic game extended with an
//! information structure, and its Bayesian Wardrop equilibria.
//!
//! Populations of the auxiliary game are (population, type) pairs. Given an
//! interim flow profile `yhat` (one flow of mass `size_k` per pair), the
//! unnormalized cost of playing `a` for pair `(k, t)` is
//!
//! ```text
//! C_a[k,t](yhat) = sum_{s, profiles with tau_k = t} p(s) pi(tau|s)
//!                  cost_a(total_flow(tau), s)
//! ```
//!
//! which is the partial derivative of the aggregate potential
//!
//! ```text
//! Phi_pi(yhat) = sum_{s, tau} p(s) pi(tau|s) Phi_s(total_flow(tau))
//! ```
//!
//! so epsilon-equilibria are epsilon-minimizers of `Phi_pi` whenever the
//! state potentials are convex, and solving is again conditional gradient
//! over the product of scaled simplices. Conditional (normalized) costs
//! divide by the type probability; types with probability below 1e-12 carry
//! no constraint, are flagged in reports, and are held at the uniform split
//! for determinism.

use serde::Serialize;

use crate::descent::{self, DescentConfig, ObjectiveOracle, SUPPORT_THRESHOLD};
use crate::design::InformationStructure;
use crate::error::{Error, Result};
use crate::model::{CongestionGame, FiniteOutcome, FlowProfile, OutcomeAtom};
use crate::solver::StatePotential;

/// Types with total probability at or below this are excluded from
/// equilibrium constraints.
pub const ZERO_PROB_TOL: f64 = 1e-12;

/// Total flows closer than this (sup norm) merge into one outcome atom.
pub const OUTCOME_MERGE_TOL: f64 = 1e-9;

/// Per-(population, type) flows of the population's mass over actions.
#[derive(Debug, Clone, PartialEq)]
pub struct InterimFlowProfile {
    /// `flows[population][type][action]`
    flows: Vec<Vec<Vec<f64>>>,
    sizes: Vec<f64>,
}

impl InterimFlowProfile {
    pub fn new(flows: Vec<Vec<Vec<f64>>>, sizes: Vec<f64>) -> Result<Self> {
        if flows.len() != sizes.len() {
            return Err(Error::Inconsistent(
                "one flow table per population required".to_string(),
            ));
        }
        for (k, per_type) in flows.iter().enumerate() {
            for (t, row) in per_type.iter().enumerate() {
                if row.iter().any(|&v| !(v >= 0.0)) {
                    return Err(Error::InvalidFlow(format!(
                        "population {k}, type {t}: negative entry"
                    )));
                }
                let sum: f64 = row.iter().sum();
                if (sum - sizes[k]).abs() > crate::model::MASS_TOL {
                    return Err(Error::InvalidFlow(format!(
                        "population {k}, type {t}: entries sum to {sum}, expected {}",
                        sizes[k]
                    )));
                }
            }
        }
        Ok(Self { flows, sizes })
    }

    pub fn n_populations(&self) -> usize {
        self.flows.len()
    }

    pub fn n_types(&self, population: usize) -> usize {
        self.flows[population].len()
    }

    pub fn flow(&self, population: usize, signal_type: usize) -> &[f64] {
        &self.flows[population][signal_type]
    }

    pub fn flows(&self) -> &[Vec<Vec<f64>>] {
        &self.flows
    }

    pub fn sizes(&self) -> &[f64] {
        &self.sizes
    }

    /// Max entry-wise distance across all (population, type) flows.
    pub fn sup_distance(&self, other: &InterimFlowProfile) -> f64 {
        let mut d: f64 = 0.0;
        for (pk, ok) in self.flows.iter().zip(&other.flows) {
            for (pt, ot) in pk.iter().zip(ok) {
                for (a, b) in pt.iter().zip(ot) {
                    d = d.max((a - b).abs());
                }
            }
        }
        d
    }
}

/// One (population, type) row of an interim cost report.
#[derive(Debug, Clone, Serialize)]
pub struct TypeCostEntry {
    pub population: usize,
    pub type_label: String,
    /// Total probability of observing this type.
    pub probability: f64,
    /// Conditional expected cost per action.
    pub conditional_costs: Vec<f64>,
    /// Max over supported actions of cost minus the cheapest action's cost,
    /// clamped at 0.
    pub max_slack: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct InterimCostReport {
    pub entries: Vec<TypeCostEntry>,
    /// (population, type label, probability) of excluded zero-probability types.
    pub excluded: Vec<(usize, String, f64)>,
    /// Max slack over all constrained (population, type) pairs.
    pub epsilon: f64,
    /// Costs are conditional: unnormalized sums divided by the type
    /// probability once at the end.
    pub normalized: bool,
}

/// The auxiliary complete-information multi-population game.
#[derive(Debug, Clone)]
pub struct AuxiliaryGame {
    game: CongestionGame,
    sizes: Vec<f64>,
    type_sets: Vec<Vec<String>>,
    /// per game-state: (type profile, weight = prior * law probability)
    weighted_profiles: Vec<Vec<(Vec<usize>, f64)>>,
    /// flat block layout: block = offsets[population] + type
    offsets: Vec<usize>,
    pub(crate) block_owner: Vec<(usize, usize)>,
    pub(crate) type_probs: Vec<f64>,
}

/// Expand the structure against the game into the auxiliary game.
pub fn build_auxiliary(
    game: &CongestionGame,
    structure: &InformationStructure,
) -> Result<AuxiliaryGame> {
    if structure.states() != game.states() {
        return Err(Error::Inconsistent(format!(
            "structure states {:?} do not match game states {:?}",
            structure.states(),
            game.states()
        )));
    }
    let mut weighted_profiles = Vec::with_capacity(game.n_states());
    for s in 0..game.n_states() {
        let p = game.prior()[s];
        let atoms = structure.profiles(s)?;
        weighted_profiles.push(
            atoms
                .iter()
                .map(|atom| (atom.types.clone(), p * atom.prob))
                .collect::<Vec<_>>(),
        );
    }
    let mut offsets = Vec::with_capacity(structure.n_populations());
    let mut block_owner = Vec::new();
    let mut total = 0usize;
    for (k, types) in structure.type_sets().iter().enumerate() {
        offsets.push(total);
        for t in 0..types.len() {
            block_owner.push((k, t));
        }
        total += types.len();
    }
    let mut type_probs = vec![0.0; total];
    for per_state in &weighted_profiles {
        for (types, w) in per_state {
            for (k, &t) in types.iter().enumerate() {
                type_probs[offsets[k] + t] += w;
            }
        }
    }
    Ok(AuxiliaryGame {
        game: game.clone(),
        sizes: structure.population_sizes().to_vec(),
        type_sets: structure.type_sets().to_vec(),
        weighted_profiles,
        offsets,
        block_owner,
        type_probs,
    })
}

impl AuxiliaryGame {
    pub fn game(&self) -> &CongestionGame {
        &self.game
    }

    pub fn sizes(&self) -> &[f64] {
        &self.sizes
    }

    pub fn n_population_types(&self) -> usize {
        self.block_owner.len()
    }

    pub fn n_weighted_profiles(&self) -> usize {
        self.weighted_profiles.iter().map(Vec::len).sum()
    }

    /// Total probability of (population, type).
    pub fn type_probability(&self, population: usize, signal_type: usize) -> f64 {
        self.type_probs[self.offsets[population] + signal_type]
    }

    /// The uniform-split interim profile.
    pub fn uniform_profile(&self) -> InterimFlowProfile {
        let n = self.game.n_actions();
        let flows = self
            .type_sets
            .iter()
            .zip(&self.sizes)
            .map(|(types, &size)| vec![vec![size / n as f64; n]; types.len()])
            .collect();
        InterimFlowProfile::new(flows, self.sizes.clone()).expect("uniform split is valid")
    }

    /// Seeded interior profile for randomized restarts.
    pub fn random_interior_profile(&self, seed: u64) -> InterimFlowProfile {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let n = self.game.n_actions();
        let flows = self
            .type_sets
            .iter()
            .zip(&self.sizes)
            .map(|(types, &size)| {
                (0..types.len())
                    .map(|_| {
                        let mut raw: Vec<f64> =
                            (0..n).map(|_| -rng.gen_range(1e-9..1.0f64).ln()).collect();
                        let total: f64 = raw.iter().sum();
                        raw.iter_mut().for_each(|v| *v *= size / total);
                        let drift: f64 = raw.iter().sum::<f64>() - size;
                        raw[0] -= drift;
                        raw
                    })
                    .collect()
            })
            .collect();
        InterimFlowProfile::new(flows, self.sizes.clone()).expect("interior sample is valid")
    }

    fn check_profile(&self, profile: &InterimFlowProfile) -> Result<()> {
        if profile.n_populations() != self.sizes.len() {
            return Err(Error::Inconsistent(format!(
                "profile has {} populations, structure has {}",
                profile.n_populations(),
                self.sizes.len()
            )));
        }
        for (k, types) in self.type_sets.iter().enumerate() {
            if profile.n_types(k) != types.len() {
                return Err(Error::Inconsistent(format!(
                    "population {k}: profile has {} types, structure has {}",
                    profile.n_types(k),
                    types.len()
                )));
            }
            for t in 0..types.len() {
                if profile.flow(k, t).len() != self.game.n_actions() {
                    return Err(Error::Inconsistent(format!(
                        "population {k}, type {t}: flow over {} actions, game has {}",
                        profile.flow(k, t).len(),
                        self.game.n_actions()
                    )));
                }
                if (profile.flow(k, t).iter().sum::<f64>() - self.sizes[k]).abs()
                    > crate::model::MASS_TOL
                {
                    return Err(Error::Inconsistent(format!(
                        "population {k}, type {t}: mass differs from population size"
                    )));
                }
            }
        }
        Ok(())
    }

    pub(crate) fn flat(&self, profile: &InterimFlowProfile) -> Vec<Vec<f64>> {
        self.block_owner
            .iter()
            .map(|&(k, t)| profile.flow(k, t).to_vec())
            .collect()
    }

    pub(crate) fn unflat(&self, point: Vec<Vec<f64>>) -> InterimFlowProfile {
        let mut flows: Vec<Vec<Vec<f64>>> = self
            .type_sets
            .iter()
            .map(|types| Vec::with_capacity(types.len()))
            .collect();
        for (&(k, _t), row) in self.block_owner.iter().zip(point) {
            flows[k].push(row);
        }
        InterimFlowProfile {
            flows,
            sizes: self.sizes.clone(),
        }
    }

    /// Total flow of one type profile under `point` (flat block layout).
    pub(crate) fn total_flow(&self, point: &[Vec<f64>], types: &[usize]) -> Vec<f64> {
        let n = self.game.n_actions();
        let mut y = vec![0.0; n];
        for (k, &t) in types.iter().enumerate() {
            for (acc, v) in y.iter_mut().zip(&point[self.offsets[k] + t]) {
                *acc += v;
            }
        }
        y
    }

    /// Unnormalized interim costs `C_a[k,t]` for every block.
    pub(crate) fn interim_costs_flat(&self, point: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let n = self.game.n_actions();
        let mut costs = vec![vec![0.0; n]; self.block_owner.len()];
        for (s, per_state) in self.weighted_profiles.iter().enumerate() {
            for (types, w) in per_state {
                let y = self.total_flow(point, types);
                let c = self.game.action_costs_raw(&y, s);
                for (k, &t) in types.iter().enumerate() {
                    let block = &mut costs[self.offsets[k] + t];
                    for (acc, &ca) in block.iter_mut().zip(&c) {
                        *acc += w * ca;
                    }
                }
            }
        }
        costs
    }

    /// Aggregate potential value at `point`.
    pub(crate) fn potential_flat(&self, point: &[Vec<f64>]) -> f64 {
        let mut total = 0.0;
        for (s, per_state) in self.weighted_profiles.iter().enumerate() {
            for (types, w) in per_state {
                let y = self.total_flow(point, types);
                total += w * self.game.potential_raw(&y, s);
            }
        }
        total
    }

    /// Aggregate potential of an interim profile.
    pub fn potential(&self, profile: &InterimFlowProfile) -> Result<f64> {
        self.check_profile(profile)?;
        Ok(self.potential_flat(&self.flat(profile)))
    }

    /// Extended-domain potential at raw `[population][type][action]` entries
    /// (no mass check), for derivative probes.
    pub fn potential_entries(&self, flows: &[Vec<Vec<f64>>]) -> f64 {
        let point: Vec<Vec<f64>> = self
            .block_owner
            .iter()
            .map(|&(k, t)| flows[k][t].clone())
            .collect();
        self.potential_flat(&point)
    }

    /// Extended-domain unnormalized interim costs at raw entries, indexed
    /// `[population][type][action]`.
    pub fn interim_cost_entries(&self, flows: &[Vec<Vec<f64>>]) -> Vec<Vec<Vec<f64>>> {
        let point: Vec<Vec<f64>> = self
            .block_owner
            .iter()
            .map(|&(k, t)| flows[k][t].clone())
            .collect();
        let flat = self.interim_costs_flat(&point);
        let mut out: Vec<Vec<Vec<f64>>> = self
            .type_sets
            .iter()
            .map(|types| Vec::with_capacity(types.len()))
            .collect();
        for (&(k, _t), row) in self.block_owner.iter().zip(flat) {
            out[k].push(row);
        }
        out
    }

    /// Unnormalized interim costs of an interim profile.
    pub fn interim_costs(&self, profile: &InterimFlowProfile) -> Result<Vec<Vec<f64>>> {
        self.check_profile(profile)?;
        Ok(self.interim_costs_flat(&self.flat(profile)))
    }
}

pub(crate) struct AuxiliaryObjective<'a> {
    pub(crate) aux: &'a AuxiliaryGame,
}

impl ObjectiveOracle for AuxiliaryObjective<'_> {
    fn n_blocks(&self) -> usize {
        self.aux.block_owner.len()
    }
    fn dim(&self) -> usize {
        self.aux.game.n_actions()
    }
    fn block_mass(&self, block: usize) -> f64 {
        self.aux.sizes[self.aux.block_owner[block].0]
    }
    fn block_frozen(&self, block: usize) -> bool {
        self.aux.type_probs[block] <= ZERO_PROB_TOL
    }
    fn value(&self, point: &[Vec<f64>]) -> f64 {
        self.aux.potential_flat(point)
    }
    fn gradient(&self, point: &[Vec<f64>], out: &mut [Vec<f64>]) {
        let costs = self.aux.interim_costs_flat(point);
        for (o, c) in out.iter_mut().zip(costs) {
            *o = c;
        }
    }
    fn hessian(&self, point: &[Vec<f64>], out: &mut Vec<Vec<f64>>) {
        let n = self.dim();
        let total = self.n_blocks() * n;
        *out = vec![vec![0.0; total]; total];
        let mut state_hess: Vec<Vec<f64>> = Vec::new();
        for (s, per_state) in self.aux.weighted_profiles.iter().enumerate() {
            let oracle = StatePotential::new(&self.aux.game, s);
            for (types, w) in per_state {
                let y = self.aux.total_flow(point, types);
                oracle.hessian(&[y], &mut state_hess);
                for (k, &tk) in types.iter().enumerate() {
                    let bk = self.aux.offsets[k] + tk;
                    for (j, &tj) in types.iter().enumerate() {
                        let bj = self.aux.offsets[j] + tj;
                        for a in 0..n {
                            for b in 0..n {
                                out[bk * n + a][bj * n + b] += w * state_hess[a][b];
                            }
                        }
                    }
                }
            }
        }
    }
}

/// Audit the epsilon-equilibrium conditions of an interim profile.
pub fn verify_eps_bwe(
    game: &CongestionGame,
    structure: &InformationStructure,
    profile: &InterimFlowProfile,
) -> Result<InterimCostReport> {
    let aux = build_auxiliary(game, structure)?;
    verify_eps_bwe_aux(&aux, profile)
}

/// As [`verify_eps_bwe`] on a prebuilt auxiliary game.
pub fn verify_eps_bwe_aux(
    aux: &AuxiliaryGame,
    profile: &InterimFlowProfile,
) -> Result<InterimCostReport> {
    aux.check_profile(profile)?;
    let costs = aux.interim_costs_flat(&aux.flat(profile));
    let mut entries = Vec::new();
    let mut excluded = Vec::new();
    let mut epsilon: f64 = 0.0;
    for (block, &(k, t)) in aux.block_owner.iter().enumerate() {
        let label = aux.type_sets[k][t].clone();
        let prob = aux.type_probs[block];
        if prob <= ZERO_PROB_TOL {
            excluded.push((k, label, prob));
            continue;
        }
        let conditional: Vec<f64> = costs[block].iter().map(|c| c / prob).collect();
        let min = conditional.iter().copied().fold(f64::INFINITY, f64::min);
        let support = SUPPORT_THRESHOLD * aux.sizes[k];
        let mut max_slack: f64 = 0.0;
        for (a, &y) in profile.flow(k, t).iter().enumerate() {
            if y > support {
                max_slack = max_slack.max(conditional[a] - min);
            }
        }
        epsilon = epsilon.max(max_slack);
        entries.push(TypeCostEntry {
            population: k,
            type_label: label,
            probability: prob,
            conditional_costs: conditional,
            max_slack,
        });
    }
    Ok(InterimCostReport {
        entries,
        excluded,
        epsilon,
        normalized: true,
    })
}

/// Bayesian Wardrop solve output with certificates.
#[derive(Debug, Clone)]
pub struct BweSolution {
    pub profile: InterimFlowProfile,
    pub duality_gap: f64,
    pub iterations: usize,
    pub polished: bool,
    pub objective_trace: Vec<f64>,
    pub report: InterimCostReport,
}

/// Minimize the aggregate potential to a Bayesian Wardrop equilibrium.
pub fn solve_bwe(
    game: &CongestionGame,
    structure: &InformationStructure,
    cfg: &DescentConfig,
) -> Result<InterimFlowProfile> {
    Ok(solve_bwe_detailed(game, structure, cfg, None)?.profile)
}

/// As [`solve_bwe`] with an optional custom start and full certificates.
pub fn solve_bwe_detailed(
    game: &CongestionGame,
    structure: &InformationStructure,
    cfg: &DescentConfig,
    start: Option<&InterimFlowProfile>,
) -> Result<BweSolution> {
    if game.classify_potential() == crate::model::ConvexityClass::NonConvex {
        return Err(Error::Unsupported(
            "potential is not convex; equilibrium solving needs nondecreasing cost curves"
                .to_string(),
        ));
    }
    let aux = build_auxiliary(game, structure)?;
    solve_bwe_aux(&aux, cfg, start)
}

pub(crate) fn solve_bwe_aux(
    aux: &AuxiliaryGame,
    cfg: &DescentConfig,
    start: Option<&InterimFlowProfile>,
) -> Result<BweSolution> {
    let oracle = AuxiliaryObjective { aux };
    let start_flat = match start {
        Some(p) => {
            aux.check_profile(p)?;
            // frozen blocks stay at the uniform split regardless of the start
            let mut flat = aux.flat(p);
            for (block, row) in flat.iter_mut().enumerate() {
                if oracle.block_frozen(block) {
                    let mass = oracle.block_mass(block);
                    let n = row.len();
                    *row = vec![mass / n as f64; n];
                }
            }
            Some(flat)
        }
        None => None,
    };
    let sol = descent::minimize(&oracle, start_flat, cfg)?;
    let profile = aux.unflat(sol.point);
    let report = verify_eps_bwe_aux(aux, &profile)?;
    Ok(BweSolution {
        profile,
        duality_gap: sol.duality_gap,
        iterations: sol.iterations,
        polished: sol.polished,
        objective_trace: sol.objective_trace,
        report,
    })
}

/// Aggregate an interim profile into the state-conditional distribution over
/// total flows, merging flows within [`OUTCOME_MERGE_TOL`].
pub fn project_outcome(
    structure: &InformationStructure,
    profile: &InterimFlowProfile,
) -> Result<FiniteOutcome> {
    let n_actions = profile
        .flows()
        .first()
        .and_then(|p| p.first())
        .map(|f| f.len())
        .ok_or_else(|| Error::Inconsistent("empty interim profile".to_string()))?;
    let mut per_state = Vec::with_capacity(structure.states().len());
    for s in 0..structure.states().len() {
        let mut atoms: Vec<(Vec<f64>, f64)> = Vec::new();
        for atom in structure.profiles(s)?.iter() {
            let mut y = vec![0.0; n_actions];
            for (k, &t) in atom.types.iter().enumerate() {
                for (acc, v) in y.iter_mut().zip(profile.flow(k, t)) {
                    *acc += v;
                }
            }
            match atoms.iter_mut().find(|(flow, _)| {
                flow.iter()
                    .zip(&y)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max)
                    <= OUTCOME_MERGE_TOL
            }) {
                Some((_, prob)) => *prob += atom.prob,
                None => atoms.push((y, atom.prob)),
            }
        }
        per_state.push(
            atoms
                .into_iter()
                .map(|(y, prob)| {
                    Ok(OutcomeAtom {
                        flow: FlowProfile::new(1.0, y)?,
                        prob,
                    })
                })
                .collect::<Result<Vec<_>>>()?,
        );
    }
    FiniteOutcome::new(per_state)
}

/// Total interim cost `sum_{k,t,a} yhat_a[k,t] C_a[k,t](yhat)`, cross-checked
/// against the expected social cost of the projected play.
pub fn total_cost(
    game: &CongestionGame,
    structure: &InformationStructure,
    profile: &InterimFlowProfile,
) -> Result<f64> {
    let aux = build_auxiliary(game, structure)?;
    aux.check_profile(profile)?;
    let point = aux.flat(profile);
    let costs = aux.interim_costs_flat(&point);
    let tc: f64 = costs
        .iter()
        .zip(&point)
        .map(|(c, y)| c.iter().zip(y).map(|(ci, yi)| ci * yi).sum::<f64>())
        .sum();
    let mut expected_sc = 0.0;
    for (s, per_state) in aux.weighted_profiles.iter().enumerate() {
        for (types, w) in per_state {
            let y = aux.total_flow(&point, types);
            expected_sc += w * game.social_cost_raw(&y, s);
        }
    }
    if (tc - expected_sc).abs() > 1e-9 {
        return Err(Error::Internal(format!(
            "total cost {tc} and expected social cost {expected_sc} disagree"
        )));
    }
    Ok(tc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::{self, SignalLaw};
    use crate::fixtures;
    use approx::assert_abs_diff_eq;

    fn binary_designed() -> (CongestionGame, FiniteOutcome, InformationStructure) {
        let g = fixtures::two_state_binary();
        let bcwe = FiniteOutcome::deterministic(vec![
            FlowProfile::simplex(vec![1.0, 0.0]).unwrap(),
            FlowProfile::simplex(vec![5.0 / 6.0, 1.0 / 6.0]).unwrap(),
        ])
        .unwrap();
        let approx = design::rational_approximation(&bcwe.support_flows(), 0.0).unwrap();
        let structure = design::build_direct_structure(&g, &bcwe, &approx).unwrap();
        (g, bcwe, structure)
    }

    fn vshape_designed() -> (CongestionGame, InformationStructure) {
        let g = fixtures::single_state_vshape();
        let bcwe = FiniteOutcome::new(vec![vec![
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
        let approx = design::rational_approximation(&bcwe.support_flows(), 0.0).unwrap();
        let structure = design::build_direct_structure(&g, &bcwe, &approx).unwrap();
        (g, structure)
    }

    #[test]
    fn auxiliary_shape_on_the_designed_structures() {
        let (g, _, structure) = binary_designed();
        let aux = build_auxiliary(&g, &structure).unwrap();
        assert_eq!(aux.n_population_types(), 12);
        assert_eq!(aux.n_weighted_profiles(), 7);

        let (g2, structure2) = vshape_designed();
        let aux2 = build_auxiliary(&g2, &structure2).unwrap();
        assert_eq!(aux2.n_population_types(), 4);
        assert_eq!(aux2.n_weighted_profiles(), 3);
    }

    #[test]
    fn null_structure_reduces_to_the_average_game() {
        let g = fixtures::two_state_binary();
        let null = InformationStructure::uninformative(&g);
        let aux = build_auxiliary(&g, &null).unwrap();
        let avg = g.average_game();
        for entries in [vec![0.5, 0.5], vec![0.9, 0.1], vec![0.2, 0.8]] {
            let profile =
                InterimFlowProfile::new(vec![vec![entries.clone()]], vec![1.0]).unwrap();
            let costs = aux.interim_costs(&profile).unwrap();
            let expected = avg.action_costs_raw(&entries, 0);
            for (c, e) in costs[0].iter().zip(&expected) {
                assert_abs_diff_eq!(c, e, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn obedient_vshape_profile_is_an_exact_equilibrium() {
        let (g, structure) = vshape_designed();
        let profile = design::obedient_profile(&g, &structure).unwrap();
        let report = verify_eps_bwe(&g, &structure, &profile).unwrap();
        assert_abs_diff_eq!(report.epsilon, 0.0, epsilon = 1e-12);
        // population 0 recommended a: both actions cost 1 conditionally
        let entry = report
            .entries
            .iter()
            .find(|e| e.population == 0 && e.type_label == "a")
            .unwrap();
        assert_abs_diff_eq!(entry.conditional_costs[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(entry.conditional_costs[1], 1.0, epsilon = 1e-12);
        let entry_b = report
            .entries
            .iter()
            .find(|e| e.population == 0 && e.type_label == "b")
            .unwrap();
        assert_abs_diff_eq!(entry_b.conditional_costs[1], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(entry_b.conditional_costs[0], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn obedient_binary_profile_is_an_exact_equilibrium() {
        let (g, _, structure) = binary_designed();
        let profile = design::obedient_profile(&g, &structure).unwrap();
        let report = verify_eps_bwe(&g, &structure, &profile).unwrap();
        assert!(report.epsilon <= 1e-12, "epsilon = {}", report.epsilon);
        assert!(report.excluded.is_empty());
    }

    #[test]
    fn concentrating_on_the_costly_action_scores_the_gap() {
        let gap = 0.35;
        let g = fixtures::constant_gap_game(1.0, gap);
        let null = InformationStructure::uninformative(&g);
        let profile = InterimFlowProfile::new(vec![vec![vec![0.0, 1.0]]], vec![1.0]).unwrap();
        let report = verify_eps_bwe(&g, &null, &profile).unwrap();
        assert_abs_diff_eq!(report.epsilon, gap, epsilon = 1e-12);
    }

    #[test]
    fn solving_the_designed_binary_structure_hits_the_target_cost() {
        let (g, _, structure) = binary_designed();
        let cfg = DescentConfig::default();
        let sol = solve_bwe_detailed(&g, &structure, &cfg, None).unwrap();
        assert!(sol.duality_gap <= cfg.target_gap);
        let min_prob = sol
            .report
            .entries
            .iter()
            .map(|e| e.probability)
            .fold(f64::INFINITY, f64::min);
        assert!(sol.report.epsilon <= cfg.target_gap / min_prob + 1e-9);
        let tc = total_cost(&g, &structure, &sol.profile).unwrap();
        assert_abs_diff_eq!(tc, 17.0 / 36.0, epsilon = 1e-6);
    }

    #[test]
    fn null_structure_solve_matches_the_average_equilibrium() {
        let g = fixtures::two_state_binary();
        let null = InformationStructure::uninformative(&g);
        let sol = solve_bwe(&g, &null, &DescentConfig::default()).unwrap();
        assert_abs_diff_eq!(sol.flow(0, 0)[1], 1.0 / 12.0, epsilon = 1e-6);
        let outcome = project_outcome(&null, &sol).unwrap();
        for s in 0..2 {
            assert_eq!(outcome.atoms(s).len(), 1);
            assert_abs_diff_eq!(
                outcome.atoms(s)[0].flow.entries()[1],
                1.0 / 12.0,
                epsilon = 1e-6
            );
        }
    }

    #[test]
    fn single_action_game_is_trivial_under_any_structure() {
        let g = fixtures::single_action_game();
        let null = InformationStructure::uninformative(&g);
        let sol = solve_bwe(&g, &null, &DescentConfig::default()).unwrap();
        assert_eq!(sol.flow(0, 0), &[1.0]);
    }

    #[test]
    fn projecting_the_obedient_profile_recovers_the_designed_outcome() {
        let (g, bcwe, structure) = binary_designed();
        let profile = design::obedient_profile(&g, &structure).unwrap();
        let outcome = project_outcome(&structure, &profile).unwrap();
        assert_eq!(outcome.atoms(0).len(), 1);
        assert_eq!(outcome.atoms(1).len(), 1);
        assert!(
            outcome.atoms(0)[0]
                .flow
                .sup_distance(&bcwe.atoms(0)[0].flow)
                <= 1e-12
        );
        assert!(
            outcome.atoms(1)[0]
                .flow
                .sup_distance(&bcwe.atoms(1)[0].flow)
                <= 1e-12
        );

        let (g2, structure2) = vshape_designed();
        let profile2 = design::obedient_profile(&g2, &structure2).unwrap();
        let outcome2 = project_outcome(&structure2, &profile2).unwrap();
        let atoms = outcome2.atoms(0);
        assert_eq!(atoms.len(), 2);
        let corner = atoms.iter().find(|a| a.flow.entries()[1] < 0.25).unwrap();
        let split = atoms.iter().find(|a| a.flow.entries()[1] > 0.25).unwrap();
        assert_abs_diff_eq!(corner.prob, 1.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(split.prob, 2.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn one_profile_law_projects_to_a_point_mass() {
        let g = fixtures::single_state_vshape();
        let structure = InformationStructure::new(
            g.states().to_vec(),
            vec![1.0],
            vec![g.action_labels()],
            SignalLaw::Explicit {
                per_state: vec![vec![design::ProfileAtom {
                    types: vec![1],
                    prob: 1.0,
                }]],
            },
        )
        .unwrap();
        let profile = design::obedient_profile(&g, &structure).unwrap();
        let outcome = project_outcome(&structure, &profile).unwrap();
        assert_eq!(outcome.atoms(0).len(), 1);
        assert_eq!(outcome.atoms(0)[0].flow.entries(), &[0.0, 1.0]);
    }

    #[test]
    fn total_cost_matches_hand_values() {
        let (g, _, structure) = binary_designed();
        let profile = design::obedient_profile(&g, &structure).unwrap();
        assert_abs_diff_eq!(
            total_cost(&g, &structure, &profile).unwrap(),
            17.0 / 36.0,
            epsilon = 1e-12
        );

        let (g2, structure2) = vshape_designed();
        let profile2 = design::obedient_profile(&g2, &structure2).unwrap();
        assert_abs_diff_eq!(
            total_cost(&g2, &structure2, &profile2).unwrap(),
            2.0 / 3.0,
            epsilon = 1e-12
        );

        let zeros = fixtures::zero_cost_game();
        let null = InformationStructure::uninformative(&zeros);
        let uniform = build_auxiliary(&zeros, &null).unwrap().uniform_profile();
        assert_abs_diff_eq!(total_cost(&zeros, &null, &uniform).unwrap(), 0.0);
    }
}
