//! Synthesis of direct information structures from finite-support correlated
//! equilibria.
//!
//! The pipeline: approximate every support flow by a rational vector with a
//! common denominator `K` (counts `N_a` summing to `K`), then split the
//! player continuum into `K` populations of size `1/K` whose signals are
//! action recommendations. Conditional on a state and a drawn support flow,
//! recommendations are assigned by the `K` cyclic rotations of one base
//! assignment that lists `N_a` copies of each action, each rotation with
//! probability `1/K`. Every population's marginal probability of being told
//! `a` is then exactly `N_a / K`, and the realized total flow is exactly the
//! rounded support flow, which is all the obedience argument uses; compared
//! with drawing uniformly among all assignments with the same counts, the
//! signal-law support stays at `K` profiles per atom instead of multinomially
//! many.
//!
//! When rounding is exact (`eta = 0`) the obedient profile inherits the
//! correlated equilibrium's obedience exactly; otherwise the violation is at
//! most `4 L eta / eps0`, with `L` an empirical modulus of the maps
//! `y -> y_a cost_b(y, s)` and `eps0` the smallest positive support flow.

use std::borrow::Cow;
use std::collections::BTreeMap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::bwe::InterimFlowProfile;
use crate::error::{Error, Result};
use crate::model::{CongestionGame, FiniteOutcome, FlowProfile, FLOW_DISTINCT_TOL, MASS_TOL};

/// Explicit signal-law expansion refuses to produce more profiles than this.
pub const MAX_EXPLICIT_PROFILES: usize = 1_000_000;

/// Largest denominator searched by the exact-rational fast path.
pub const MAX_RATIONAL_DENOMINATOR: u64 = 1_000_000;

/// One explicit signal-law atom: a per-population type-index profile.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileAtom {
    pub types: Vec<usize>,
    pub prob: f64,
}

/// One rotation-symmetric atom: action counts summing to the population
/// count, drawn with `prob` and expanded into cyclic rotations on demand.
#[derive(Debug, Clone, PartialEq)]
pub struct RotationAtom {
    pub counts: Vec<u64>,
    pub prob: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SignalLaw {
    Explicit { per_state: Vec<Vec<ProfileAtom>> },
    RotationSymmetric { k: u64, per_state: Vec<Vec<RotationAtom>> },
}

/// Finitely many populations, each observing a public within-population
/// signal drawn jointly with the state.
#[derive(Debug, Clone, PartialEq)]
pub struct InformationStructure {
    states: Vec<String>,
    population_sizes: Vec<f64>,
    type_sets: Vec<Vec<String>>,
    law: SignalLaw,
}

impl InformationStructure {
    pub fn new(
        states: Vec<String>,
        population_sizes: Vec<f64>,
        type_sets: Vec<Vec<String>>,
        law: SignalLaw,
    ) -> Result<Self> {
        let k = population_sizes.len();
        if k == 0 || k != type_sets.len() {
            return Err(Error::InvalidStructure(
                "need one type set per population".to_string(),
            ));
        }
        if population_sizes.iter().any(|&g| !(g > 0.0)) {
            return Err(Error::InvalidStructure(
                "population sizes must be positive".to_string(),
            ));
        }
        let total: f64 = population_sizes.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidStructure(format!(
                "population sizes sum to {total}"
            )));
        }
        match &law {
            SignalLaw::Explicit { per_state } => {
                if per_state.len() != states.len() {
                    return Err(Error::InvalidStructure(
                        "signal law must cover every state".to_string(),
                    ));
                }
                for (s, atoms) in per_state.iter().enumerate() {
                    let mut mass = 0.0;
                    for atom in atoms {
                        if atom.types.len() != k {
                            return Err(Error::InvalidStructure(format!(
                                "state {s}: profile length {} for {k} populations",
                                atom.types.len()
                            )));
                        }
                        for (pop, &t) in atom.types.iter().enumerate() {
                            if t >= type_sets[pop].len() {
                                return Err(Error::InvalidStructure(format!(
                                    "state {s}: type index {t} outside population {pop}'s type set"
                                )));
                            }
                        }
                        if !(atom.prob >= 0.0) {
                            return Err(Error::InvalidStructure(format!(
                                "state {s}: negative profile probability"
                            )));
                        }
                        mass += atom.prob;
                    }
                    if (mass - 1.0).abs() > 1e-12 {
                        return Err(Error::InvalidStructure(format!(
                            "state {s}: signal law sums to {mass}"
                        )));
                    }
                }
            }
            SignalLaw::RotationSymmetric { k: rot_k, per_state } => {
                let rot_k = *rot_k;
                if rot_k as usize != k {
                    return Err(Error::InvalidStructure(format!(
                        "rotation denominator {rot_k} does not match {k} populations"
                    )));
                }
                let share = 1.0 / rot_k as f64;
                if population_sizes.iter().any(|&g| (g - share).abs() > 1e-12) {
                    return Err(Error::InvalidStructure(
                        "rotation encoding needs equal population sizes 1/K".to_string(),
                    ));
                }
                if type_sets.iter().any(|t| t != &type_sets[0]) {
                    return Err(Error::InvalidStructure(
                        "rotation encoding needs identical (action) type sets".to_string(),
                    ));
                }
                if per_state.len() != states.len() {
                    return Err(Error::InvalidStructure(
                        "signal law must cover every state".to_string(),
                    ));
                }
                for (s, atoms) in per_state.iter().enumerate() {
                    let mut mass = 0.0;
                    for atom in atoms {
                        if atom.counts.len() != type_sets[0].len() {
                            return Err(Error::InvalidStructure(format!(
                                "state {s}: counts over {} actions, expected {}",
                                atom.counts.len(),
                                type_sets[0].len()
                            )));
                        }
                        if atom.counts.iter().sum::<u64>() != rot_k {
                            return Err(Error::InvalidStructure(format!(
                                "state {s}: counts must sum to K = {rot_k}"
                            )));
                        }
                        if !(atom.prob >= 0.0) {
                            return Err(Error::InvalidStructure(format!(
                                "state {s}: negative atom probability"
                            )));
                        }
                        mass += atom.prob;
                    }
                    if (mass - 1.0).abs() > 1e-12 {
                        return Err(Error::InvalidStructure(format!(
                            "state {s}: signal law sums to {mass}"
                        )));
                    }
                }
            }
        }
        Ok(Self {
            states,
            population_sizes,
            type_sets,
            law,
        })
    }

    /// One population, one signal: the extended game is the average game.
    pub fn uninformative(game: &CongestionGame) -> Self {
        Self {
            states: game.states().to_vec(),
            population_sizes: vec![1.0],
            type_sets: vec![vec!["none".to_string()]],
            law: SignalLaw::Explicit {
                per_state: vec![
                    vec![ProfileAtom {
                        types: vec![0],
                        prob: 1.0,
                    }];
                    game.n_states()
                ],
            },
        }
    }

    pub fn states(&self) -> &[String] {
        &self.states
    }

    pub fn n_populations(&self) -> usize {
        self.population_sizes.len()
    }

    pub fn population_sizes(&self) -> &[f64] {
        &self.population_sizes
    }

    pub fn type_sets(&self) -> &[Vec<String>] {
        &self.type_sets
    }

    pub fn law(&self) -> &SignalLaw {
        &self.law
    }

    pub fn rotation_k(&self) -> Option<u64> {
        match &self.law {
            SignalLaw::RotationSymmetric { k, .. } => Some(*k),
            SignalLaw::Explicit { .. } => None,
        }
    }

    /// Signals are action recommendations for `game`.
    pub fn is_direct_for(&self, game: &CongestionGame) -> bool {
        let labels = game.action_labels();
        self.type_sets.iter().all(|t| *t == labels)
    }

    /// The signal law of one state as explicit profiles (rotations expanded
    /// and merged, deterministic lexicographic order).
    pub fn profiles(&self, state: usize) -> Result<Cow<'_, [ProfileAtom]>> {
        match &self.law {
            SignalLaw::Explicit { per_state } => Ok(Cow::Borrowed(&per_state[state])),
            SignalLaw::RotationSymmetric { k, per_state } => {
                let atoms = &per_state[state];
                let total = atoms.len().saturating_mul(*k as usize);
                if total > MAX_EXPLICIT_PROFILES {
                    return Err(Error::ResourceLimit(format!(
                        "expanding {} rotation atoms with K = {k} would produce {total} profiles",
                        atoms.len()
                    )));
                }
                let k = *k as usize;
                let mut merged: BTreeMap<Vec<usize>, f64> = BTreeMap::new();
                for atom in atoms {
                    let base = base_assignment(&atom.counts, k);
                    let share = atom.prob / k as f64;
                    for r in 0..k {
                        let profile: Vec<usize> =
                            (0..k).map(|pop| base[(pop + r) % k]).collect();
                        *merged.entry(profile).or_insert(0.0) += share;
                    }
                }
                Ok(Cow::Owned(
                    merged
                        .into_iter()
                        .map(|(types, prob)| ProfileAtom { types, prob })
                        .collect(),
                ))
            }
        }
    }
}

/// `N_a` copies of each action index, in action order.
fn base_assignment(counts: &[u64], k: usize) -> Vec<usize> {
    let mut base = Vec::with_capacity(k);
    for (action, &n) in counts.iter().enumerate() {
        base.extend(std::iter::repeat_n(action, n as usize));
    }
    debug_assert_eq!(base.len(), k);
    base
}

/// Common-denominator rational approximation of a set of unit flows.
#[derive(Debug, Clone)]
pub struct RationalApproximation {
    pub k: u64,
    /// Distinct support flows, in first-seen order.
    pub support: Vec<FlowProfile>,
    /// Per support flow, the counts `N_a` with `sum_a N_a = k`.
    pub counts: Vec<Vec<u64>>,
    pub eta_requested: f64,
    pub eta_achieved: f64,
}

impl RationalApproximation {
    pub fn counts_for(&self, flow: &FlowProfile) -> Option<&[u64]> {
        self.support
            .iter()
            .position(|f| f.sup_distance(flow) <= FLOW_DISTINCT_TOL)
            .map(|i| self.counts[i].as_slice())
    }

    /// The rounded flow `N / k` for support index `i`.
    pub fn rounded_flow(&self, i: usize) -> FlowProfile {
        let k = self.k as f64;
        FlowProfile::new(1.0, self.counts[i].iter().map(|&n| n as f64 / k).collect())
            .expect("counts sum to k")
    }
}

/// Best rational approximation `p/q` of `x` with `q <= q_max`, by continued
/// fractions. Returns the denominator when the error is below `tol`.
fn rational_denominator(x: f64, q_max: u64, tol: f64) -> Option<u64> {
    let (mut p0, mut q0, mut p1, mut q1) = (1i64, 0u64, x.floor() as i64, 1u64);
    let mut frac = x - x.floor();
    for _ in 0..64 {
        if (p1 as f64 / q1 as f64 - x).abs() <= tol {
            return Some(q1);
        }
        if frac.abs() < 1e-15 {
            break;
        }
        let inv = 1.0 / frac;
        let a = inv.floor();
        frac = inv - a;
        let p2 = (a as i64) * p1 + p0;
        let q2 = (a as u64).saturating_mul(q1).saturating_add(q0);
        if q2 > q_max {
            break;
        }
        (p0, q0, p1, q1) = (p1, q1, p2, q2);
    }
    ((p1 as f64 / q1 as f64 - x).abs() <= tol).then_some(q1)
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Largest-remainder rounding of `k * y` to integer counts summing to `k`;
/// residual units go to the largest fractional parts, ties to the lowest
/// index.
fn largest_remainder(entries: &[f64], k: u64) -> Vec<u64> {
    let scaled: Vec<f64> = entries.iter().map(|y| y * k as f64).collect();
    let mut counts: Vec<u64> = scaled.iter().map(|v| v.floor().max(0.0) as u64).collect();
    let assigned: u64 = counts.iter().sum();
    let mut order: Vec<usize> = (0..entries.len()).collect();
    order.sort_by(|&i, &j| {
        let fi = scaled[i] - scaled[i].floor();
        let fj = scaled[j] - scaled[j].floor();
        fj.partial_cmp(&fi).unwrap().then(i.cmp(&j))
    });
    let mut residual = k.saturating_sub(assigned);
    for &i in &order {
        if residual == 0 {
            break;
        }
        counts[i] += 1;
        residual -= 1;
    }
    // flows sum to 1 within tolerance, so the floor sum never exceeds k; the
    // guard keeps pathological inputs from underflowing
    debug_assert_eq!(counts.iter().sum::<u64>(), k);
    counts
}

fn deviation(entries: &[f64], counts: &[u64], k: u64) -> f64 {
    entries
        .iter()
        .zip(counts)
        .map(|(y, &n)| (n as f64 / k as f64 - y).abs())
        .fold(0.0, f64::max)
}

/// Find one denominator `K` and per-flow counts with deviation at most `eta`.
///
/// `eta = 0` demands exact rationals: the fast path searches a common
/// denominator up to [`MAX_RATIONAL_DENOMINATOR`] by continued fractions and
/// fails otherwise. For `eta > 0` the fast path is tried first, then the
/// smallest `K` whose largest-remainder rounding meets `eta` (guaranteed at
/// `K = ceil(1/eta)`).
pub fn rational_approximation(flows: &[FlowProfile], eta: f64) -> Result<RationalApproximation> {
    if eta < 0.0 || !eta.is_finite() {
        return Err(Error::Domain(format!("eta must be >= 0, got {eta}")));
    }
    if flows.is_empty() {
        return Err(Error::Domain("no support flows to approximate".to_string()));
    }
    for f in flows {
        if (f.mass() - 1.0).abs() > MASS_TOL {
            return Err(Error::Domain("support flows must have mass 1".to_string()));
        }
    }
    let mut support: Vec<FlowProfile> = Vec::new();
    for f in flows {
        if !support
            .iter()
            .any(|g| g.sup_distance(f) <= FLOW_DISTINCT_TOL)
        {
            support.push(f.clone());
        }
    }

    // exact-rational fast path: lcm of per-entry denominators. The tolerance
    // sits just above f64 representation error of a true rational, so
    // incidental continued-fraction fits of irrational values are rejected.
    let mut lcm: Option<u64> = Some(1);
    'outer: for f in &support {
        for &y in f.entries() {
            match rational_denominator(y, MAX_RATIONAL_DENOMINATOR, 1e-14) {
                Some(q) => {
                    lcm = lcm.and_then(|l| {
                        let g = gcd(l, q);
                        let candidate = (l / g).checked_mul(q)?;
                        (candidate <= MAX_RATIONAL_DENOMINATOR).then_some(candidate)
                    });
                    if lcm.is_none() {
                        break 'outer;
                    }
                }
                None => {
                    lcm = None;
                    break 'outer;
                }
            }
        }
    }
    if let Some(k) = lcm {
        let counts: Vec<Vec<u64>> = support
            .iter()
            .map(|f| largest_remainder(f.entries(), k))
            .collect();
        let worst = support
            .iter()
            .zip(&counts)
            .map(|(f, c)| deviation(f.entries(), c, k))
            .fold(0.0, f64::max);
        if worst <= 1e-12 {
            return Ok(RationalApproximation {
                k,
                support,
                counts,
                eta_requested: eta,
                eta_achieved: 0.0,
            });
        }
    }
    if eta == 0.0 {
        return Err(Error::Domain(format!(
            "support flows are not rational with denominator <= {MAX_RATIONAL_DENOMINATOR}; request eta > 0"
        )));
    }

    let k_cap = (1.0 / eta).ceil() as u64 + 1;
    for k in 1..=k_cap {
        let counts: Vec<Vec<u64>> = support
            .iter()
            .map(|f| largest_remainder(f.entries(), k))
            .collect();
        let worst = support
            .iter()
            .zip(&counts)
            .map(|(f, c)| deviation(f.entries(), c, k))
            .fold(0.0, f64::max);
        if worst <= eta {
            return Ok(RationalApproximation {
                k,
                support,
                counts,
                eta_requested: eta,
                eta_achieved: worst,
            });
        }
    }
    Err(Error::Internal(format!(
        "largest-remainder rounding failed to reach eta = {eta} by K = {k_cap}"
    )))
}

/// Build the direct rotation-symmetric structure implementing `bcwe`.
pub fn build_direct_structure(
    game: &CongestionGame,
    bcwe: &FiniteOutcome,
    approx: &RationalApproximation,
) -> Result<InformationStructure> {
    if bcwe.n_states() != game.n_states() {
        return Err(Error::Inconsistent(format!(
            "outcome covers {} states, game has {}",
            bcwe.n_states(),
            game.n_states()
        )));
    }
    let k = approx.k;
    let mut per_state = Vec::with_capacity(game.n_states());
    for s in 0..game.n_states() {
        let mut atoms = Vec::new();
        for atom in bcwe.atoms(s) {
            let counts = approx.counts_for(&atom.flow).ok_or_else(|| {
                Error::Inconsistent(format!(
                    "support flow in state {s} missing from the rational approximation"
                ))
            })?;
            atoms.push(RotationAtom {
                counts: counts.to_vec(),
                prob: atom.prob,
            });
        }
        // outcomes tolerate 1e-10 probability slack, the signal law only
        // 1e-12: absorb the difference in the largest atom
        let total: f64 = atoms.iter().map(|a| a.prob).sum();
        if let Some(top) = atoms
            .iter_mut()
            .max_by(|a, b| a.prob.partial_cmp(&b.prob).unwrap())
        {
            top.prob += 1.0 - total;
        }
        per_state.push(atoms);
    }
    InformationStructure::new(
        game.states().to_vec(),
        vec![1.0 / k as f64; k as usize],
        vec![game.action_labels(); k as usize],
        SignalLaw::RotationSymmetric { k, per_state },
    )
}

/// The obedient interim profile of a direct structure: population `k` with
/// recommendation `a` puts its whole mass on `a`.
pub fn obedient_profile(
    game: &CongestionGame,
    structure: &InformationStructure,
) -> Result<InterimFlowProfile> {
    if !structure.is_direct_for(game) {
        return Err(Error::Domain(
            "obedient profile needs a direct structure (types = actions)".to_string(),
        ));
    }
    let n = game.n_actions();
    let flows = structure
        .population_sizes()
        .iter()
        .map(|&size| {
            (0..n)
                .map(|t| {
                    let mut row = vec![0.0; n];
                    row[t] = size;
                    row
                })
                .collect()
        })
        .collect();
    InterimFlowProfile::new(flows, structure.population_sizes().to_vec())
}

/// Empirical bound on the variation of the obedience maps
/// `y -> y_a cost_b(y, s)`.
#[derive(Debug, Clone, Copy)]
pub struct LipschitzEstimate {
    pub l: f64,
    pub sample_count: usize,
}

/// Max observed ratio `|f(y) - f(z)| / |y - z|_sup` over seeded random pairs
/// (half long-range, half short-range), all adjacent pairs of the
/// denominator-10 grid, and short-range probes anchored at the grid points.
/// `values` returns the vector of map values probed jointly.
fn max_variation_ratio(
    game: &CongestionGame,
    sample_count: usize,
    seed: u64,
    values: &dyn Fn(&[f64], usize) -> Vec<f64>,
) -> Result<f64> {
    if sample_count < 2 {
        return Err(Error::Domain("sample_count must be >= 2".to_string()));
    }
    let n = game.n_actions();
    let mut best: f64 = 0.0;
    let mut consider = |y: &[f64], z: &[f64]| {
        let dist = y
            .iter()
            .zip(z)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        if dist <= 1e-12 {
            return;
        }
        for s in 0..game.n_states() {
            let vy = values(y, s);
            let vz = values(z, s);
            for (a, b) in vy.iter().zip(&vz) {
                best = best.max((a - b).abs() / dist);
            }
        }
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sample = |rng: &mut ChaCha8Rng| -> Vec<f64> {
        let mut raw: Vec<f64> = (0..n).map(|_| -rng.gen_range(1e-9..1.0f64).ln()).collect();
        let total: f64 = raw.iter().sum();
        raw.iter_mut().for_each(|v| *v /= total);
        raw
    };
    for i in 0..sample_count {
        let y = sample(&mut rng);
        if i % 2 == 0 {
            let z = sample(&mut rng);
            consider(&y, &z);
        } else {
            // short-range probe along a random transfer direction
            let from = rng.gen_range(0..n);
            let to = (from + rng.gen_range(1..n.max(2))) % n;
            let h = 1e-6f64.min(y[from]);
            if h > 1e-12 {
                let mut z = y.clone();
                z[from] -= h;
                z[to] += h;
                consider(&y, &z);
            }
        }
    }

    // denominator-10 grid: adjacent pairs and short probes
    let grid = crate::grid::FlowGrid::new(10, n)?;
    for i in 0..grid.n_points() {
        let y = grid.flow(i);
        let y = y.entries();
        for from in 0..n {
            for to in 0..n {
                if from == to {
                    continue;
                }
                if y[from] >= 0.1 - 1e-12 {
                    let mut z = y.to_vec();
                    z[from] -= 0.1;
                    z[to] += 0.1;
                    consider(y, &z);
                }
                let h = 1e-6f64.min(y[from]);
                if h > 1e-12 {
                    let mut z = y.to_vec();
                    z[from] -= h;
                    z[to] += h;
                    consider(y, &z);
                }
            }
        }
    }

    Ok(best)
}

/// Empirical modulus of the obedience maps `y -> y_a cost_b(y, s)` over all
/// ordered action pairs.
pub fn estimate_modulus(
    game: &CongestionGame,
    sample_count: usize,
    seed: u64,
) -> Result<LipschitzEstimate> {
    let n = game.n_actions();
    let l = max_variation_ratio(game, sample_count, seed, &|entries, s| {
        let costs = game.action_costs_raw(entries, s);
        let mut vals = Vec::with_capacity(n * n);
        for a in 0..n {
            for &cb in &costs {
                vals.push(entries[a] * cb);
            }
        }
        vals
    })?;
    Ok(LipschitzEstimate { l, sample_count })
}

/// Empirical modulus of the per-state social cost `y -> sum_a y_a cost_a`.
pub fn estimate_social_cost_modulus(
    game: &CongestionGame,
    sample_count: usize,
    seed: u64,
) -> Result<LipschitzEstimate> {
    let l = max_variation_ratio(game, sample_count, seed, &|entries, s| {
        vec![game.social_cost_raw(entries, s)]
    })?;
    Ok(LipschitzEstimate { l, sample_count })
}

/// Obedience bound `4 L eta / eps0` for the designed structure, where `eps0`
/// is the smallest positive support flow of the correlated equilibrium.
/// Exact rounding (`eta_achieved = 0`) gives 0. Errors when
/// `eta_achieved > eps0 / 2`: the rounding is too coarse relative to the
/// support and a larger `K` is needed.
pub fn epsilon_bound(
    approx: &RationalApproximation,
    bcwe: &FiniteOutcome,
    lip: &LipschitzEstimate,
) -> Result<f64> {
    if approx.eta_achieved == 0.0 || lip.l == 0.0 {
        return Ok(0.0);
    }
    let eps0 = bcwe
        .support_flows()
        .iter()
        .flat_map(|f| f.entries().iter().copied())
        .filter(|&y| y > 0.0)
        .fold(f64::INFINITY, f64::min);
    if !eps0.is_finite() {
        return Err(Error::Domain("outcome has no positive flows".to_string()));
    }
    if approx.eta_achieved > eps0 / 2.0 {
        return Err(Error::Domain(format!(
            "eta_achieved = {} exceeds eps0/2 = {}; use a larger K (smaller eta)",
            approx.eta_achieved,
            eps0 / 2.0
        )));
    }
    Ok(4.0 * lip.l * approx.eta_achieved / eps0)
}
