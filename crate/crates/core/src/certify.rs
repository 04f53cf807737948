//! Full-implementation certificates and adversarial equilibrium search.
//!
//! Given a finite-support correlated equilibrium and the game, the pipeline
//! synthesizes the direct structure, verifies the obedient profile, then
//! attacks the extended game with multi-start equilibrium solves and reports
//! how much the found equilibria can diverge from the designed outcome. The
//! verdict vocabulary separates what the convexity class guarantees from
//! what the sampled runs actually showed:
//!
//! - `UniqueOutcome`: strictly convex potentials and every run reproduced
//!   the obedient outcome within the outcome tolerance;
//! - `UniqueSocialCost`: convex potentials and every run matched the
//!   obedient expected social cost within the cost tolerance;
//! - `PartialOnly`: the obedient profile is an equilibrium but runs diverge;
//! - `SolverLimited`: some run failed to converge, so no claim is made.
//!
//! The probe is separate machinery for games without convex potentials: a
//! damped synchronous best-response iteration whose per-block damping halves
//! whenever the best response flips (so oscillation around an indifference
//! point turns into bisection), followed by a sign-change sweep of pairwise
//! cost differences along segments between distinct candidates, which
//! recovers repelling equilibria sitting on basin boundaries.

use serde::Serialize;

use crate::bcwe;
use crate::bwe::{self, build_auxiliary, AuxiliaryGame, InterimFlowProfile, ZERO_PROB_TOL};
use crate::descent::{DescentConfig, SUPPORT_THRESHOLD};
use crate::design::{self, InformationStructure};
use crate::error::{Error, Result};
use crate::model::{CongestionGame, ConvexityClass, FiniteOutcome};

/// What the certificate claims about equilibrium selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    UniqueOutcome,
    UniqueSocialCost,
    PartialOnly,
    SolverLimited,
}

/// One multi-start solver run.
#[derive(Debug, Clone, Serialize)]
pub struct RunRecord {
    pub seed: u64,
    pub converged: bool,
    /// Ex-ante expected social cost of the run's outcome.
    pub expected_social_cost: Option<f64>,
    /// Atom-matching distance between the run's outcome and the obedient one.
    pub outcome_distance: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct FullImplementationCertificate {
    pub convexity: ConvexityClass,
    pub designed_k: u64,
    pub eta_achieved: f64,
    /// Normalized obedience slack of the obedient profile.
    pub obedient_epsilon: f64,
    /// A-priori bound on that slack from the rounding analysis.
    pub epsilon_bound: f64,
    pub bcwe_expected_social_cost: f64,
    pub obedient_expected_social_cost: f64,
    pub runs: Vec<RunRecord>,
    /// Per state, max over runs of the social-cost gap against the input
    /// correlated equilibrium.
    pub per_state_social_cost_gaps: Vec<f64>,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, Copy)]
pub struct FullCheckConfig {
    /// Rounding tolerance handed to the rational approximation (0 = exact).
    pub eta: f64,
    pub runs: usize,
    pub master_seed: u64,
    /// Expected-social-cost agreement tolerance.
    pub tol_cost: f64,
    /// Outcome atom-matching agreement tolerance.
    pub tol_outcome: f64,
    pub descent: DescentConfig,
}

impl Default for FullCheckConfig {
    fn default() -> Self {
        Self {
            eta: 0.0,
            runs: 8,
            master_seed: 7,
            tol_cost: 1e-6,
            tol_outcome: 1e-5,
            descent: DescentConfig::default(),
        }
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E3779B97F4A7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

fn derive_seed(master: u64, index: usize) -> u64 {
    splitmix64(master ^ (index as u64 + 1).wrapping_mul(0x9E3779B97F4A7C15))
}

/// Greedy atom-matching distance between two outcomes.
///
/// Per state: repeatedly match the closest remaining atom pair and score
/// `flow sup-distance + probability difference`; atoms left unmatched count
/// with their full probability. The overall distance is the max over states.
pub fn outcome_distance(a: &FiniteOutcome, b: &FiniteOutcome) -> f64 {
    let states = a.n_states().max(b.n_states());
    let mut overall: f64 = 0.0;
    for s in 0..states {
        let empty = Vec::new();
        let atoms_a = if s < a.n_states() { a.atoms(s) } else { &empty };
        let atoms_b = if s < b.n_states() { b.atoms(s) } else { &empty };
        let mut free_a: Vec<usize> = (0..atoms_a.len()).collect();
        let mut free_b: Vec<usize> = (0..atoms_b.len()).collect();
        let mut state_dist: f64 = 0.0;
        while !free_a.is_empty() && !free_b.is_empty() {
            let mut best = (0usize, 0usize, f64::INFINITY);
            for (ia, &i) in free_a.iter().enumerate() {
                for (jb, &j) in free_b.iter().enumerate() {
                    let d = atoms_a[i].flow.sup_distance(&atoms_b[j].flow);
                    if d < best.2 {
                        best = (ia, jb, d);
                    }
                }
            }
            let (ia, jb, d) = best;
            let i = free_a.swap_remove(ia);
            let j = free_b.swap_remove(jb);
            state_dist = state_dist.max(d + (atoms_a[i].prob - atoms_b[j].prob).abs());
        }
        for &i in &free_a {
            state_dist = state_dist.max(atoms_a[i].prob);
        }
        for &j in &free_b {
            state_dist = state_dist.max(atoms_b[j].prob);
        }
        overall = overall.max(state_dist);
    }
    overall
}

fn per_state_expected_social_cost(
    game: &CongestionGame,
    outcome: &FiniteOutcome,
    state: usize,
) -> f64 {
    outcome
        .atoms(state)
        .iter()
        .map(|a| a.prob * game.social_cost_raw(a.flow.entries(), state))
        .sum()
}

/// Synthesize, verify, and adversarially probe the designed structure.
pub fn full_check(
    game: &CongestionGame,
    bcwe: &FiniteOutcome,
    config: &FullCheckConfig,
) -> Result<FullImplementationCertificate> {
    let convexity = game.classify_potential();
    if convexity == ConvexityClass::NonConvex {
        return Err(Error::Unsupported(
            "full implementation certification needs convex potentials".to_string(),
        ));
    }
    let input_report = bcwe::verify_bcwe(game, bcwe, 1e-8)?;
    if !input_report.certified {
        return Err(Error::Domain(format!(
            "input outcome violates obedience by {:.3e}",
            input_report.violation
        )));
    }

    let approx = design::rational_approximation(&bcwe.support_flows(), config.eta)?;
    let structure = design::build_direct_structure(game, bcwe, &approx)?;
    let aux = build_auxiliary(game, &structure)?;
    let obedient = design::obedient_profile(game, &structure)?;
    let obedient_report = bwe::verify_eps_bwe_aux(&aux, &obedient)?;
    let lip = design::estimate_modulus(game, 1000, config.master_seed)?;
    let epsilon_bound = design::epsilon_bound(&approx, bcwe, &lip)?;
    let obedient_outcome = bwe::project_outcome(&structure, &obedient)?;
    let obedient_cost = obedient_outcome.expected_social_cost(game);
    let bcwe_cost = bcwe.expected_social_cost(game);

    let mut runs = Vec::with_capacity(config.runs);
    let mut per_state_gaps = vec![0.0f64; game.n_states()];
    let mut all_converged = true;
    let mut outcomes_ok = true;
    let mut costs_ok = true;
    for i in 0..config.runs {
        let seed = derive_seed(config.master_seed, i);
        let start = aux.random_interior_profile(seed);
        match bwe::solve_bwe_aux(&aux, &config.descent, Some(&start)) {
            Ok(sol) => {
                let outcome = bwe::project_outcome(&structure, &sol.profile)?;
                let cost = outcome.expected_social_cost(game);
                let distance = outcome_distance(&outcome, &obedient_outcome);
                for (s, gap) in per_state_gaps.iter_mut().enumerate() {
                    let run_sc = per_state_expected_social_cost(game, &outcome, s);
                    let bcwe_sc = per_state_expected_social_cost(game, bcwe, s);
                    *gap = gap.max((run_sc - bcwe_sc).abs());
                }
                if distance > config.tol_outcome {
                    outcomes_ok = false;
                }
                if (cost - obedient_cost).abs() > config.tol_cost {
                    costs_ok = false;
                }
                runs.push(RunRecord {
                    seed,
                    converged: true,
                    expected_social_cost: Some(cost),
                    outcome_distance: Some(distance),
                });
            }
            Err(Error::Convergence { .. }) => {
                all_converged = false;
                runs.push(RunRecord {
                    seed,
                    converged: false,
                    expected_social_cost: None,
                    outcome_distance: None,
                });
            }
            Err(e) => return Err(e),
        }
    }

    let verdict = if !all_converged {
        Verdict::SolverLimited
    } else if convexity == ConvexityClass::StrictlyConvexOnSimplex && outcomes_ok {
        Verdict::UniqueOutcome
    } else if costs_ok {
        Verdict::UniqueSocialCost
    } else {
        Verdict::PartialOnly
    };

    Ok(FullImplementationCertificate {
        convexity,
        designed_k: approx.k,
        eta_achieved: approx.eta_achieved,
        obedient_epsilon: obedient_report.epsilon,
        epsilon_bound,
        bcwe_expected_social_cost: bcwe_cost,
        obedient_expected_social_cost: obedient_cost,
        runs,
        per_state_social_cost_gaps: per_state_gaps,
        verdict,
    })
}

/// Options for the best-response equilibrium search.
#[derive(Debug, Clone, Copy)]
pub struct ProbeConfig {
    pub starts: usize,
    pub steps: usize,
    pub master_seed: u64,
    /// Candidates must verify to this conditional slack.
    pub eps_tol: f64,
    /// Outcome distance below which two candidates collapse.
    pub dedup_distance: f64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            starts: 32,
            steps: 10_000,
            master_seed: 7,
            eps_tol: 1e-6,
            dedup_distance: 1e-4,
        }
    }
}

/// One equilibrium candidate found by the probe.
#[derive(Debug, Clone)]
pub struct BweCandidate {
    pub profile: InterimFlowProfile,
    pub outcome: FiniteOutcome,
    pub epsilon: f64,
}

/// Damped synchronous best-response step; returns the largest movement.
fn best_response_step(
    aux: &AuxiliaryGame,
    point: &mut [Vec<f64>],
    damping: &mut [f64],
    prev_best: &mut [Option<usize>],
) -> f64 {
    let costs = aux.interim_costs_flat(point);
    let mut movement: f64 = 0.0;
    for (block, row) in point.iter_mut().enumerate() {
        if aux.type_probs[block] <= ZERO_PROB_TOL {
            continue;
        }
        let mass: f64 = aux.sizes()[aux.block_owner[block].0];
        let c = &costs[block];
        let mut best = 0usize;
        for a in 1..c.len() {
            if c[a] < c[best] {
                best = a;
            }
        }
        // already supported only on (numerically) cheapest actions: stay put
        let support = SUPPORT_THRESHOLD * mass;
        let scale = c.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
        let settled = row
            .iter()
            .enumerate()
            .all(|(a, &y)| y <= support || c[a] - c[best] <= 1e-14 * scale);
        if settled {
            continue;
        }
        if let Some(p) = prev_best[block] {
            if p != best {
                damping[block] *= 0.5;
            }
        }
        prev_best[block] = Some(best);
        let lambda = damping[block];
        for (a, y) in row.iter_mut().enumerate() {
            let target = if a == best { mass } else { 0.0 };
            let delta = lambda * (target - *y);
            movement = movement.max(delta.abs());
            *y += delta;
        }
    }
    movement
}

fn candidate_from_point(
    aux: &AuxiliaryGame,
    structure: &InformationStructure,
    point: Vec<Vec<f64>>,
    eps_tol: f64,
) -> Result<Option<BweCandidate>> {
    let profile = aux.unflat(point);
    let report = bwe::verify_eps_bwe_aux(aux, &profile)?;
    if report.epsilon > eps_tol {
        return Ok(None);
    }
    let outcome = bwe::project_outcome(structure, &profile)?;
    Ok(Some(BweCandidate {
        profile,
        outcome,
        epsilon: report.epsilon,
    }))
}

fn push_deduped(candidates: &mut Vec<BweCandidate>, candidate: BweCandidate, dedup: f64) {
    if candidates
        .iter()
        .all(|c| outcome_distance(&c.outcome, &candidate.outcome) > dedup)
    {
        candidates.push(candidate);
    }
}

/// Search for distinct Bayesian Wardrop equilibria of the extended game.
///
/// Runs the damped best-response iteration from `starts` random interior
/// profiles, keeps limits that verify as equilibria, then bisects pairwise
/// cost-difference sign changes along segments between distinct candidates
/// to pick up repelling equilibria on basin boundaries.
pub fn adversarial_probe(
    game: &CongestionGame,
    structure: &InformationStructure,
    config: &ProbeConfig,
) -> Result<Vec<BweCandidate>> {
    let aux = build_auxiliary(game, structure)?;
    let n_blocks = aux.block_owner.len();
    let mut candidates: Vec<BweCandidate> = Vec::new();

    for i in 0..config.starts {
        let seed = derive_seed(config.master_seed, i);
        let mut point = aux.flat(&aux.random_interior_profile(seed));
        let mut damping = vec![0.5; n_blocks];
        let mut prev_best = vec![None; n_blocks];
        for _ in 0..config.steps {
            let movement = best_response_step(&aux, &mut point, &mut damping, &mut prev_best);
            if movement < 1e-16 {
                break;
            }
        }
        if let Some(c) = candidate_from_point(&aux, structure, point, config.eps_tol)? {
            push_deduped(&mut candidates, c, config.dedup_distance);
        }
    }

    // basin-boundary sweep between the distinct best-response limits only;
    // recursing over sweep-found candidates need not terminate when whole
    // segments are indifferent
    let limits = candidates.clone();
    for (i, to) in limits.iter().enumerate() {
        for from in &limits[..i] {
            let from = aux.flat(&from.profile);
            let to = aux.flat(&to.profile);
            for point in indifference_roots(&aux, &from, &to) {
                if let Some(c) = candidate_from_point(&aux, structure, point, config.eps_tol)? {
                    push_deduped(&mut candidates, c, config.dedup_distance);
                }
            }
        }
    }
    Ok(candidates)
}

fn blend(from: &[Vec<f64>], to: &[Vec<f64>], s: f64) -> Vec<Vec<f64>> {
    from.iter()
        .zip(to)
        .map(|(f, t)| {
            f.iter()
                .zip(t)
                .map(|(a, b)| (1.0 - s) * a + s * b)
                .collect()
        })
        .collect()
}

/// Points on the segment where some block's pairwise cost difference changes
/// sign, located by scan plus bisection.
fn indifference_roots(
    aux: &AuxiliaryGame,
    from: &[Vec<f64>],
    to: &[Vec<f64>],
) -> Vec<Vec<Vec<f64>>> {
    const SCAN: usize = 64;
    let n_blocks = aux.block_owner.len();
    let n_actions = from.first().map(Vec::len).unwrap_or(0);
    let diff = |s: f64, block: usize, a: usize, b: usize| -> f64 {
        let costs = aux.interim_costs_flat(&blend(from, to, s));
        costs[block][a] - costs[block][b]
    };
    let mut roots = Vec::new();
    for block in 0..n_blocks {
        if aux.type_probs[block] <= ZERO_PROB_TOL {
            continue;
        }
        for a in 0..n_actions {
            for b in a + 1..n_actions {
                let mut prev_s = 0.0;
                let mut prev_v = diff(0.0, block, a, b);
                for i in 1..=SCAN {
                    let s = i as f64 / SCAN as f64;
                    let v = diff(s, block, a, b);
                    // strict sign change only: identically-zero differences
                    // (ties everywhere) carry no boundary information
                    if prev_v * v < 0.0 {
                        let (mut lo, mut hi) = (prev_s, s);
                        let mut f_lo = prev_v;
                        for _ in 0..60 {
                            let mid = 0.5 * (lo + hi);
                            let f_mid = diff(mid, block, a, b);
                            if f_lo.signum() == f_mid.signum() {
                                lo = mid;
                                f_lo = f_mid;
                            } else {
                                hi = mid;
                            }
                        }
                        roots.push(blend(from, to, 0.5 * (lo + hi)));
                    }
                    prev_s = s;
                    prev_v = v;
                }
            }
        }
    }
    roots
}
