//! Shared helpers for the integration and acceptance test suites.

#![allow(dead_code)]

pub mod oracle;

use rand::Rng;
use wardrop_core::curve::PiecewiseCostCurve;
use wardrop_core::model::CongestionGame;

/// Random singleton congestion game with strictly increasing affine curves.
pub fn random_strict_singleton_game<R: Rng>(rng: &mut R) -> CongestionGame {
    let n_states = rng.gen_range(1..=3);
    let n_actions = rng.gen_range(2..=4);
    let mut prior: Vec<f64> = (0..n_states).map(|_| rng.gen_range(0.2..1.0)).collect();
    let total: f64 = prior.iter().sum();
    for p in &mut prior {
        *p /= total;
    }
    // close the rounding residue on the first entry so the prior sums to 1
    let drift: f64 = prior.iter().sum::<f64>() - 1.0;
    prior[0] -= drift;
    let states = (0..n_states).map(|s| format!("s{s}")).collect();
    let resources: Vec<String> = (0..n_actions).map(|e| format!("r{e}")).collect();
    let actions = (0..n_actions).map(|e| vec![e]).collect();
    let curves = (0..n_actions)
        .map(|_| {
            (0..n_states)
                .map(|_| {
                    PiecewiseCostCurve::affine(
                        rng.gen_range(0.0..2.0),
                        rng.gen_range(0.5..3.0),
                    )
                })
                .collect()
        })
        .collect();
    CongestionGame::new(states, prior, resources, actions, curves).expect("random game is valid")
}

/// Uniform sample from the interior of the scaled simplex.
pub fn random_interior_flow<R: Rng>(rng: &mut R, mass: f64, n: usize) -> Vec<f64> {
    let mut raw: Vec<f64> = (0..n).map(|_| -rng.gen_range(1e-6..1.0f64).ln()).collect();
    let total: f64 = raw.iter().sum();
    for v in &mut raw {
        *v *= mass / total;
    }
    let drift: f64 = raw.iter().sum::<f64>() - mass;
    raw[0] -= drift;
    raw
}

/// Game whose actions are multi-resource subsets (a small three-route network
/// over three links).
pub fn subset_action_game() -> CongestionGame {
    CongestionGame::new(
        vec!["calm".into(), "busy".into()],
        vec![0.7, 0.3],
        vec!["r0".into(), "r1".into(), "r2".into()],
        vec![vec![0, 1], vec![1, 2], vec![0, 2]],
        vec![
            vec![
                PiecewiseCostCurve::affine(0.2, 1.0),
                PiecewiseCostCurve::affine(0.4, 2.0),
            ],
            vec![
                PiecewiseCostCurve::affine(0.1, 0.5),
                PiecewiseCostCurve::affine(0.1, 1.5),
            ],
            vec![
                PiecewiseCostCurve::new(
                    vec![0.0, 0.5, 1.0],
                    vec![vec![0.3, 1.0], vec![0.05, 1.5]],
                )
                .unwrap(),
                PiecewiseCostCurve::affine(0.6, 1.0),
            ],
        ],
    )
    .expect("subset game is valid")
}

/// Random direct structure for `game`: 2-3 equal populations with action
/// recommendations and a small random explicit law per state.
pub fn random_direct_structure<R: Rng>(
    rng: &mut R,
    game: &CongestionGame,
) -> wardrop_core::design::InformationStructure {
    use wardrop_core::design::{InformationStructure, ProfileAtom, SignalLaw};
    let k = rng.gen_range(2..=3usize);
    let n = game.n_actions();
    let per_state = (0..game.n_states())
        .map(|_| {
            let atoms = rng.gen_range(2..=3usize);
            let mut probs: Vec<f64> = (0..atoms).map(|_| rng.gen_range(0.1..1.0)).collect();
            let total: f64 = probs.iter().sum();
            for p in &mut probs {
                *p /= total;
            }
            let drift: f64 = probs.iter().sum::<f64>() - 1.0;
            probs[0] -= drift;
            probs
                .into_iter()
                .map(|prob| ProfileAtom {
                    types: (0..k).map(|_| rng.gen_range(0..n)).collect(),
                    prob,
                })
                .collect()
        })
        .collect();
    InformationStructure::new(
        game.states().to_vec(),
        vec![1.0 / k as f64; k],
        vec![game.action_labels(); k],
        SignalLaw::Explicit { per_state },
    )
    .expect("random structure is valid")
}

/// All distinct assignments of `counts[a]` copies of each action to `k`
/// populations (multiset permutations), for the uniform-subset encoding.
pub fn multiset_permutations(counts: &[u64], k: usize) -> Vec<Vec<usize>> {
    fn rec(remaining: &mut Vec<u64>, acc: &mut Vec<usize>, k: usize, out: &mut Vec<Vec<usize>>) {
        if acc.len() == k {
            out.push(acc.clone());
            return;
        }
        for a in 0..remaining.len() {
            if remaining[a] == 0 {
                continue;
            }
            remaining[a] -= 1;
            acc.push(a);
            rec(remaining, acc, k, out);
            acc.pop();
            remaining[a] += 1;
        }
    }
    let mut out = Vec::new();
    rec(&mut counts.to_vec(), &mut Vec::new(), k, &mut out);
    out
}
