//! Randomized invariants with shrinking.

mod common;

use proptest::prelude::*;
use wardrop_core::curve::PiecewiseCostCurve;
use wardrop_core::design;
use wardrop_core::fixtures;
use wardrop_core::grid::FlowGrid;
use wardrop_core::io;
use wardrop_core::model::{FiniteOutcome, FlowProfile, OutcomeAtom};

fn unit_flow(n: usize) -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(1e-6..1.0f64, n).prop_map(|raw| {
        let total: f64 = raw.iter().sum();
        let mut entries: Vec<f64> = raw.iter().map(|v| v / total).collect();
        let drift: f64 = entries.iter().sum::<f64>() - 1.0;
        entries[0] -= drift;
        entries
    })
}

proptest! {
    /// Rounding always lands on the simplex grid and within the tolerance.
    #[test]
    fn rational_approximation_contract(
        entries in unit_flow(3),
        eta in 1e-4..0.2f64,
    ) {
        let flow = FlowProfile::simplex(entries).unwrap();
        let approx = design::rational_approximation(&[flow], eta).unwrap();
        for counts in &approx.counts {
            prop_assert_eq!(counts.iter().sum::<u64>(), approx.k);
        }
        prop_assert!(approx.eta_achieved <= eta);
        prop_assert!(approx.eta_achieved <= approx.eta_requested.max(1e-12));
    }

    /// Grid enumeration is exact, complete, and ordered.
    #[test]
    fn grid_points_are_exact_and_ordered(d in 1u64..8, n in 1usize..5) {
        let grid = FlowGrid::new(d, n).unwrap();
        let mut previous: Option<Vec<u64>> = None;
        for counts in grid.iter_counts() {
            prop_assert_eq!(counts.iter().sum::<u64>(), d);
            if let Some(prev) = &previous {
                prop_assert!(prev.as_slice() < counts);
            }
            previous = Some(counts.to_vec());
        }
        let binom = |n: u64, k: u64| -> u64 {
            let k = k.min(n - k);
            (0..k).fold(1u64, |acc, i| acc * (n - i) / (i + 1))
        };
        prop_assert_eq!(grid.n_points() as u64, binom(d + n as u64 - 1, n as u64 - 1));
    }

    /// Weighted curve averaging is pointwise.
    #[test]
    fn curve_average_is_pointwise(
        c0 in -2.0..2.0f64,
        c1 in -2.0..2.0f64,
        w in 0.05..0.95f64,
        x in 0.0..1.0f64,
    ) {
        let a = PiecewiseCostCurve::affine(c0, c1);
        let b = PiecewiseCostCurve::new(
            vec![0.0, 0.5, 1.0],
            vec![vec![2.0, -4.0], vec![-2.0, 4.0]],
        ).unwrap();
        let avg = PiecewiseCostCurve::weighted_average(&[(w, &a), (1.0 - w, &b)]);
        let expected = w * a.value(x) + (1.0 - w) * b.value(x);
        prop_assert!((avg.value(x) - expected).abs() <= 1e-12);
    }

    /// Outcome documents survive a serialize/parse round trip.
    #[test]
    fn outcome_documents_round_trip(
        flow_a in unit_flow(2),
        flow_b in unit_flow(2),
        p in 0.05..0.95f64,
    ) {
        let game = fixtures::two_state_binary();
        let fa = FlowProfile::simplex(flow_a).unwrap();
        let fb = FlowProfile::simplex(flow_b).unwrap();
        prop_assume!(fa.sup_distance(&fb) > 1e-9);
        let outcome = FiniteOutcome::new(vec![
            vec![
                OutcomeAtom { flow: fa.clone(), prob: p },
                OutcomeAtom { flow: fb.clone(), prob: 1.0 - p },
            ],
            vec![OutcomeAtom { flow: fa, prob: 1.0 }],
        ]).unwrap();
        let text = serde_json::to_string(&io::outcome_to_doc(&outcome, &game)).unwrap();
        let parsed = io::parse_outcome(&text, &game).unwrap();
        prop_assert_eq!(parsed, outcome);
    }
}
