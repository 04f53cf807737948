//! Exact brute-force confirmation of the grid obedience LP optimum on the
//! two-state binary fixture. Run before trusting (and independently of) the
//! floating-point simplex path.

mod common;

use common::oracle::{brute_force_binary_fixture_d6, rat};

#[test]
fn rational_brute_force_pins_the_optimum() {
    let result = brute_force_binary_fixture_d6();
    assert_eq!(result.value, rat(17, 36), "exact optimum must be 17/36");
    assert!(!result.optimal_vertices.is_empty());
    for (low, high) in &result.optimal_vertices {
        // every optimal vertex is the point mass pair ((1,0), (5/6,1/6))
        assert_eq!(low.len(), 1);
        assert_eq!(high.len(), 1);
        assert_eq!(low[0].0, 0, "low state puts no mass on b");
        assert_eq!(low[0].1, rat(1, 1));
        assert_eq!(high[0].0, 1, "high state puts one sixth on b");
        assert_eq!(high[0].1, rat(1, 1));
    }
}
