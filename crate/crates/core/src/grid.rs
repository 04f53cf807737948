//! Uniform rational discretization of the flow simplex.
//!
//! A grid with denominator `D` holds every flow whose entries are multiples
//! of `1/D`. Points are stored as integer count vectors summing to `D`, so
//! membership and masses are exact; the float view is derived on demand.

use crate::error::{Error, Result};
use crate::model::FlowProfile;

#[derive(Debug, Clone)]
pub struct FlowGrid {
    denominator: u64,
    n_actions: usize,
    counts: Vec<Vec<u64>>,
}

fn enumerate_counts(out: &mut Vec<Vec<u64>>, prefix: &mut Vec<u64>, remaining: u64, slots: usize) {
    if slots == 1 {
        prefix.push(remaining);
        out.push(prefix.clone());
        prefix.pop();
        return;
    }
    for v in 0..=remaining {
        prefix.push(v);
        enumerate_counts(out, prefix, remaining - v, slots - 1);
        prefix.pop();
    }
}

impl FlowGrid {
    /// All count vectors summing to `denominator`, in ascending lexicographic
    /// order.
    pub fn new(denominator: u64, n_actions: usize) -> Result<Self> {
        if denominator == 0 {
            return Err(Error::Domain("grid denominator must be >= 1".to_string()));
        }
        if n_actions == 0 {
            return Err(Error::Domain("grid needs at least one action".to_string()));
        }
        let mut counts = Vec::new();
        enumerate_counts(&mut counts, &mut Vec::new(), denominator, n_actions);
        Ok(Self {
            denominator,
            n_actions,
            counts,
        })
    }

    pub fn denominator(&self) -> u64 {
        self.denominator
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn n_points(&self) -> usize {
        self.counts.len()
    }

    pub fn counts(&self, index: usize) -> &[u64] {
        &self.counts[index]
    }

    pub fn iter_counts(&self) -> impl Iterator<Item = &[u64]> {
        self.counts.iter().map(Vec::as_slice)
    }

    pub fn flow(&self, index: usize) -> FlowProfile {
        let d = self.denominator as f64;
        let entries = self.counts[index].iter().map(|&c| c as f64 / d).collect();
        FlowProfile::new(1.0, entries).expect("grid point is a unit flow")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn binomial(n: u64, k: u64) -> u64 {
        let k = k.min(n - k);
        let mut num = 1u64;
        let mut den = 1u64;
        for i in 0..k {
            num *= n - i;
            den *= i + 1;
        }
        num / den
    }

    #[test]
    fn point_count_is_stars_and_bars() {
        for (d, n) in [(1u64, 2usize), (6, 2), (4, 3), (3, 4)] {
            let grid = FlowGrid::new(d, n).unwrap();
            let expected = binomial(d + n as u64 - 1, n as u64 - 1);
            assert_eq!(grid.n_points() as u64, expected);
            for counts in grid.iter_counts() {
                assert_eq!(counts.iter().sum::<u64>(), d);
            }
        }
    }

    #[test]
    fn lexicographic_order() {
        let grid = FlowGrid::new(2, 3).unwrap();
        let pts: Vec<&[u64]> = grid.iter_counts().collect();
        assert_eq!(pts[0], &[0, 0, 2]);
        assert_eq!(pts[1], &[0, 1, 1]);
        assert_eq!(pts.last().unwrap(), &&[2, 0, 0][..]);
        for w in pts.windows(2) {
            assert!(w[0] < w[1]);
        }
    }

    #[test]
    fn rejects_zero_denominator() {
        assert!(FlowGrid::new(0, 2).is_err());
    }
}
