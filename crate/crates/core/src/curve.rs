//! Piecewise-polynomial resource cost curves.
//!
//! A curve maps a load in [0, 1] to a cost. It is stored as strictly
//! increasing breakpoints `0 = b_0 < b_1 < .. < b_m = 1` plus one polynomial
//! per interval, with coefficients in the load variable, constant term first.
//! Adjacent pieces must agree at interior breakpoints to within 1e-12, so the
//! curve is continuous and its load integral is well defined in closed form.
//!
//! Evaluation slightly outside [0, 1] extrapolates the boundary pieces. That
//! keeps the curve (and hence the congestion potential) defined on an open
//! superset of the flow simplex, which is what one-sided finite-difference
//! probes of the potential need.

use serde::{Deserialize, Serialize};

use crate::error::CurveError;

/// Continuity tolerance at interior breakpoints.
pub const CONTINUITY_TOL: f64 = 1e-12;

/// Samples per piece used by the monotonicity checks.
const DERIVATIVE_SAMPLES: usize = 129;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseCostCurve {
    breakpoints: Vec<f64>,
    pieces: Vec<Vec<f64>>,
}

fn poly_eval(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

/// Antiderivative of `coeffs` (with zero constant) evaluated between `lo` and `hi`.
fn poly_integral(coeffs: &[f64], lo: f64, hi: f64) -> f64 {
    let mut total = 0.0;
    let mut pow_lo = lo;
    let mut pow_hi = hi;
    for (k, &c) in coeffs.iter().enumerate() {
        total += c * (pow_hi - pow_lo) / (k as f64 + 1.0);
        pow_lo *= lo;
        pow_hi *= hi;
    }
    total
}

fn poly_derivative_eval(coeffs: &[f64], x: f64) -> f64 {
    let mut acc = 0.0;
    for (k, &c) in coeffs.iter().enumerate().skip(1).rev() {
        acc = acc * x + c * k as f64;
    }
    acc
}

impl PiecewiseCostCurve {
    /// Build a curve, checking breakpoint shape and continuity.
    pub fn new(breakpoints: Vec<f64>, pieces: Vec<Vec<f64>>) -> Result<Self, CurveError> {
        if breakpoints.len() < 2
            || breakpoints[0].abs() > CONTINUITY_TOL
            || (breakpoints[breakpoints.len() - 1] - 1.0).abs() > CONTINUITY_TOL
        {
            return Err(CurveError::BadRange {
                first: breakpoints.first().copied().unwrap_or(f64::NAN),
                last: breakpoints.last().copied().unwrap_or(f64::NAN),
            });
        }
        for i in 1..breakpoints.len() {
            if breakpoints[i] <= breakpoints[i - 1] {
                return Err(CurveError::NotIncreasing { index: i });
            }
        }
        if pieces.len() + 1 != breakpoints.len() {
            return Err(CurveError::PieceCount {
                breakpoints: breakpoints.len(),
                pieces: pieces.len(),
            });
        }
        for (i, piece) in pieces.iter().enumerate() {
            if piece.iter().any(|c| !c.is_finite()) {
                return Err(CurveError::NonFinite { piece: i });
            }
        }
        for i in 1..pieces.len() {
            let at = breakpoints[i];
            let left = poly_eval(&pieces[i - 1], at);
            let right = poly_eval(&pieces[i], at);
            let jump = (left - right).abs();
            if jump > CONTINUITY_TOL {
                return Err(CurveError::Discontinuous { at, jump });
            }
        }
        Ok(Self {
            breakpoints,
            pieces,
        })
    }

    /// Constant cost curve.
    pub fn constant(c: f64) -> Self {
        Self::new(vec![0.0, 1.0], vec![vec![c]]).expect("constant curve is valid")
    }

    /// Affine cost curve `c0 + c1 * load`.
    pub fn affine(c0: f64, c1: f64) -> Self {
        Self::new(vec![0.0, 1.0], vec![vec![c0, c1]]).expect("affine curve is valid")
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn pieces(&self) -> &[Vec<f64>] {
        &self.pieces
    }

    /// Index of the piece covering `x`, with boundary pieces extended.
    fn piece_index(&self, x: f64) -> usize {
        let last = self.pieces.len() - 1;
        if x >= self.breakpoints[last] {
            return last;
        }
        // partition_point: first breakpoint strictly above x
        let upper = self.breakpoints.partition_point(|&b| b <= x);
        upper.saturating_sub(1).min(last)
    }

    /// Cost at load `x`.
    pub fn value(&self, x: f64) -> f64 {
        poly_eval(&self.pieces[self.piece_index(x)], x)
    }

    /// One-sided derivative at load `x` (right piece at breakpoints, left at 1).
    pub fn derivative(&self, x: f64) -> f64 {
        poly_derivative_eval(&self.pieces[self.piece_index(x)], x)
    }

    /// Closed-form load integral from 0 to `x`.
    pub fn integral_to(&self, x: f64) -> f64 {
        let idx = self.piece_index(x);
        let mut total = 0.0;
        for i in 0..idx {
            total += poly_integral(&self.pieces[i], self.breakpoints[i], self.breakpoints[i + 1]);
        }
        total + poly_integral(&self.pieces[idx], self.breakpoints[idx], x)
    }

    /// Smallest derivative value found on a dense per-piece sample of [0, 1].
    ///
    /// A sufficient-condition check: desk-scale curves have low degree, so
    /// dense sampling plus exact endpoints is reliable in practice.
    pub fn min_derivative(&self) -> f64 {
        let mut min = f64::INFINITY;
        for (i, piece) in self.pieces.iter().enumerate() {
            let lo = self.breakpoints[i];
            let hi = self.breakpoints[i + 1];
            for s in 0..DERIVATIVE_SAMPLES {
                let t = lo + (hi - lo) * s as f64 / (DERIVATIVE_SAMPLES - 1) as f64;
                min = min.min(poly_derivative_eval(piece, t));
            }
        }
        min
    }

    pub fn is_nondecreasing(&self) -> bool {
        self.min_derivative() >= -CONTINUITY_TOL
    }

    pub fn is_strictly_increasing(&self) -> bool {
        self.min_derivative() > CONTINUITY_TOL
    }

    /// Prior-weighted average of curves on the merged breakpoint grid.
    pub fn weighted_average(curves: &[(f64, &PiecewiseCostCurve)]) -> Self {
        let mut grid: Vec<f64> = curves
            .iter()
            .flat_map(|(_, c)| c.breakpoints.iter().copied())
            .collect();
        grid.sort_by(|a, b| a.partial_cmp(b).unwrap());
        grid.dedup_by(|a, b| (*a - *b).abs() <= CONTINUITY_TOL);
        let max_len = curves
            .iter()
            .flat_map(|(_, c)| c.pieces.iter().map(Vec::len))
            .max()
            .unwrap_or(1);
        let mut pieces = Vec::with_capacity(grid.len() - 1);
        for w in grid.windows(2) {
            let mid = 0.5 * (w[0] + w[1]);
            let mut coeffs = vec![0.0; max_len];
            for (weight, curve) in curves {
                let piece = &curve.pieces[curve.piece_index(mid)];
                for (k, &c) in piece.iter().enumerate() {
                    coeffs[k] += weight * c;
                }
            }
            pieces.push(coeffs);
        }
        Self::new(grid, pieces).expect("averaged curve inherits continuity")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn vshape() -> PiecewiseCostCurve {
        // max(2 - 4x, 4x - 2)
        PiecewiseCostCurve::new(vec![0.0, 0.5, 1.0], vec![vec![2.0, -4.0], vec![-2.0, 4.0]])
            .unwrap()
    }

    /// Simpson-rule oracle for the closed-form integral.
    fn quadrature(curve: &PiecewiseCostCurve, x: f64) -> f64 {
        let n = 20_000;
        let h = x / n as f64;
        let mut acc = curve.value(0.0) + curve.value(x);
        for i in 1..n {
            let w = if i % 2 == 0 { 2.0 } else { 4.0 };
            acc += w * curve.value(i as f64 * h);
        }
        acc * h / 3.0
    }

    #[test]
    fn evaluates_across_breakpoints() {
        let c = vshape();
        assert_abs_diff_eq!(c.value(0.0), 2.0);
        assert_abs_diff_eq!(c.value(0.25), 1.0);
        assert_abs_diff_eq!(c.value(0.5), 0.0);
        assert_abs_diff_eq!(c.value(0.75), 1.0);
        assert_abs_diff_eq!(c.value(1.0), 2.0);
    }

    #[test]
    fn rejects_discontinuity() {
        let err = PiecewiseCostCurve::new(
            vec![0.0, 0.5, 1.0],
            vec![vec![0.0, 1.0], vec![1.0, 1.0]],
        )
        .unwrap_err();
        assert_eq!(err.code(), "CURVE_DISCONTINUOUS");
    }

    #[test]
    fn rejects_bad_breakpoints() {
        assert_eq!(
            PiecewiseCostCurve::new(vec![0.0, 0.9], vec![vec![1.0]])
                .unwrap_err()
                .code(),
            "CURVE_RANGE"
        );
        assert_eq!(
            PiecewiseCostCurve::new(vec![0.0, 0.5, 0.5, 1.0], vec![vec![1.0]; 3])
                .unwrap_err()
                .code(),
            "CURVE_BREAKPOINTS"
        );
    }

    #[test]
    fn integral_matches_quadrature() {
        let c = vshape();
        for &x in &[0.1, 0.5, 0.65, 1.0] {
            assert_abs_diff_eq!(c.integral_to(x), quadrature(&c, x), epsilon = 1e-9);
        }
        // exact value: int_0^1 = 1/2 + 1/2 = 1
        assert_abs_diff_eq!(c.integral_to(1.0), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(c.integral_to(0.0), 0.0);
    }

    #[test]
    fn boundary_pieces_extrapolate() {
        let c = PiecewiseCostCurve::affine(1.0 / 3.0, 2.0);
        assert_abs_diff_eq!(c.value(1.001), 1.0 / 3.0 + 2.002, epsilon = 1e-12);
        assert_abs_diff_eq!(c.value(-0.001), 1.0 / 3.0 - 0.002, epsilon = 1e-12);
        let h = 1e-6;
        let fd = (c.integral_to(1.0 + h) - c.integral_to(1.0 - h)) / (2.0 * h);
        assert_abs_diff_eq!(fd, c.value(1.0), epsilon = 1e-8);
    }

    #[test]
    fn monotonicity_flags() {
        assert!(PiecewiseCostCurve::constant(1.0).is_nondecreasing());
        assert!(!PiecewiseCostCurve::constant(1.0).is_strictly_increasing());
        assert!(PiecewiseCostCurve::affine(0.0, 2.0).is_strictly_increasing());
        assert!(!vshape().is_nondecreasing());
    }

    #[test]
    fn averaging_merges_grids() {
        let a = PiecewiseCostCurve::constant(0.0);
        let b = PiecewiseCostCurve::constant(1.0);
        let avg = PiecewiseCostCurve::weighted_average(&[(0.5, &a), (0.5, &b)]);
        assert_abs_diff_eq!(avg.value(0.3), 0.5);

        let v = vshape();
        let lin = PiecewiseCostCurve::affine(1.0, 2.0);
        let avg = PiecewiseCostCurve::weighted_average(&[(0.25, &v), (0.75, &lin)]);
        for &x in &[0.0, 0.2, 0.5, 0.8, 1.0] {
            assert_abs_diff_eq!(avg.value(x), 0.25 * v.value(x) + 0.75 * lin.value(x));
        }
    }
}
