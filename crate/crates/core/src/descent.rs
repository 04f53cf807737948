//! Conditional-gradient minimization over a product of scaled simplices.
//!
//! The driver is Frank-Wolfe with the open-loop step `2/(t+2)`: the linear
//! minimization oracle over a scaled simplex puts the whole block mass on the
//! cheapest coordinate (lowest index on ties), and the duality gap
//! `<g(y), y - s>` certifies optimality. A step is accepted only if it does
//! not increase the objective, so the recorded objective trace is
//! non-increasing.
//!
//! The open-loop schedule localizes the support quickly but its last-iterate
//! duality gap decays too slowly to certify tight targets at interior optima,
//! so once the gap is small the driver hands over to an active-set Newton
//! refinement on the current face. The refinement only ever moves inside the
//! feasible product, is guarded by the same monotone acceptance, and the
//! final certificate (gap and per-block support slack) is recomputed at the
//! returned point, so a polish failure merely falls back to more
//! conditional-gradient steps.

use crate::error::{Error, Result};

/// Flow entries below this fraction of the block mass count as unsupported.
pub const SUPPORT_THRESHOLD: f64 = 1e-9;

/// Options for the equilibrium solvers.
#[derive(Debug, Clone, Copy)]
pub struct DescentConfig {
    /// Duality-gap target certifying the returned point.
    pub target_gap: f64,
    /// Iteration cap for the conditional-gradient loop.
    pub max_iters: usize,
    /// Master seed for randomized restarts.
    pub seed: u64,
}

impl Default for DescentConfig {
    fn default() -> Self {
        Self {
            target_gap: 1e-8,
            max_iters: 100_000,
            seed: 0,
        }
    }
}

/// Smooth objective over `n_blocks` simplices of common dimension `dim`.
pub(crate) trait ObjectiveOracle {
    fn n_blocks(&self) -> usize;
    fn dim(&self) -> usize;
    fn block_mass(&self, block: usize) -> f64;
    /// Frozen blocks are held at their starting point and carry no optimality
    /// constraint (zero-probability types).
    fn block_frozen(&self, _block: usize) -> bool {
        false
    }
    fn value(&self, point: &[Vec<f64>]) -> f64;
    fn gradient(&self, point: &[Vec<f64>], out: &mut [Vec<f64>]);
    /// Dense Hessian over flattened coordinates `block * dim + coord`.
    fn hessian(&self, point: &[Vec<f64>], out: &mut Vec<Vec<f64>>);
}

#[derive(Debug, Clone)]
pub(crate) struct DescentSolution {
    pub point: Vec<Vec<f64>>,
    /// Conditional-gradient duality gap at the returned point.
    pub duality_gap: f64,
    /// Max over blocks and supported coordinates of `g_a - min_b g_b`.
    pub support_slack: f64,
    pub iterations: usize,
    pub polished: bool,
    /// Objective values along accepted iterates.
    pub objective_trace: Vec<f64>,
}

fn zeros_like(obj: &dyn ObjectiveOracle) -> Vec<Vec<f64>> {
    vec![vec![0.0; obj.dim()]; obj.n_blocks()]
}

/// Duality gap and support slack at `point` given its gradient.
fn certificates(
    obj: &dyn ObjectiveOracle,
    point: &[Vec<f64>],
    grad: &[Vec<f64>],
) -> (f64, f64, Vec<usize>) {
    let mut gap = 0.0;
    let mut slack: f64 = 0.0;
    let mut minimizers = vec![0usize; obj.n_blocks()];
    for b in 0..obj.n_blocks() {
        if obj.block_frozen(b) {
            continue;
        }
        let g = &grad[b];
        let mut best = 0usize;
        for a in 1..g.len() {
            if g[a] < g[best] {
                best = a;
            }
        }
        minimizers[b] = best;
        let inner: f64 = g.iter().zip(&point[b]).map(|(gi, yi)| gi * yi).sum();
        gap += inner - obj.block_mass(b) * g[best];
        let support = SUPPORT_THRESHOLD * obj.block_mass(b).max(f64::MIN_POSITIVE);
        for (a, &y) in point[b].iter().enumerate() {
            if y > support {
                slack = slack.max(g[a] - g[best]);
            }
        }
    }
    (gap, slack, minimizers)
}

/// Solve `A x = rhs` in place by Gaussian elimination with partial pivoting.
fn solve_dense(a: &mut [Vec<f64>], rhs: &mut [f64]) -> Option<Vec<f64>> {
    let n = rhs.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())?;
        if a[pivot][col].abs() < 1e-14 {
            return None;
        }
        a.swap(col, pivot);
        rhs.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            if f == 0.0 {
                continue;
            }
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            rhs[row] -= f * rhs[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut acc = rhs[row];
        for k in row + 1..n {
            acc -= a[row][k] * x[k];
        }
        x[row] = acc / a[row][row];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

/// One active-set Newton pass on the faces selected by the current support.
///
/// Returns true if the certificates at the updated point meet `target`.
fn polish(
    obj: &dyn ObjectiveOracle,
    point: &mut [Vec<f64>],
    phi: &mut f64,
    trace: &mut Vec<f64>,
    target: f64,
) -> bool {
    let dim = obj.dim();
    let act_tol = 1e-12;
    let mut grad = zeros_like(obj);
    let mut hess: Vec<Vec<f64>> = Vec::new();

    let mut active: Vec<Vec<usize>> = Vec::with_capacity(obj.n_blocks());
    for b in 0..obj.n_blocks() {
        let mut set: Vec<usize> = (0..dim)
            .filter(|&a| point[b][a] > act_tol * obj.block_mass(b).max(1e-300))
            .collect();
        if set.is_empty() {
            set.push(0);
        }
        active.push(set);
    }

    for _round in 0..60 {
        obj.gradient(point, &mut grad);
        let (gap, slack, minimizers) = certificates(obj, point, &grad);
        if gap <= target && slack <= target {
            return true;
        }

        // grow the face when an unlisted coordinate undercuts the block minimum
        for b in 0..obj.n_blocks() {
            if obj.block_frozen(b) {
                continue;
            }
            let best = minimizers[b];
            if !active[b].contains(&best) {
                active[b].push(best);
                active[b].sort_unstable();
            }
        }

        obj.hessian(point, &mut hess);

        // reduced coordinates: per block, the first active coordinate absorbs
        // the mass constraint
        let mut offsets = Vec::with_capacity(obj.n_blocks());
        let mut reduced_dim = 0usize;
        for (b, set) in active.iter().enumerate() {
            offsets.push(reduced_dim);
            if !obj.block_frozen(b) {
                reduced_dim += set.len().saturating_sub(1);
            }
        }
        if reduced_dim == 0 {
            return gap <= target && slack <= target;
        }

        let flat = |b: usize, a: usize| b * dim + a;
        let mut h_red = vec![vec![0.0; reduced_dim]; reduced_dim];
        let mut g_red = vec![0.0; reduced_dim];
        for b in 0..obj.n_blocks() {
            if obj.block_frozen(b) {
                continue;
            }
            let base_b = active[b][0];
            for (i, &ai) in active[b][1..].iter().enumerate() {
                let row = offsets[b] + i;
                g_red[row] = grad[b][ai] - grad[b][base_b];
                for c in 0..obj.n_blocks() {
                    if obj.block_frozen(c) {
                        continue;
                    }
                    let base_c = active[c][0];
                    for (j, &aj) in active[c][1..].iter().enumerate() {
                        let col = offsets[c] + j;
                        h_red[row][col] = hess[flat(b, ai)][flat(c, aj)]
                            - hess[flat(b, ai)][flat(c, base_c)]
                            - hess[flat(b, base_b)][flat(c, aj)]
                            + hess[flat(b, base_b)][flat(c, base_c)];
                    }
                }
            }
        }
        let ridge = 1e-12 * (1.0 + h_red.iter().enumerate().map(|(i, r)| r[i].abs()).sum::<f64>());
        for i in 0..reduced_dim {
            h_red[i][i] += ridge;
        }
        let mut rhs: Vec<f64> = g_red.iter().map(|g| -g).collect();
        let Some(delta_red) = solve_dense(&mut h_red, &mut rhs) else {
            return false;
        };

        // lift to full coordinates
        let mut delta = zeros_like(obj);
        for b in 0..obj.n_blocks() {
            if obj.block_frozen(b) {
                continue;
            }
            let base_b = active[b][0];
            for (i, &ai) in active[b][1..].iter().enumerate() {
                let d = delta_red[offsets[b] + i];
                delta[b][ai] = d;
                delta[b][base_b] -= d;
            }
        }

        // largest feasible step along delta
        let mut alpha: f64 = 1.0;
        for b in 0..obj.n_blocks() {
            for &a in &active[b] {
                if delta[b][a] < 0.0 {
                    alpha = alpha.min(-point[b][a] / delta[b][a]);
                }
            }
        }
        if !alpha.is_finite() || alpha <= 0.0 {
            return false;
        }

        // monotone acceptance with halving
        let mut accepted = false;
        for _ in 0..25 {
            let mut candidate = point.to_vec();
            for b in 0..obj.n_blocks() {
                for a in 0..dim {
                    candidate[b][a] = (candidate[b][a] + alpha * delta[b][a]).max(0.0);
                }
            }
            let cand_phi = obj.value(&candidate);
            if cand_phi <= *phi + 1e-15 {
                point.clone_from_slice(&candidate);
                *phi = cand_phi;
                trace.push(cand_phi);
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if !accepted {
            return false;
        }

        // shrink faces where the step hit the boundary, zeroing clipped
        // coordinates exactly
        for b in 0..obj.n_blocks() {
            let mass = obj.block_mass(b).max(1e-300);
            active[b].retain(|&a| point[b][a] > act_tol * mass);
            if active[b].is_empty() {
                active[b].push(minimizers[b]);
            }
            for a in 0..dim {
                if !active[b].contains(&a) && point[b][a] > 0.0 && point[b][a] <= act_tol * mass {
                    let residual = point[b][a];
                    point[b][a] = 0.0;
                    let top = (0..dim)
                        .max_by(|&i, &j| point[b][i].partial_cmp(&point[b][j]).unwrap())
                        .unwrap();
                    point[b][top] += residual;
                }
            }
        }
    }
    let mut grad = zeros_like(obj);
    obj.gradient(point, &mut grad);
    let (gap, slack, _) = certificates(obj, point, &grad);
    gap <= target && slack <= target
}

/// Deterministic start: one linear-minimization step from the uniform point.
pub(crate) fn vertex_start(obj: &dyn ObjectiveOracle) -> Vec<Vec<f64>> {
    let uniform: Vec<Vec<f64>> = (0..obj.n_blocks())
        .map(|b| vec![obj.block_mass(b) / obj.dim() as f64; obj.dim()])
        .collect();
    let mut grad = zeros_like(obj);
    obj.gradient(&uniform, &mut grad);
    let mut start = uniform;
    for b in 0..obj.n_blocks() {
        if obj.block_frozen(b) {
            continue;
        }
        let g = &grad[b];
        let mut best = 0usize;
        for a in 1..g.len() {
            if g[a] < g[best] {
                best = a;
            }
        }
        for a in 0..obj.dim() {
            start[b][a] = if a == best { obj.block_mass(b) } else { 0.0 };
        }
    }
    start
}

pub(crate) fn minimize(
    obj: &dyn ObjectiveOracle,
    start: Option<Vec<Vec<f64>>>,
    cfg: &DescentConfig,
) -> Result<DescentSolution> {
    let mut point = start.unwrap_or_else(|| vertex_start(obj));
    let mut phi = obj.value(&point);
    let mut trace = vec![phi];
    let mut grad = zeros_like(obj);
    let mut best_gap = f64::INFINITY;
    let target = cfg.target_gap;
    let polish_target = (0.1 * target).max(1e-14);

    let mut iters = 0usize;
    let mut polished = false;
    while iters < cfg.max_iters.max(1) {
        obj.gradient(&point, &mut grad);
        let (gap, slack, minimizers) = certificates(obj, &point, &grad);
        best_gap = best_gap.min(gap);
        if gap <= target && slack <= target {
            return Ok(finish(obj, point, iters, polished, trace));
        }

        let near = gap <= (1e-2f64).max(10.0 * target);
        if near
            && iters % 20 == 0
            && !polished
            && polish(obj, &mut point, &mut phi, &mut trace, polish_target)
        {
            // the polished point is re-certified against the caller's target
            // at the top of the next loop iteration
            log::debug!("active-set refinement converged after {iters} conditional-gradient steps");
            polished = true;
            iters += 1;
            continue;
        }

        let step = 2.0 / (iters as f64 + 2.0);
        let mut candidate = point.clone();
        for b in 0..obj.n_blocks() {
            if obj.block_frozen(b) {
                continue;
            }
            for a in 0..obj.dim() {
                let vertex = if a == minimizers[b] {
                    obj.block_mass(b)
                } else {
                    0.0
                };
                candidate[b][a] += step * (vertex - candidate[b][a]);
            }
        }
        let cand_phi = obj.value(&candidate);
        if cand_phi <= phi + 1e-15 {
            point = candidate;
            phi = cand_phi;
            trace.push(phi);
        }
        iters += 1;
    }

    // last chance before reporting failure
    let polish_ok = polish(obj, &mut point, &mut phi, &mut trace, polish_target);
    obj.gradient(&point, &mut grad);
    let (gap, slack, _) = certificates(obj, &point, &grad);
    if gap <= target && slack <= target {
        return Ok(finish(obj, point, iters, polished || polish_ok, trace));
    }
    log::debug!("no convergence after {iters} steps; best duality gap {best_gap:.3e}");
    Err(Error::Convergence {
        iters,
        best_gap: best_gap.min(gap),
    })
}

fn finish(
    obj: &dyn ObjectiveOracle,
    mut point: Vec<Vec<f64>>,
    iterations: usize,
    polished: bool,
    objective_trace: Vec<f64>,
) -> DescentSolution {
    // snap numerically dead coordinates and restore exact block masses
    for b in 0..obj.n_blocks() {
        let mass = obj.block_mass(b);
        let floor = 1e-13 * mass.max(f64::MIN_POSITIVE);
        for v in point[b].iter_mut() {
            if *v < floor {
                *v = 0.0;
            }
        }
        let sum: f64 = point[b].iter().sum();
        if sum > 0.0 && sum != mass {
            let top = (0..point[b].len())
                .max_by(|&i, &j| point[b][i].partial_cmp(&point[b][j]).unwrap())
                .unwrap();
            point[b][top] += mass - sum;
        }
    }
    let mut grad = zeros_like(obj);
    obj.gradient(&point, &mut grad);
    let (duality_gap, support_slack, _) = certificates(obj, &point, &grad);
    DescentSolution {
        point,
        duality_gap,
        support_slack,
        iterations,
        polished,
        objective_trace,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    /// min sum_i (y_i - c_i)^2 over the simplex.
    struct Quadratic {
        center: Vec<f64>,
    }

    impl ObjectiveOracle for Quadratic {
        fn n_blocks(&self) -> usize {
            1
        }
        fn dim(&self) -> usize {
            self.center.len()
        }
        fn block_mass(&self, _b: usize) -> f64 {
            1.0
        }
        fn value(&self, p: &[Vec<f64>]) -> f64 {
            p[0].iter()
                .zip(&self.center)
                .map(|(y, c)| (y - c) * (y - c))
                .sum()
        }
        fn gradient(&self, p: &[Vec<f64>], out: &mut [Vec<f64>]) {
            for (o, (y, c)) in out[0].iter_mut().zip(p[0].iter().zip(&self.center)) {
                *o = 2.0 * (y - c);
            }
        }
        fn hessian(&self, _p: &[Vec<f64>], out: &mut Vec<Vec<f64>>) {
            let n = self.dim();
            *out = vec![vec![0.0; n]; n];
            for i in 0..n {
                out[i][i] = 2.0;
            }
        }
    }

    #[test]
    fn reaches_interior_optimum_to_tight_gap() {
        let obj = Quadratic {
            center: vec![0.2, 0.5, 0.3],
        };
        let sol = minimize(&obj, None, &DescentConfig::default()).unwrap();
        assert!(sol.duality_gap <= 1e-8);
        for (y, c) in sol.point[0].iter().zip(&obj.center) {
            assert_abs_diff_eq!(y, c, epsilon = 1e-7);
        }
    }

    #[test]
    fn projects_outside_center_to_boundary() {
        let obj = Quadratic {
            center: vec![0.8, 0.6, -0.4],
        };
        let sol = minimize(&obj, None, &DescentConfig::default()).unwrap();
        assert!(sol.duality_gap <= 1e-8);
        assert_abs_diff_eq!(sol.point[0][2], 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(sol.point[0][0] + sol.point[0][1], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn objective_trace_never_increases() {
        let obj = Quadratic {
            center: vec![0.1, 0.2, 0.7],
        };
        let sol = minimize(&obj, None, &DescentConfig::default()).unwrap();
        for w in sol.objective_trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-12);
        }
    }

    #[test]
    fn iteration_cap_reports_best_gap() {
        let obj = Quadratic {
            center: vec![0.5, 0.5],
        };
        let cfg = DescentConfig {
            target_gap: -1.0,
            max_iters: 3,
            seed: 0,
        };
        // a negative target is unreachable: expect a convergence error
        match minimize(&obj, Some(vec![vec![0.9, 0.1]]), &cfg) {
            Err(Error::Convergence { best_gap, .. }) => assert!(best_gap.is_finite()),
            other => panic!("expected convergence error, got {other:?}"),
        }
    }
}
