//! Dense two-phase primal simplex with Bland's anti-cycling rule.
//!
//! Solves `min c.x  s.t.  A x = b, x >= 0` on a full tableau. Instances at
//! desk scale are tiny, so the implementation favors exact basic solutions
//! and determinism over speed: the entering column is the lowest index with a
//! negative reduced cost and ratio-test ties leave the lowest basic variable,
//! which rules out cycling on degenerate vertices.

use crate::error::{Error, Result};

const PIVOT_TOL: f64 = 1e-9;
const FEAS_TOL: f64 = 1e-7;

/// Equality-form linear program.
#[derive(Debug, Clone)]
pub struct StandardLp {
    pub objective: Vec<f64>,
    pub rows: Vec<Vec<f64>>,
    pub rhs: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub value: f64,
    /// Column index of the basic variable for each row.
    pub basis: Vec<usize>,
}

struct Tableau {
    /// m constraint rows + 1 objective row; n_total + 1 columns (rhs last).
    rows: Vec<Vec<f64>>,
    basis: Vec<usize>,
    n_total: usize,
}

impl Tableau {
    fn rhs_col(&self) -> usize {
        self.n_total
    }

    fn pivot(&mut self, row: usize, col: usize) {
        let inv = 1.0 / self.rows[row][col];
        for v in self.rows[row].iter_mut() {
            *v *= inv;
        }
        let pivot_row = self.rows[row].clone();
        for (r, other) in self.rows.iter_mut().enumerate() {
            if r == row {
                continue;
            }
            let f = other[col];
            if f == 0.0 {
                continue;
            }
            for (v, p) in other.iter_mut().zip(&pivot_row) {
                *v -= f * p;
            }
        }
        self.basis[row] = col;
    }

    /// Bland iteration until optimal; `allowed` limits entering columns.
    fn run(&mut self, allowed: usize) -> Result<()> {
        let m = self.basis.len();
        let obj = m;
        loop {
            let entering = (0..allowed).find(|&j| self.rows[obj][j] < -PIVOT_TOL);
            let Some(col) = entering else {
                return Ok(());
            };
            let mut leave: Option<usize> = None;
            let mut best_ratio = f64::INFINITY;
            for r in 0..m {
                let a = self.rows[r][col];
                if a > PIVOT_TOL {
                    let ratio = self.rows[r][self.rhs_col()] / a;
                    let better = ratio < best_ratio - 1e-12
                        || ((ratio - best_ratio).abs() <= 1e-12
                            && leave.is_some_and(|l| self.basis[r] < self.basis[l]));
                    if better || leave.is_none() {
                        best_ratio = ratio;
                        leave = Some(r);
                    }
                }
            }
            let Some(row) = leave else {
                return Err(Error::Unbounded);
            };
            self.pivot(row, col);
        }
    }
}

/// Solve an equality-form LP. Errors: [`Error::Infeasible`] with the phase-1
/// point as certificate, [`Error::Unbounded`].
pub fn solve(lp: &StandardLp) -> Result<LpSolution> {
    let m = lp.rows.len();
    let n = lp.objective.len();
    assert_eq!(lp.rhs.len(), m, "rhs length mismatch");
    assert!(
        lp.rows.iter().all(|r| r.len() == n),
        "row length mismatch"
    );

    let n_total = n + m; // artificials appended
    let mut rows = Vec::with_capacity(m + 1);
    for (i, row) in lp.rows.iter().enumerate() {
        let flip = if lp.rhs[i] < 0.0 { -1.0 } else { 1.0 };
        let mut t = vec![0.0; n_total + 1];
        for (j, &v) in row.iter().enumerate() {
            t[j] = flip * v;
        }
        t[n + i] = 1.0;
        t[n_total] = flip * lp.rhs[i];
        rows.push(t);
    }
    // phase-1 objective: minimize the artificial sum; reduced costs start as
    // the negated column sums
    let mut obj = vec![0.0; n_total + 1];
    for j in 0..=n_total {
        if j >= n && j < n_total {
            continue;
        }
        obj[j] = -rows.iter().map(|r| r[j]).sum::<f64>();
    }
    rows.push(obj);
    let mut tab = Tableau {
        rows,
        basis: (n..n_total).collect(),
        n_total,
    };
    tab.run(n)?;

    let residual = -tab.rows[m][tab.rhs_col()];
    if residual > FEAS_TOL {
        let mut certificate = vec![0.0; n];
        for (r, &b) in tab.basis.iter().enumerate() {
            if b < n {
                certificate[b] = tab.rows[r][tab.rhs_col()];
            }
        }
        return Err(Error::Infeasible {
            residual,
            certificate,
        });
    }

    // drive lingering artificials out of the basis where possible
    for r in 0..m {
        if tab.basis[r] >= n {
            if let Some(col) = (0..n).find(|&j| tab.rows[r][j].abs() > PIVOT_TOL) {
                tab.pivot(r, col);
            }
        }
    }

    // phase-2 objective row from the real costs
    let mut obj = vec![0.0; n_total + 1];
    obj[..n].copy_from_slice(&lp.objective);
    for r in 0..m {
        let b = tab.basis[r];
        let cb = if b < n { lp.objective[b] } else { 0.0 };
        if cb == 0.0 {
            continue;
        }
        let row = tab.rows[r].clone();
        for (v, p) in obj.iter_mut().zip(&row) {
            *v -= cb * p;
        }
    }
    tab.rows[m] = obj;
    tab.run(n)?;

    let mut x = vec![0.0; n];
    for (r, &b) in tab.basis.iter().enumerate() {
        if b < n {
            x[b] = tab.rows[r][tab.rhs_col()].max(0.0);
        }
    }
    let value = lp.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
    Ok(LpSolution {
        x,
        value,
        basis: tab.basis,
    })
}
