//! Exact rational brute-force oracle for the grid obedience LP on the
//! two-state binary fixture.
//!
//! The oracle is deliberately independent of the library: it hand-codes the
//! fixture's costs as rationals, assembles the equality-form program itself,
//! and enumerates every basis of the constraint matrix, solving each 4x4
//! rational system by Gaussian elimination. The minimum objective over basic
//! feasible solutions is the exact LP optimum.

use num::{BigInt, BigRational, Signed, Zero};

pub fn rat(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

/// Costs of the two-state binary fixture at the grid flow with `k` sixths on
/// action b: cost_a = [state is high], cost_b = 2 y_b + 1/3.
fn cost_a(high: bool) -> BigRational {
    if high {
        rat(1, 1)
    } else {
        rat(0, 1)
    }
}

fn cost_b(k: i64) -> BigRational {
    rat(2 * k, 6) + rat(1, 3)
}

fn social_cost(k: i64, high: bool) -> BigRational {
    rat(6 - k, 6) * cost_a(high) + rat(k, 6) * cost_b(k)
}

/// Solve `A x = b` exactly; `None` when the basis matrix is singular.
fn solve_rational(mut a: Vec<Vec<BigRational>>, mut b: Vec<BigRational>) -> Option<Vec<BigRational>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).find(|&r| !a[r][col].is_zero())?;
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            if a[row][col].is_zero() {
                continue;
            }
            let f = &a[row][col] / &a[col][col];
            for k in col..n {
                let v = &a[col][k] * &f;
                a[row][k] -= v;
            }
            let v = &b[col] * &f;
            b[row] -= v;
        }
    }
    let mut x = vec![BigRational::zero(); n];
    for row in (0..n).rev() {
        let mut acc = b[row].clone();
        for k in row + 1..n {
            acc -= &a[row][k] * &x[k];
        }
        x[row] = acc / &a[row][row];
    }
    Some(x)
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut current = Vec::new();
    fn rec(start: usize, n: usize, k: usize, current: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if current.len() == k {
            out.push(current.clone());
            return;
        }
        for i in start..n {
            current.push(i);
            rec(i + 1, n, k, current, out);
            current.pop();
        }
    }
    rec(0, n, k, &mut current, &mut out);
    out
}

/// Exact optimum of the D = 6 social-cost LP for the two-state binary
/// fixture, plus the per-state b-counts supported by every optimal vertex.
pub struct BruteForceResult {
    pub value: BigRational,
    /// (low-state b-count, high-state b-count) pairs appearing with
    /// probability 1 in each optimal vertex; empty entries mean the optimum
    /// splits mass.
    pub optimal_vertices: Vec<(Vec<(i64, BigRational)>, Vec<(i64, BigRational)>)>,
}

pub fn brute_force_binary_fixture_d6() -> BruteForceResult {
    let half = rat(1, 2);
    // variables: mu_low[k] for k=0..6, mu_high[k] for k=0..6, slack_ab, slack_ba
    let n_mu = 14;
    let n = n_mu + 2;
    let var = |high: bool, k: usize| if high { 7 + k } else { k };

    let mut rows = vec![vec![BigRational::zero(); n]; 4];
    let mut rhs = vec![BigRational::zero(); 4];
    // per-state total mass
    for k in 0..7 {
        rows[0][var(false, k)] = rat(1, 1);
        rows[1][var(true, k)] = rat(1, 1);
    }
    rhs[0] = rat(1, 1);
    rhs[1] = rat(1, 1);
    // obedience rows: sum_theta p sum_k mu * y_x (cost_x - cost_other) + slack = 0
    for k in 0..7i64 {
        for &high in &[false, true] {
            let y_a = rat(6 - k, 6);
            let y_b = rat(k, 6);
            let ca = cost_a(high);
            let cb = cost_b(k);
            rows[2][var(high, k as usize)] = &half * &y_a * (&ca - &cb);
            rows[3][var(high, k as usize)] = &half * &y_b * (&cb - &ca);
        }
    }
    rows[2][n_mu] = rat(1, 1);
    rows[3][n_mu + 1] = rat(1, 1);

    let mut objective = vec![BigRational::zero(); n];
    for k in 0..7i64 {
        for &high in &[false, true] {
            objective[var(high, k as usize)] = &half * social_cost(k, high);
        }
    }

    let mut best: Option<BigRational> = None;
    let mut optimal: Vec<Vec<BigRational>> = Vec::new();
    for basis in combinations(n, 4) {
        let a: Vec<Vec<BigRational>> = (0..4)
            .map(|r| basis.iter().map(|&j| rows[r][j].clone()).collect())
            .collect();
        let Some(xb) = solve_rational(a, rhs.clone()) else {
            continue;
        };
        if xb.iter().any(|v| v.is_negative()) {
            continue;
        }
        let mut x = vec![BigRational::zero(); n];
        for (&j, v) in basis.iter().zip(xb) {
            x[j] = v;
        }
        let value: BigRational = objective
            .iter()
            .zip(&x)
            .map(|(c, v)| c * v)
            .fold(BigRational::zero(), |acc, t| acc + t);
        match &best {
            Some(b) if value > *b => {}
            Some(b) if value == *b => {
                if !optimal.contains(&x) {
                    optimal.push(x);
                }
            }
            _ => {
                best = Some(value);
                optimal = vec![x];
            }
        }
    }

    let value = best.expect("the obedience LP has feasible vertices");
    let optimal_vertices = optimal
        .into_iter()
        .map(|x| {
            let pick = |high: bool| {
                (0..7i64)
                    .filter_map(|k| {
                        let v = &x[var(high, k as usize)];
                        (!v.is_zero()).then(|| (k, v.clone()))
                    })
                    .collect::<Vec<_>>()
            };
            (pick(false), pick(true))
        })
        .collect();
    BruteForceResult {
        value,
        optimal_vertices,
    }
}
