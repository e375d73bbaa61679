//! Shared helpers for the integration suites: an exact LP oracle for
//! the l1 value of basis pursuit, plus small metric utilities.
#![allow(dead_code)]

use gtcs_core::DenseTensor;
use nalgebra::{DMatrix, DVector};

const REDUCED_COST_TOL: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-9;
const FEASIBILITY_TOL: f64 = 1e-7;

pub struct LpSolution {
    pub objective: f64,
    pub x: Vec<f64>,
}

struct Tableau {
    t: DMatrix<f64>,
    basis: Vec<usize>,
    reduced: Vec<f64>,
    objective: f64,
    rhs_col: usize,
}

impl Tableau {
    fn pivot(&mut self, row: usize, col: usize) {
        let p = self.t[(row, col)];
        for j in 0..=self.rhs_col {
            self.t[(row, j)] /= p;
        }
        for i in 0..self.t.nrows() {
            if i == row {
                continue;
            }
            let f = self.t[(i, col)];
            if f == 0.0 {
                continue;
            }
            for j in 0..=self.rhs_col {
                self.t[(i, j)] -= f * self.t[(row, j)];
            }
        }
        let f = self.reduced[col];
        self.objective += f * self.t[(row, self.rhs_col)];
        for j in 0..self.rhs_col {
            self.reduced[j] -= f * self.t[(row, j)];
        }
        self.basis[row] = col;
    }

    /// Bland's rule; returns false on unboundedness or pivot cap.
    fn run(&mut self, allow: &dyn Fn(usize) -> bool, max_pivots: usize) -> bool {
        for _ in 0..max_pivots {
            let entering = (0..self.rhs_col)
                .find(|&j| allow(j) && self.reduced[j] < -REDUCED_COST_TOL);
            let Some(e) = entering else { return true };
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.t.nrows() {
                let a = self.t[(i, e)];
                if a > PIVOT_TOL {
                    let ratio = self.t[(i, self.rhs_col)] / a;
                    let better = match leave {
                        None => true,
                        Some((li, lr)) => {
                            ratio < lr - 1e-12
                                || (ratio < lr + 1e-12 && self.basis[i] < self.basis[li])
                        }
                    };
                    if better {
                        leave = Some((i, ratio));
                    }
                }
            }
            let Some((r, _)) = leave else { return false };
            self.pivot(r, e);
        }
        false
    }
}

/// Exact solution of `min c^T x  s.t.  A x = b, x >= 0` by two-phase
/// tableau simplex. Returns None when infeasible (or unbounded).
pub fn solve_lp(
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    c: &DVector<f64>,
    max_pivots: usize,
) -> Option<LpSolution> {
    let (m, n) = (a.nrows(), a.ncols());
    assert_eq!(b.len(), m);
    assert_eq!(c.len(), n);
    let rhs_col = n + m;
    let mut t = DMatrix::zeros(m, rhs_col + 1);
    for i in 0..m {
        let flip = if b[i] < 0.0 { -1.0 } else { 1.0 };
        for j in 0..n {
            t[(i, j)] = flip * a[(i, j)];
        }
        t[(i, n + i)] = 1.0;
        t[(i, rhs_col)] = flip * b[i];
    }
    let mut reduced = vec![0.0; rhs_col];
    let mut objective = 0.0;
    for i in 0..m {
        objective += t[(i, rhs_col)];
        for j in 0..rhs_col {
            reduced[j] -= t[(i, j)];
        }
    }
    for j in n..rhs_col {
        reduced[j] += 1.0;
    }
    let mut tab = Tableau {
        t,
        basis: (n..rhs_col).collect(),
        reduced,
        objective,
        rhs_col,
    };
    if !tab.run(&|_| true, max_pivots) {
        return None;
    }
    if tab.objective > FEASIBILITY_TOL {
        return None;
    }
    for i in 0..m {
        if tab.basis[i] >= n {
            if let Some(j) = (0..n).find(|&j| tab.t[(i, j)].abs() > FEASIBILITY_TOL) {
                tab.pivot(i, j);
            }
        }
    }

    tab.objective = 0.0;
    for j in 0..rhs_col {
        tab.reduced[j] = if j < n { c[j] } else { 0.0 };
    }
    for i in 0..m {
        let bj = tab.basis[i];
        if bj >= n {
            continue;
        }
        let cb = c[bj];
        if cb == 0.0 {
            continue;
        }
        tab.objective += cb * tab.t[(i, tab.rhs_col)];
        for j in 0..rhs_col {
            tab.reduced[j] -= cb * tab.t[(i, j)];
        }
    }
    if !tab.run(&|j| j < n, max_pivots) {
        return None;
    }
    let mut x = vec![0.0; n];
    for i in 0..m {
        if tab.basis[i] < n {
            x[tab.basis[i]] = tab.t[(i, tab.rhs_col)];
        }
    }
    Some(LpSolution {
        objective: tab.objective,
        x,
    })
}

/// Optimal l1 value of `min |z|_1 s.t. A z = y` through the standard
/// split `z = p - q`; None when the system is infeasible.
pub fn bp_l1_oracle(a: &DMatrix<f64>, y: &DVector<f64>) -> Option<f64> {
    let (m, n) = (a.nrows(), a.ncols());
    let mut split = DMatrix::zeros(m, 2 * n);
    for i in 0..m {
        for j in 0..n {
            split[(i, j)] = a[(i, j)];
            split[(i, n + j)] = -a[(i, j)];
        }
    }
    let ones = DVector::from_element(2 * n, 1.0);
    solve_lp(&split, y, &ones, 200_000).map(|s| s.objective)
}

pub fn rel_frobenius_err(estimate: &DenseTensor, reference: &DenseTensor) -> f64 {
    let mut num = 0.0;
    for (a, b) in estimate.data().iter().zip(reference.data()) {
        num += (a - b) * (a - b);
    }
    num.sqrt() / reference.norm().max(1e-300)
}

/// Median of a sample; averages the middle pair for even lengths.
pub fn median(values: &[f64]) -> f64 {
    assert!(!values.is_empty());
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mid = v.len() / 2;
    if v.len() % 2 == 1 {
        v[mid]
    } else {
        0.5 * (v[mid - 1] + v[mid])
    }
}
