//! Dense phase-one simplex for feasibility of
//!
//! ```text
//! E x = e,   C x <= c,   x >= 0     (c >= 0)
//! ```
//!
//! Entering columns follow Dantzig's rule and fall back to Bland's rule
//! after a run of degenerate pivots, so the method terminates on degenerate
//! problems. Leaving rows come from a Harris ratio test, which prefers
//! large pivot elements. The decision is made against a tolerance relative to the
//! largest right-hand side, which keeps the answer invariant when every
//! right-hand side is scaled by a power of two. A "feasible" answer is only
//! returned once the basic solution read back from the tableau satisfies
//! the original constraints, so round-off on rank-deficient systems cannot
//! produce false positives.

use alloc::vec::Vec;

const PIVOT_EPS: f64 = 1e-9;
const COST_EPS: f64 = 1e-11;
/// Degenerate pivots in a row before falling back to Bland's rule.
const BLAND_AFTER: usize = 20;
const FEAS_EPS: f64 = 1e-9;
/// Residual allowed when checking the recovered point.
const CHECK_EPS: f64 = 1e-7;

pub struct FeasibilityProblem {
    pub n_vars: usize,
    /// Row-major equality matrix, `eq_rhs.len()` rows.
    pub eq: Vec<f64>,
    pub eq_rhs: Vec<f64>,
    /// Row-major inequality matrix, `ineq_rhs.len()` rows.
    pub ineq: Vec<f64>,
    pub ineq_rhs: Vec<f64>,
}

struct Tableau {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
    basis: Vec<usize>,
}

impl Tableau {
    fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    fn pivot(&mut self, pr: usize, pc: usize) {
        let cols = self.cols;
        let p = self.at(pr, pc);
        for c in 0..cols {
            self.data[pr * cols + c] /= p;
        }
        self.data[pr * cols + pc] = 1.0;
        for r in 0..=self.rows {
            if r == pr {
                continue;
            }
            let f = self.at(r, pc);
            if f == 0.0 {
                continue;
            }
            for c in 0..cols {
                let v = self.data[pr * cols + c];
                if v != 0.0 {
                    self.data[r * cols + c] -= f * v;
                }
            }
            self.data[r * cols + pc] = 0.0;
        }
        if pr < self.rows {
            self.basis[pr] = pc;
        }
        for r in 0..self.rows {
            let b = &mut self.data[r * cols + cols - 1];
            if *b < 0.0 {
                *b = 0.0;
            }
        }
    }

    /// Two-pass Harris ratio test: the bound is relaxed by `slack`, and
    /// among rows within it the largest pivot element wins.
    fn ratio_test(&self, pc: usize, slack: f64) -> Option<usize> {
        let rhs = self.cols - 1;
        let bound = (0..self.rows)
            .filter(|&r| self.at(r, pc) > PIVOT_EPS)
            .map(|r| (self.at(r, rhs) + slack) / self.at(r, pc))
            .min_by(f64::total_cmp)?;
        (0..self.rows)
            .filter(|&r| self.at(r, pc) > PIVOT_EPS && self.at(r, rhs) / self.at(r, pc) <= bound)
            .max_by(|&a, &b| self.at(a, pc).total_cmp(&self.at(b, pc)).then(self.basis[b].cmp(&self.basis[a])))
    }
}

impl FeasibilityProblem {
    /// True when a feasible point exists.
    pub fn is_feasible(&self) -> bool {
        let n = self.n_vars;
        let me = self.eq_rhs.len();
        let mi = self.ineq_rhs.len();
        debug_assert!(self.ineq_rhs.iter().all(|&c| c >= 0.0));
        let scale = self.eq_rhs.iter().chain(self.ineq_rhs.iter()).fold(0.0f64, |m, v| m.max(v.abs()));
        let tol = FEAS_EPS * scale;
        // Columns: x, inequality slacks, equality artificials, rhs.
        let cols = n + mi + me + 1;
        let rows = me + mi;
        let mut t = Tableau { rows, cols, data: alloc::vec![0.0; (rows + 1) * cols], basis: alloc::vec![0; rows] };
        for r in 0..me {
            let sign = if self.eq_rhs[r] < 0.0 { -1.0 } else { 1.0 };
            for c in 0..n {
                t.data[r * cols + c] = sign * self.eq[r * n + c];
            }
            t.data[r * cols + n + mi + r] = 1.0;
            t.data[r * cols + cols - 1] = sign * self.eq_rhs[r];
            t.basis[r] = n + mi + r;
        }
        for i in 0..mi {
            let r = me + i;
            for c in 0..n {
                t.data[r * cols + c] = self.ineq[i * n + c];
            }
            t.data[r * cols + n + i] = 1.0;
            t.data[r * cols + cols - 1] = self.ineq_rhs[i];
            t.basis[r] = n + i;
        }
        // Objective row: minimize the sum of artificials, priced out.
        let obj = rows * cols;
        for r in 0..me {
            for c in 0..cols {
                if !(n + mi..n + mi + me).contains(&c) {
                    t.data[obj + c] -= t.data[r * cols + c];
                }
            }
        }
        let max_iter = 50 * (rows + cols);
        let mut degenerate_run = 0;
        for _ in 0..max_iter {
            // Objective value is minus the rhs entry of the objective row.
            if -t.at(rows, cols - 1) <= tol {
                return self.satisfied_by(&t, scale);
            }
            let reduced = |c: usize| t.at(rows, c);
            let pc = if degenerate_run < BLAND_AFTER {
                (0..cols - 1).filter(|&c| reduced(c) < -COST_EPS).min_by(|&a, &b| reduced(a).total_cmp(&reduced(b)))
            } else {
                (0..cols - 1).find(|&c| reduced(c) < -COST_EPS)
            };
            let Some(pc) = pc else {
                break;
            };
            let Some(pr) = t.ratio_test(pc, tol) else {
                // Unbounded direction cannot occur in phase one.
                break;
            };
            degenerate_run = if t.at(pr, cols - 1) <= tol { degenerate_run + 1 } else { 0 };
            t.pivot(pr, pc);
        }
        -t.at(rows, cols - 1) <= tol && self.satisfied_by(&t, scale)
    }

    fn satisfied_by(&self, t: &Tableau, scale: f64) -> bool {
        let n = self.n_vars;
        let mut x = alloc::vec![0.0; n];
        for (r, &b) in t.basis.iter().enumerate() {
            if b < n {
                x[b] = t.at(r, t.cols - 1);
            }
        }
        let tol = CHECK_EPS * scale.max(1.0);
        let row = |m: &[f64], r: usize| -> f64 { m[r * n..(r + 1) * n].iter().zip(&x).map(|(a, v)| a * v).sum() };
        x.iter().all(|&v| v >= -tol)
            && (0..self.eq_rhs.len()).all(|r| (row(&self.eq, r) - self.eq_rhs[r]).abs() <= tol)
            && (0..self.ineq_rhs.len()).all(|r| row(&self.ineq, r) <= self.ineq_rhs[r] + tol)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn problem(eq: &[&[f64]], eq_rhs: &[f64], ineq: &[&[f64]], ineq_rhs: &[f64]) -> FeasibilityProblem {
        let n = eq.first().or(ineq.first()).map_or(0, |r| r.len());
        FeasibilityProblem {
            n_vars: n,
            eq: eq.iter().flat_map(|r| r.iter().copied()).collect(),
            eq_rhs: eq_rhs.to_vec(),
            ineq: ineq.iter().flat_map(|r| r.iter().copied()).collect(),
            ineq_rhs: ineq_rhs.to_vec(),
        }
    }

    #[test]
    fn simple_feasible_system() {
        // x + y = 1, x <= 0.5
        assert!(problem(&[&[1.0, 1.0]], &[1.0], &[&[1.0, 0.0]], &[0.5]).is_feasible());
    }

    #[test]
    fn capped_sum_is_infeasible() {
        // x + y = 3, x <= 1, y <= 1
        assert!(!problem(&[&[1.0, 1.0]], &[3.0], &[&[1.0, 0.0], &[0.0, 1.0]], &[1.0, 1.0]).is_feasible());
    }

    #[test]
    fn negative_rhs_needs_negative_coefficients() {
        assert!(!problem(&[&[1.0, 2.0]], &[-1.0], &[], &[]).is_feasible());
        assert!(problem(&[&[1.0, -2.0]], &[-1.0], &[], &[]).is_feasible());
    }

    #[test]
    fn zero_rhs_is_feasible() {
        assert!(problem(&[&[1.0, -1.0], &[2.0, 5.0]], &[0.0, 0.0], &[&[1.0, 1.0]], &[0.0]).is_feasible());
    }

    #[test]
    fn degenerate_problem_terminates() {
        let eq: &[&[f64]] = &[&[1.0, 1.0, 1.0, 1.0], &[1.0, -1.0, 1.0, -1.0], &[1.0, 1.0, -1.0, -1.0]];
        assert!(problem(eq, &[0.0, 0.0, 0.0], &[&[1.0, 1.0, 1.0, 1.0]], &[1.0]).is_feasible());
    }
}
