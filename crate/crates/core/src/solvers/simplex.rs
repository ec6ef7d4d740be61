//! Dense two-phase tableau simplex for `min c'x  s.t.  A x <= b,  x >= 0`.
//!
//! Pivoting follows Bland's rule: the entering column is the lowest-index
//! column with a negative reduced cost, and ratio-test ties leave by the
//! lowest-index basic variable. This rules out cycling and makes every run
//! deterministic.

use serde::{Deserialize, Serialize};

use super::SolverConfig;
use crate::error::{Error, Result};
use crate::linalg::{check_finite, Matrix};

const PIVOT_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    pub status: LpStatus,
    pub iterations: usize,
}

struct Tableau {
    rows: usize,
    width: usize,
    /// `rows x (width + 1)`, rhs in the last column.
    t: Vec<f64>,
    /// Reduced costs, `width` entries, followed by minus the objective value.
    cost: Vec<f64>,
    basis: Vec<usize>,
}

impl Tableau {
    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        self.t[i * (self.width + 1) + j]
    }

    #[inline]
    fn rhs(&self, i: usize) -> f64 {
        self.at(i, self.width)
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let w = self.width + 1;
        let piv = self.t[r * w + c];
        for v in &mut self.t[r * w..(r + 1) * w] {
            *v /= piv;
        }
        let pivot_row: Vec<f64> = self.t[r * w..(r + 1) * w].to_vec();
        for i in 0..self.rows {
            if i == r {
                continue;
            }
            let f = self.t[i * w + c];
            if f == 0.0 {
                continue;
            }
            for (v, &pv) in self.t[i * w..(i + 1) * w].iter_mut().zip(&pivot_row) {
                *v -= f * pv;
            }
            self.t[i * w + c] = 0.0;
            let rhs = &mut self.t[i * w + self.width];
            if *rhs < 0.0 && *rhs > -1e-12 {
                *rhs = 0.0;
            }
        }
        let f = self.cost[c];
        if f != 0.0 {
            for (v, &pv) in self.cost.iter_mut().zip(&pivot_row) {
                *v -= f * pv;
            }
            self.cost[c] = 0.0;
        }
        self.basis[r] = c;
    }

    /// Runs Bland pivots over columns `0..allowed`.
    fn optimize(&mut self, allowed: usize, cfg: &SolverConfig, iterations: &mut usize) -> LpStatus {
        loop {
            if *iterations >= cfg.max_iter {
                return LpStatus::IterationLimit;
            }
            let Some(enter) = (0..allowed).find(|&j| self.cost[j] < -cfg.opt_tol) else {
                return LpStatus::Optimal;
            };
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.rows {
                let a = self.at(i, enter);
                if a <= PIVOT_TOL {
                    continue;
                }
                let ratio = self.rhs(i).max(0.0) / a;
                leave = match leave {
                    None => Some((i, ratio)),
                    Some((bi, br)) => {
                        let tie = (ratio - br).abs() <= 1e-12 * (1.0 + br.abs());
                        if (!tie && ratio < br) || (tie && self.basis[i] < self.basis[bi]) {
                            Some((i, ratio))
                        } else {
                            Some((bi, br))
                        }
                    }
                };
            }
            let Some((r, _)) = leave else {
                return LpStatus::Unbounded;
            };
            self.pivot(r, enter);
            *iterations += 1;
        }
    }
}

/// Solves `min c'x` subject to `a_ub x <= b_ub` and `x >= 0`.
pub fn lp_simplex(c: &[f64], a_ub: &Matrix, b_ub: &[f64], cfg: &SolverConfig) -> Result<LpSolution> {
    let n = c.len();
    let m = b_ub.len();
    if a_ub.cols() != n || a_ub.rows() != m {
        return Err(Error::Dimension(format!(
            "LP with {n} variables and {m} constraints got a {}x{} constraint matrix",
            a_ub.rows(),
            a_ub.cols()
        )));
    }
    check_finite(c, "cost")?;
    check_finite(b_ub, "b_ub")?;

    // Columns: x (n), slacks (m), artificials (one per negative-rhs row).
    let neg_rows: Vec<usize> = (0..m).filter(|&i| b_ub[i] < 0.0).collect();
    let n_art = neg_rows.len();
    let width = n + m + n_art;
    let w = width + 1;
    let mut t = vec![0.0; m * w];
    let mut basis = vec![0; m];
    let mut art_index = 0;
    for i in 0..m {
        let sign = if b_ub[i] < 0.0 { -1.0 } else { 1.0 };
        let row = &mut t[i * w..(i + 1) * w];
        for (dst, &a) in row[..n].iter_mut().zip(a_ub.row(i)) {
            *dst = sign * a;
        }
        row[n + i] = sign;
        row[width] = sign * b_ub[i];
        if sign < 0.0 {
            row[n + m + art_index] = 1.0;
            basis[i] = n + m + art_index;
            art_index += 1;
        } else {
            basis[i] = n + i;
        }
    }
    let mut tab = Tableau { rows: m, width, t, cost: vec![0.0; w], basis };
    let mut iterations = 0;

    if n_art > 0 {
        // Phase 1: minimize the sum of artificials.
        for j in n + m..width {
            tab.cost[j] = 1.0;
        }
        for &i in &neg_rows {
            for j in 0..w {
                tab.cost[j] -= tab.t[i * w + j];
            }
        }
        match tab.optimize(width, cfg, &mut iterations) {
            LpStatus::Optimal => {}
            LpStatus::IterationLimit => return Ok(failed(n, LpStatus::IterationLimit, iterations)),
            // Phase 1 is bounded below by zero.
            other => return Ok(failed(n, other, iterations)),
        }
        let infeasibility = -tab.cost[width];
        let scale = b_ub.iter().fold(1.0f64, |s, v| s.max(v.abs()));
        if infeasibility > cfg.feas_tol * scale {
            return Ok(failed(n, LpStatus::Infeasible, iterations));
        }
        // Drive remaining artificials out of the basis where possible.
        for r in 0..m {
            if tab.basis[r] < n + m {
                continue;
            }
            if let Some(c) = (0..n + m).find(|&j| tab.at(r, j).abs() > 1e-9) {
                tab.pivot(r, c);
                iterations += 1;
            }
        }
    }

    // Phase 2 reduced costs: c_j - c_B' B^-1 A_j, artificials priced at zero.
    let price = |j: usize| if j < n { c[j] } else { 0.0 };
    let mut cost = vec![0.0; w];
    cost[..n].copy_from_slice(&c[..n]);
    for r in 0..m {
        let cb = price(tab.basis[r]);
        if cb == 0.0 {
            continue;
        }
        for j in 0..w {
            cost[j] -= cb * tab.t[r * w + j];
        }
    }
    for r in 0..m {
        cost[tab.basis[r]] = 0.0;
    }
    tab.cost = cost;

    let status = tab.optimize(n + m, cfg, &mut iterations);
    let mut x = vec![0.0; n];
    for r in 0..m {
        if tab.basis[r] < n {
            x[tab.basis[r]] = tab.rhs(r).max(0.0);
        }
    }
    let objective = c.iter().zip(&x).map(|(a, b)| a * b).sum();
    Ok(LpSolution { x, objective, status, iterations })
}

fn failed(n: usize, status: LpStatus, iterations: usize) -> LpSolution {
    LpSolution { x: vec![0.0; n], objective: f64::NAN, status, iterations }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::GaussianRng;

    fn solve(c: &[f64], rows: &[Vec<f64>], b: &[f64]) -> LpSolution {
        lp_simplex(c, &Matrix::from_rows(rows).unwrap(), b, &SolverConfig::default()).unwrap()
    }

    #[test]
    fn single_lower_bound() {
        let sol = solve(&[1.0], &[vec![-1.0]], &[-1.0]);
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.x[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn two_variable_covering() {
        let sol = solve(&[1.0, 1.0], &[vec![-1.0, -1.0]], &[-2.0]);
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.objective - 2.0).abs() < 1e-12);
    }

    #[test]
    fn detects_infeasible() {
        // x <= 1 and x >= 2.
        let sol = solve(&[1.0], &[vec![1.0], vec![-1.0]], &[1.0, -2.0]);
        assert_eq!(sol.status, LpStatus::Infeasible);
    }

    #[test]
    fn detects_unbounded() {
        let sol = solve(&[-1.0, 0.0], &[vec![0.0, 1.0]], &[1.0]);
        assert_eq!(sol.status, LpStatus::Unbounded);
    }

    #[test]
    fn degenerate_problem_terminates() {
        // Classic degenerate vertex at the origin (several tight constraints).
        let sol = solve(
            &[-10.0, 57.0, 9.0, 24.0],
            &[
                vec![0.5, -5.5, -2.5, 9.0],
                vec![0.5, -1.5, -0.5, 1.0],
                vec![1.0, 0.0, 0.0, 0.0],
            ],
            &[0.0, 0.0, 1.0],
        );
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.objective + 1.0).abs() < 1e-9, "objective {}", sol.objective);
    }

    /// Brute-force optimum: every vertex is the intersection of `n` tight
    /// constraints among the rows of `A x <= b` and `-x <= 0`.
    fn vertex_oracle(c: &[f64], a: &[Vec<f64>], b: &[f64]) -> f64 {
        let n = c.len();
        let mut rows: Vec<(Vec<f64>, f64)> = a.iter().cloned().zip(b.iter().cloned()).collect();
        for j in 0..n {
            let mut e = vec![0.0; n];
            e[j] = -1.0;
            rows.push((e, 0.0));
        }
        let total = rows.len();
        let mut best = f64::INFINITY;
        let mut idx: Vec<usize> = (0..n).collect();
        loop {
            let sys: Vec<(Vec<f64>, f64)> = idx.iter().map(|&k| rows[k].clone()).collect();
            if let Some(x) = gauss_solve(sys) {
                if rows.iter().all(|(r, rb)| r.iter().zip(&x).map(|(u, v)| u * v).sum::<f64>() <= rb + 1e-9) {
                    best = best.min(c.iter().zip(&x).map(|(u, v)| u * v).sum());
                }
            }
            // next combination
            let mut i = n;
            loop {
                if i == 0 {
                    return best;
                }
                i -= 1;
                if idx[i] < total - n + i {
                    idx[i] += 1;
                    for k in i + 1..n {
                        idx[k] = idx[k - 1] + 1;
                    }
                    break;
                }
            }
        }
    }

    fn gauss_solve(mut sys: Vec<(Vec<f64>, f64)>) -> Option<Vec<f64>> {
        let n = sys.len();
        for col in 0..n {
            let piv = (col..n).max_by(|&a, &b| sys[a].0[col].abs().total_cmp(&sys[b].0[col].abs()))?;
            if sys[piv].0[col].abs() < 1e-10 {
                return None;
            }
            sys.swap(col, piv);
            for r in 0..n {
                if r != col {
                    let f = sys[r].0[col] / sys[col].0[col];
                    let (pr, pb) = sys[col].clone();
                    for k in 0..n {
                        sys[r].0[k] -= f * pr[k];
                    }
                    sys[r].1 -= f * pb;
                }
            }
        }
        Some((0..n).map(|i| sys[i].1 / sys[i].0[i]).collect())
    }

    #[test]
    fn random_lps_match_vertex_enumeration() {
        let mut rng = GaussianRng::seed_from_u64(2024);
        for _ in 0..20 {
            let n = 5;
            let m = 8;
            let c: Vec<f64> = (0..n).map(|_| 0.1 + rng.uniform()).collect();
            let a: Vec<Vec<f64>> = (0..m).map(|_| (0..n).map(|_| rng.standard_normal()).collect()).collect();
            // A feasible point x0 >= 0 with random slack.
            let x0: Vec<f64> = (0..n).map(|_| rng.uniform() * 2.0).collect();
            let b: Vec<f64> = a
                .iter()
                .map(|r| r.iter().zip(&x0).map(|(u, v)| u * v).sum::<f64>() + rng.uniform())
                .collect();
            let sol = solve(&c, &a, &b);
            assert_eq!(sol.status, LpStatus::Optimal);
            let oracle = vertex_oracle(&c, &a, &b);
            assert!((sol.objective - oracle).abs() < 1e-8, "{} vs {}", sol.objective, oracle);
        }
    }
}
