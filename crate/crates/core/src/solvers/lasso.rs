use super::{FitResult, FitStatus, SolverConfig};
use crate::error::{Error, Result};
use crate::linalg::{axpy, check_finite, cholesky_solve, dot, norm1, norm2_sq, symmetric_eigen, Matrix};

const ANDERSON_DEPTH: usize = 5;
const NEWTON_EVERY: usize = 100;

#[derive(Debug, Clone, Copy)]
pub struct LassoProblem<'a> {
    pub design: &'a Matrix,
    pub response: &'a [f64],
    pub lambda: f64,
}

impl<'a> LassoProblem<'a> {
    pub fn new(design: &'a Matrix, response: &'a [f64], lambda: f64) -> Result<Self> {
        validate(design, response, lambda)?;
        Ok(Self { design, response, lambda })
    }
}

pub(super) fn validate(design: &Matrix, response: &[f64], lambda: f64) -> Result<()> {
    if design.rows() != response.len() {
        return Err(Error::Dimension(format!(
            "design has {} rows but response has length {}",
            design.rows(),
            response.len()
        )));
    }
    check_finite(response, "response")?;
    if !lambda.is_finite() || lambda < 0.0 {
        return Err(Error::InvalidParameter(format!("lambda must be finite and >= 0, got {lambda}")));
    }
    Ok(())
}

#[inline]
pub fn soft_threshold(z: f64, t: f64) -> f64 {
    if z > t {
        z - t
    } else if z < -t {
        z + t
    } else {
        0.0
    }
}

/// `||y - A b||^2 + 2 lambda ||b||_1`.
pub fn lasso_objective(design: &Matrix, response: &[f64], beta: &[f64], lambda: f64) -> Result<f64> {
    let fitted = design.matvec(beta)?;
    let rss: f64 = response.iter().zip(&fitted).map(|(y, f)| (y - f) * (y - f)).sum();
    Ok(rss + 2.0 * lambda * norm1(beta))
}

/// Single-shot cyclic coordinate descent fit.
pub fn lasso_fit(prob: &LassoProblem<'_>, cfg: &SolverConfig) -> Result<FitResult> {
    LassoSolver::new(prob.design).fit(prob.response, prob.lambda, None, cfg)
}

/// Coordinate-descent LASSO bound to one design matrix.
///
/// Holds a column-major copy of the design and the squared column norms so a
/// path of fits (and several responses) can reuse them.
#[derive(Debug, Clone)]
pub struct LassoSolver {
    rows: usize,
    columns: Vec<Vec<f64>>,
    sq_norms: Vec<f64>,
}

impl LassoSolver {
    pub fn new(design: &Matrix) -> Self {
        let columns = design.columns();
        let sq_norms = columns.iter().map(|c| norm2_sq(c)).collect();
        Self { rows: design.rows(), columns, sq_norms }
    }

    pub fn p(&self) -> usize {
        self.columns.len()
    }

    /// `A' v`.
    pub fn correlations(&self, v: &[f64]) -> Vec<f64> {
        self.columns.iter().map(|c| dot(c, v)).collect()
    }

    fn residual(&self, response: &[f64], beta: &[f64]) -> Vec<f64> {
        let mut r = response.to_vec();
        for (col, &b) in self.columns.iter().zip(beta) {
            if b != 0.0 {
                axpy(-b, col, &mut r);
            }
        }
        r
    }

    fn kkt_residual(&self, r: &[f64], beta: &[f64], lambda: f64) -> f64 {
        self.columns
            .iter()
            .zip(beta)
            .map(|(col, &b)| {
                let g = dot(col, r);
                if b > 0.0 {
                    (g - lambda).abs()
                } else if b < 0.0 {
                    (g + lambda).abs()
                } else {
                    (g.abs() - lambda).max(0.0)
                }
            })
            .fold(0.0, f64::max)
    }

    /// One sweep over `coords`; returns the largest coefficient change.
    fn sweep(&self, coords: impl Iterator<Item = usize>, beta: &mut [f64], r: &mut [f64], lambda: f64) -> f64 {
        let mut max_change = 0.0f64;
        for j in coords {
            let sq = self.sq_norms[j];
            let old = beta[j];
            let new = if sq > 0.0 {
                let z = dot(&self.columns[j], r) + sq * old;
                soft_threshold(z, lambda) / sq
            } else {
                0.0
            };
            if new != old {
                axpy(old - new, &self.columns[j], r);
                beta[j] = new;
                max_change = max_change.max((new - old).abs());
            }
        }
        max_change
    }

    /// Anderson extrapolation of the last active-set sweeps. Returns the
    /// extrapolated point and its residual only when it lowers the objective.
    fn extrapolate(
        &self,
        response: &[f64],
        active: &[usize],
        history: &[Vec<f64>],
        beta: &[f64],
        r: &[f64],
        lambda: f64,
    ) -> Option<(Vec<f64>, Vec<f64>)> {
        let k = history.len() - 1;
        let diffs: Vec<Vec<f64>> =
            history.windows(2).map(|w| w[1].iter().zip(&w[0]).map(|(a, b)| a - b).collect()).collect();
        let mut gram = Matrix::zeros(k, k);
        for i in 0..k {
            for j in 0..=i {
                let v = dot(&diffs[i], &diffs[j]);
                gram.set(i, j, v);
                gram.set(j, i, v);
            }
        }
        let ridge = 1e-10 * (0..k).map(|i| gram.get(i, i)).sum::<f64>().max(f64::MIN_POSITIVE);
        for i in 0..k {
            gram.set(i, i, gram.get(i, i) + ridge);
        }
        let z = cholesky_solve(&gram, &vec![1.0; k]).ok()?;
        let total: f64 = z.iter().sum();
        if !total.is_finite() || total == 0.0 {
            return None;
        }
        let mut ext = beta.to_vec();
        for (a, &j) in active.iter().enumerate() {
            ext[j] = (0..k).map(|i| z[i] / total * history[i + 1][a]).sum();
        }
        if !ext.iter().all(|v| v.is_finite()) {
            return None;
        }
        let res = self.residual(response, &ext);
        let current = norm2_sq(r) + 2.0 * lambda * norm1(beta);
        (norm2_sq(&res) + 2.0 * lambda * norm1(&ext) < current).then_some((ext, res))
    }

    /// Newton step on the current support with the current signs, cut short
    /// where a coefficient would change sign. A rank-deficient support is
    /// first shrunk by moving along null directions of its columns, which
    /// keeps the fit and lowers the penalty. The result is kept only if it
    /// lowers the objective.
    fn newton_step(&self, response: &[f64], beta: &[f64], r: &[f64], lambda: f64) -> Option<(Vec<f64>, Vec<f64>)> {
        let mut next = beta.to_vec();
        let mut target = None;
        for _ in 0..self.p() {
            let support: Vec<usize> = (0..self.p()).filter(|&j| next[j] != 0.0).collect();
            if support.is_empty() {
                break;
            }
            let gram = self.support_gram(&support);
            let rhs: Vec<f64> = support
                .iter()
                .map(|&j| dot(&self.columns[j], response) - lambda * next[j].signum())
                .collect();
            if support.len() <= self.rows {
                if let Ok(t) = cholesky_solve(&gram, &rhs) {
                    target = Some((support, t));
                    break;
                }
            }
            if lambda == 0.0 || !self.drop_along_null(&support, &gram, &mut next) {
                break;
            }
        }
        if let Some((support, target)) = target {
            let mut t = 1.0f64;
            let mut blocked = None;
            for (a, &j) in support.iter().enumerate() {
                if target[a].signum() != next[j].signum() {
                    let cross = next[j] / (next[j] - target[a]);
                    if cross < t {
                        t = cross;
                        blocked = Some(j);
                    }
                }
            }
            for (a, &j) in support.iter().enumerate() {
                next[j] += t * (target[a] - next[j]);
            }
            if let Some(j) = blocked {
                next[j] = 0.0;
            }
        }
        if !next.iter().all(|v| v.is_finite()) {
            return None;
        }
        let res = self.residual(response, &next);
        let current = norm2_sq(r) + 2.0 * lambda * norm1(beta);
        (norm2_sq(&res) + 2.0 * lambda * norm1(&next) < current).then_some((next, res))
    }

    fn support_gram(&self, support: &[usize]) -> Matrix {
        let k = support.len();
        let mut gram = Matrix::zeros(k, k);
        for a in 0..k {
            for b in 0..=a {
                let v = dot(&self.columns[support[a]], &self.columns[support[b]]);
                gram.set(a, b, v);
                gram.set(b, a, v);
            }
        }
        gram
    }

    /// Moves against the null-space part of the sign vector until the first
    /// coefficient reaches zero. Returns false when there is no such part.
    fn drop_along_null(&self, support: &[usize], gram: &Matrix, beta: &mut [f64]) -> bool {
        let Ok(eig) = symmetric_eigen(gram) else { return false };
        let top = eig.values.last().copied().unwrap_or(0.0).max(0.0);
        let k = support.len();
        let mut d = vec![0.0; k];
        for (i, &v) in eig.values.iter().enumerate() {
            if v > 1e-10 * top {
                continue;
            }
            let u = eig.vector(i);
            let c: f64 = support.iter().zip(&u).map(|(&j, x)| beta[j].signum() * x).sum();
            axpy(c, &u, &mut d);
        }
        let mut t = f64::INFINITY;
        let mut blocked = None;
        for (a, &j) in support.iter().enumerate() {
            if d[a] != 0.0 && d[a].signum() == beta[j].signum() {
                let cross = beta[j] / d[a];
                if cross < t {
                    t = cross;
                    blocked = Some(j);
                }
            }
        }
        let Some(blocked) = blocked else { return false };
        if norm2_sq(&d) < 1e-20 {
            return false;
        }
        for (a, &j) in support.iter().enumerate() {
            beta[j] -= t * d[a];
        }
        beta[blocked] = 0.0;
        true
    }

    /// Fits at `lambda`, starting from `start` (zero when `None`).
    ///
    /// Full sweeps alternate with sweeps restricted to the nonzero
    /// coefficients. The fit is `Converged` once a full sweep changes nothing
    /// by more than `cd_tol` and the optimality residual, recomputed from a
    /// fresh residual vector, is within `kkt_tol`. If that residual is still
    /// too large, the active-set phase runs again to a tighter tolerance.
    /// Every few active-set sweeps an Anderson extrapolation is tried, and
    /// now and then a Newton step on the support; either is kept only if it
    /// lowers the objective.
    pub fn fit(&self, response: &[f64], lambda: f64, start: Option<&[f64]>, cfg: &SolverConfig) -> Result<FitResult> {
        if response.len() != self.rows {
            return Err(Error::Dimension(format!(
                "design has {} rows but response has length {}",
                self.rows,
                response.len()
            )));
        }
        check_finite(response, "response")?;
        if !lambda.is_finite() || lambda < 0.0 {
            return Err(Error::InvalidParameter(format!("lambda must be finite and >= 0, got {lambda}")));
        }
        let p = self.p();
        let mut beta = match start {
            Some(s) if s.len() == p => s.to_vec(),
            Some(s) => {
                return Err(Error::Dimension(format!("warm start of length {} for {p} coefficients", s.len())))
            }
            None => vec![0.0; p],
        };
        check_finite(&beta, "warm start")?;
        let mut r = self.residual(response, &beta);
        let mut trace = Vec::new();
        let mut iterations = 0;
        let mut status = FitStatus::MaxIter;
        let mut kkt = f64::INFINITY;

        let record = |trace: &mut Vec<f64>, r: &[f64], beta: &[f64]| {
            if cfg.record_trace {
                trace.push(norm2_sq(r) + 2.0 * lambda * norm1(beta));
            }
        };
        record(&mut trace, &r, &beta);

        let mut inner_tol = cfg.cd_tol;
        'outer: while iterations < cfg.max_iter {
            let change = self.sweep(0..p, &mut beta, &mut r, lambda);
            iterations += 1;
            record(&mut trace, &r, &beta);
            if change < cfg.cd_tol {
                r = self.residual(response, &beta);
                kkt = self.kkt_residual(&r, &beta, lambda);
                if kkt <= cfg.kkt_tol {
                    status = FitStatus::Converged;
                    break;
                }
                if change == 0.0 {
                    // Floating-point fixpoint that still misses kkt_tol.
                    break;
                }
                inner_tol *= 0.01;
                if let Some((b, res)) = self.newton_step(response, &beta, &r, lambda) {
                    beta = b;
                    r = res;
                    record(&mut trace, &r, &beta);
                }
            }
            let active: Vec<usize> = (0..p).filter(|&j| beta[j] != 0.0).collect();
            let mut history = vec![active.iter().map(|&j| beta[j]).collect::<Vec<f64>>()];
            let mut sweeps = 0;
            loop {
                if iterations >= cfg.max_iter {
                    break 'outer;
                }
                let change = self.sweep(active.iter().copied(), &mut beta, &mut r, lambda);
                iterations += 1;
                record(&mut trace, &r, &beta);
                if change < inner_tol {
                    break;
                }
                sweeps += 1;
                if sweeps % NEWTON_EVERY == 0 {
                    if let Some((b, res)) = self.newton_step(response, &beta, &r, lambda) {
                        beta = b;
                        r = res;
                        record(&mut trace, &r, &beta);
                        history.clear();
                        history.push(active.iter().map(|&j| beta[j]).collect());
                        continue;
                    }
                }
                history.push(active.iter().map(|&j| beta[j]).collect());
                if history.len() > ANDERSON_DEPTH {
                    if let Some((b, res)) = self.extrapolate(response, &active, &history, &beta, &r, lambda) {
                        beta = b;
                        r = res;
                        record(&mut trace, &r, &beta);
                    }
                    history.clear();
                    history.push(active.iter().map(|&j| beta[j]).collect());
                }
            }
        }
        if status != FitStatus::Converged {
            r = self.residual(response, &beta);
            kkt = self.kkt_residual(&r, &beta, lambda);
        }
        let objective = norm2_sq(&r) + 2.0 * lambda * norm1(&beta);
        Ok(FitResult { beta, lambda, iterations, kkt_residual: kkt, objective, status, objective_trace: trace })
    }

    /// Warm-started fits along `lambdas` in the given order.
    pub fn path(&self, response: &[f64], lambdas: &[f64], cfg: &SolverConfig) -> Result<Vec<FitResult>> {
        let mut out: Vec<FitResult> = Vec::with_capacity(lambdas.len());
        for &lambda in lambdas {
            let start = out.last().map(|f| f.beta.as_slice());
            out.push(self.fit(response, lambda, start, cfg)?);
        }
        Ok(out)
    }
}
