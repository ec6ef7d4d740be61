//! Sparsity-inequality bounds and their Monte-Carlo check.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{EstimatorKind, PrelimSpec, RegressionDataset, TargetSpec};
use crate::linalg::{norm2_sq, norm_inf, GaussianRng};
use crate::solvers::SolverConfig;
use crate::synth::response;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    Dantzig,
    Lasso,
    TransductiveMse,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    /// Bound on `||A(b - beta*)||_2^2`.
    pub pred_bound: f64,
    /// Bound on `||b - beta*||_1`.
    pub l1_bound: f64,
    pub lambda_used: f64,
    pub kind: BoundKind,
}

impl BoundReport {
    /// Threshold of the confidence event the bound is conditional on.
    pub fn conf_threshold(&self) -> f64 {
        match self.kind {
            BoundKind::Lasso => self.lambda_used / 2.0,
            _ => self.lambda_used,
        }
    }

    pub fn estimator(&self) -> EstimatorKind {
        match self.kind {
            BoundKind::Lasso => EstimatorKind::Lasso,
            _ => EstimatorKind::Dantzig,
        }
    }
}

fn check_inputs(c: f64, kappa: f64, sigma: f64, p: usize, eta: f64, n: usize) -> Result<f64> {
    if !(c > 0.0) || !c.is_finite() {
        return Err(Error::Assumption(format!("cone constant must be positive, got {c}")));
    }
    if !(kappa >= 0.0) || !kappa.is_finite() || !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidParameter("kappa and sigma must be finite and >= 0".into()));
    }
    if !(eta > 0.0 && eta < 1.0) {
        return Err(Error::InvalidParameter(format!("eta must lie in (0, 1), got {eta}")));
    }
    if p == 0 || n == 0 {
        return Err(Error::InvalidParameter("p and n must be positive".into()));
    }
    Ok((p as f64 / eta).ln())
}

/// Dantzig Selector bound: `8 kappa^2 sigma^2 s log(p/eta) / c1`.
pub fn bound_dantzig(c1: f64, kappa: f64, sigma: f64, s: usize, p: usize, eta: f64, n: usize) -> Result<BoundReport> {
    let log = check_inputs(c1, kappa, sigma, p, eta, n)?;
    let s = s as f64;
    Ok(BoundReport {
        pred_bound: 8.0 * kappa * kappa * sigma * sigma * s * log / c1,
        l1_bound: 2.0 * 2f64.sqrt() * kappa * sigma * s * (log / n as f64).sqrt() / c1,
        lambda_used: kappa * sigma * (2.0 * n as f64 * log).sqrt(),
        kind: BoundKind::Dantzig,
    })
}

/// LASSO bound: `72 sigma^2 kappa^2 s log(p/eta) / c3`, with the l1 bound
/// `24 sqrt(2) s sqrt(log(p/eta)/n) / c3` taken as stated (no `kappa sigma`).
pub fn bound_lasso(c3: f64, kappa: f64, sigma: f64, s: usize, p: usize, eta: f64, n: usize) -> Result<BoundReport> {
    let log = check_inputs(c3, kappa, sigma, p, eta, n)?;
    let s = s as f64;
    Ok(BoundReport {
        pred_bound: 72.0 * sigma * sigma * kappa * kappa * s * log / c3,
        l1_bound: 24.0 * 2f64.sqrt() * s * (log / n as f64).sqrt() / c3,
        lambda_used: 2.0 * kappa * sigma * (2.0 * n as f64 * log).sqrt(),
        kind: BoundKind::Lasso,
    })
}

/// Bound on the transductive mean squared error `(1/m)||Z(b - beta*)||^2`.
pub fn bound_transductive_mse(c1: f64, kappa: f64, sigma: f64, s: usize, p: usize, eta: f64, n: usize) -> Result<f64> {
    Ok(bound_dantzig(c1, kappa, sigma, s, p, eta, n)?.pred_bound / n as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundValidation {
    pub reps: usize,
    /// Share of replications whose prediction error exceeds the bound.
    pub violation_rate: f64,
    /// Share of replications where the confidence event failed.
    pub conf_failure_rate: f64,
    /// Share of replications violating the bound although the confidence
    /// event held. The bound says this is zero.
    pub violation_given_conf_rate: f64,
    /// Fits that did not converge; counted as violations.
    pub failed_fits: usize,
    /// `eta + 3 sqrt(eta (1 - eta) / reps)`.
    pub allowed_rate: f64,
}

impl BoundValidation {
    pub fn passed(&self) -> bool {
        self.violation_rate <= self.allowed_rate
    }
}

/// Re-draws the noise `reps` times (seed `seed + r`), fits the estimator the
/// bound refers to at `bound.lambda_used`, and counts how often
/// `||A(b - beta*)||^2` exceeds `bound.pred_bound`.
#[allow(clippy::too_many_arguments)]
pub fn validate_bound(
    ds: &RegressionDataset,
    spec: &TargetSpec,
    beta_star: &[f64],
    prelim: &PrelimSpec,
    bound: &BoundReport,
    reps: usize,
    eta: f64,
    seed: u64,
    cfg: &SolverConfig,
) -> Result<BoundValidation> {
    if reps == 0 {
        return Err(Error::InvalidParameter("at least one replication is needed".into()));
    }
    if !(eta > 0.0 && eta < 1.0) {
        return Err(Error::InvalidParameter(format!("eta must lie in (0, 1), got {eta}")));
    }
    if beta_star.len() != ds.p() {
        return Err(Error::Dimension(format!("beta* has length {}, p = {}", beta_star.len(), ds.p())));
    }
    let target = spec.a.matvec(beta_star)?;
    let estimator = bound.estimator();
    let outcomes = (0..reps)
        .into_par_iter()
        .map(|r| -> Result<(bool, bool, bool)> {
            let mut rng = GaussianRng::seed_from_u64(seed.wrapping_add(r as u64));
            let y = response(ds.x(), beta_star, ds.sigma(), &mut rng)?;
            let rep = ds.with_response(y)?;
            let est = prelim.compute(&rep, spec, cfg)?;
            let diff: Vec<f64> = est.value.iter().zip(&target).map(|(a, b)| a - b).collect();
            let conf_stat = norm_inf(&spec.a.tr_matvec(&diff)?);
            let conf_ok = conf_stat <= bound.conf_threshold() + 1e-12;
            let fit = estimator.fit(&rep, spec, &est, bound.lambda_used, cfg)?;
            let fitted = spec.a.matvec(&fit.beta)?;
            let err = norm2_sq(&fitted.iter().zip(&target).map(|(a, b)| a - b).collect::<Vec<_>>());
            // Rounding slack for the noiseless case, where the bound is 0.
            let slack = 1e-9 * norm2_sq(&target).max(1.0);
            let failed = !fit.converged();
            Ok((failed || err > bound.pred_bound + slack, conf_ok, failed))
        })
        .collect::<Result<Vec<_>>>()?;
    let count = |f: &dyn Fn(&(bool, bool, bool)) -> bool| outcomes.iter().filter(|o| f(o)).count();
    let total = reps as f64;
    Ok(BoundValidation {
        reps,
        violation_rate: count(&|o| o.0) as f64 / total,
        conf_failure_rate: count(&|o| !o.1) as f64 / total,
        violation_given_conf_rate: count(&|o| o.0 && o.1) as f64 / total,
        failed_fits: count(&|o| o.2),
        allowed_rate: eta + 3.0 * (eta * (1.0 - eta) / total).sqrt(),
    })
}
