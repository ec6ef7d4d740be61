//! Confidence constants for preliminary estimators.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{rowspace_projector, PrelimSpec, RegressionDataset, TargetSpec};
use crate::linalg::{gram, norm1, norm_inf, pseudo_inverse, quantile_sorted, GaussianRng, DEFAULT_PINV_TOL};
use crate::solvers::SolverConfig;
use crate::synth::response;

/// `sigma sqrt(2 n log(p / eta))`, the noise scale in the confidence event.
pub fn conf_scale(sigma: f64, n: usize, p: usize, eta: f64) -> f64 {
    sigma * (2.0 * n as f64 * (p as f64 / eta).ln()).sqrt()
}

fn check_eta(eta: f64) -> Result<()> {
    if !(eta > 0.0 && eta < 1.0) {
        return Err(Error::InvalidParameter(format!("eta must lie in (0, 1), got {eta}")));
    }
    Ok(())
}

/// `||A'(prelim - A beta*)||_inf / (sigma sqrt(2 n log(p/eta)))` for one
/// dataset. With `sigma = 0` the ratio is 0 for an exact preliminary and
/// infinite otherwise.
pub fn conf_statistic(
    ds: &RegressionDataset,
    spec: &TargetSpec,
    beta_star: &[f64],
    prelim: &PrelimSpec,
    eta: f64,
    cfg: &SolverConfig,
) -> Result<f64> {
    let est = prelim.compute(ds, spec, cfg)?;
    let target = spec.a.matvec(beta_star)?;
    let diff: Vec<f64> = est.value.iter().zip(&target).map(|(a, b)| a - b).collect();
    let num = norm_inf(&spec.a.tr_matvec(&diff)?);
    let den = conf_scale(ds.sigma(), ds.n(), ds.p(), eta);
    Ok(if den > 0.0 {
        num / den
    } else if num <= 1e-12 {
        0.0
    } else {
        f64::INFINITY
    })
}

/// Empirical `(1 - eta)` quantile of the confidence statistic over `reps`
/// fresh noise draws. Replication `r` draws its noise from seed `seed + r`.
#[allow(clippy::too_many_arguments)]
pub fn conf_kappa_mc(
    ds: &RegressionDataset,
    spec: &TargetSpec,
    beta_star: &[f64],
    prelim: &PrelimSpec,
    eta: f64,
    reps: usize,
    seed: u64,
    cfg: &SolverConfig,
) -> Result<f64> {
    check_eta(eta)?;
    if reps == 0 {
        return Err(Error::InvalidParameter("at least one replication is needed".into()));
    }
    if beta_star.len() != ds.p() {
        return Err(Error::Dimension(format!("beta* has length {}, p = {}", beta_star.len(), ds.p())));
    }
    let mut stats = (0..reps)
        .into_par_iter()
        .map(|r| {
            let mut rng = GaussianRng::seed_from_u64(seed.wrapping_add(r as u64));
            let y = response(ds.x(), beta_star, ds.sigma(), &mut rng)?;
            conf_statistic(&ds.with_response(y)?, spec, beta_star, prelim, eta, cfg)
        })
        .collect::<Result<Vec<f64>>>()?;
    stats.sort_unstable_by(f64::total_cmp);
    Ok(quantile_sorted(&stats, 1.0 - eta))
}

/// Where the `1/n` sits in the least-squares confidence constant. The two
/// forms are algebraically equal; both are kept to cross-check each other.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KappaForm {
    /// `Omega~ = (A'A)(X'X)^+(A'A) / n`, `kappa = sqrt(p / sum_j 1/Omega~_jj)`.
    Scaled,
    /// `Omega = (A'A)(X'X)^+(A'A)`, `kappa = sqrt(p / (n sum_j 1/Omega_jj))`.
    Unscaled,
}

/// Rows spaces of `X` and `A` agree, i.e. `Ker(A) = Ker(X)`.
pub fn kernels_match(ds: &RegressionDataset, spec: &TargetSpec) -> Result<bool> {
    let px = rowspace_projector(ds.x(), DEFAULT_PINV_TOL)?;
    let pa = rowspace_projector(&spec.a, DEFAULT_PINV_TOL)?;
    Ok(px.sub(&pa)?.max_abs() <= 1e-8)
}

/// Closed-form confidence constant of the least-squares preliminary
/// `A (X'X)^+ X'Y`, valid when `Ker(A) = Ker(X)`.
pub fn kappa_least_squares(ds: &RegressionDataset, spec: &TargetSpec, form: KappaForm) -> Result<f64> {
    if spec.a.cols() != ds.p() {
        return Err(Error::Dimension(format!("A has {} columns, p = {}", spec.a.cols(), ds.p())));
    }
    if !kernels_match(ds, spec)? {
        return Err(Error::Assumption("Ker(A) = Ker(X) does not hold".into()));
    }
    let h = gram(&spec.a);
    let g_pinv = pseudo_inverse(&gram(ds.x()), DEFAULT_PINV_TOL)?;
    let p = ds.p();
    let n = ds.n() as f64;
    let mut inv_sum = 0.0;
    for j in 0..p {
        let hj = h.col(j);
        let w = g_pinv.matvec(&hj)?;
        let omega: f64 = hj.iter().zip(&w).map(|(a, b)| a * b).sum();
        let omega = match form {
            KappaForm::Scaled => omega / n,
            KappaForm::Unscaled => omega,
        };
        if !(omega > 0.0) {
            return Err(Error::Assumption(format!("diagonal entry {} of Omega is zero", j + 1)));
        }
        inv_sum += 1.0 / omega;
    }
    Ok(match form {
        KappaForm::Scaled => (p as f64 / inv_sum).sqrt(),
        KappaForm::Unscaled => (p as f64 / (n * inv_sum)).sqrt(),
    })
}

/// Smallest `k` with `||(X'X - A'A) u||_inf <= k sigma sqrt(2 n log p)` for
/// all `||u||_1 <= 2 ||beta*||_1`. The maximum over the l1 ball sits at a
/// scaled coordinate vector, so `k = 2 ||beta*||_1 max|Delta_ij| / scale`.
pub fn k_bias_constant(ds: &RegressionDataset, spec: &TargetSpec, beta_star: &[f64]) -> Result<f64> {
    let p = ds.p();
    if p < 2 {
        return Err(Error::InvalidParameter("log p vanishes for p = 1".into()));
    }
    if spec.a.cols() != p || beta_star.len() != p {
        return Err(Error::Dimension("A, beta* and X disagree on p".into()));
    }
    let delta = gram(ds.x()).sub(&gram(&spec.a))?;
    let num = 2.0 * norm1(beta_star) * delta.max_abs();
    if num == 0.0 {
        return Ok(0.0);
    }
    let den = ds.sigma() * (2.0 * ds.n() as f64 * (p as f64).ln()).sqrt();
    if den == 0.0 {
        return Err(Error::InvalidParameter("sigma = 0 makes k unbounded".into()));
    }
    Ok(num / den)
}
