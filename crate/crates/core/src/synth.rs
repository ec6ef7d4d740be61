//! Synthetic sparse regression problems with AR(1)-correlated Gaussian designs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::RegressionDataset;
use crate::linalg::{mvn_ar1_row, GaussianRng, Matrix};

fn default_beta_value() -> f64 {
    5.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub p: usize,
    pub s: usize,
    pub n: usize,
    pub m: usize,
    pub rho: f64,
    pub sigma2: f64,
    #[serde(default = "default_beta_value")]
    pub beta_value: f64,
    #[serde(default)]
    pub seed: u64,
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.p == 0 || self.n == 0 {
            return Err(Error::InvalidParameter("p and n must be positive".into()));
        }
        if self.s > self.p {
            return Err(Error::InvalidParameter(format!("s = {} exceeds p = {}", self.s, self.p)));
        }
        if self.m < self.n {
            return Err(Error::InvalidParameter(format!("m = {} is smaller than n = {}", self.m, self.n)));
        }
        if !(0.0..1.0).contains(&self.rho) {
            return Err(Error::InvalidParameter(format!("rho must lie in [0, 1), got {}", self.rho)));
        }
        if !self.sigma2.is_finite() || self.sigma2 < 0.0 {
            return Err(Error::InvalidParameter(format!("sigma2 must be >= 0, got {}", self.sigma2)));
        }
        if !self.beta_value.is_finite() {
            return Err(Error::InvalidParameter("beta_value must be finite".into()));
        }
        Ok(())
    }

    pub fn beta_star(&self) -> Vec<f64> {
        (0..self.p).map(|j| if j < self.s { self.beta_value } else { 0.0 }).collect()
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }
}

/// Draws `Z` (m rows), takes `X` as its first `n` rows, then draws the noise.
pub fn generate(cfg: &SynthConfig) -> Result<(RegressionDataset, Vec<f64>)> {
    cfg.validate()?;
    let mut rng = GaussianRng::seed_from_u64(cfg.seed);
    let mut data = Vec::with_capacity(cfg.m * cfg.p);
    for _ in 0..cfg.m {
        data.extend(mvn_ar1_row(cfg.p, cfg.rho, &mut rng)?);
    }
    let z = Matrix::new(cfg.m, cfg.p, data)?;
    let x = z.top_rows(cfg.n)?;
    let beta = cfg.beta_star();
    let sigma = cfg.sigma2.sqrt();
    let y = response(&x, &beta, sigma, &mut rng)?;
    let ds = RegressionDataset::new(x, y, Some(z), sigma)?;
    Ok((ds, beta))
}

/// `X beta + sigma * noise` with noise drawn from `rng`.
pub fn response(x: &Matrix, beta: &[f64], sigma: f64, rng: &mut GaussianRng) -> Result<Vec<f64>> {
    let mut y = x.matvec(beta)?;
    if sigma > 0.0 {
        for v in &mut y {
            *v += sigma * rng.standard_normal();
        }
    }
    Ok(y)
}

/// Rescales every column so that `X_j'X_j / n = 1`, applying the same factor to
/// the matching column of `Z`. Returns the new dataset and the factors.
pub fn normalize_columns(ds: &RegressionDataset) -> Result<(RegressionDataset, Vec<f64>)> {
    let n = ds.n() as f64;
    let mut factors = Vec::with_capacity(ds.p());
    for (j, col) in ds.x().columns().iter().enumerate() {
        let ss: f64 = col.iter().map(|v| v * v).sum();
        if ss == 0.0 {
            return Err(Error::Data(format!("column {} of X is zero", j + 1)));
        }
        let f = (n / ss).sqrt();
        factors.push(if (f - 1.0).abs() <= 4.0 * f64::EPSILON { 1.0 } else { f });
    }
    let mut x = ds.x().clone();
    let mut z = ds.z().clone();
    for (j, &f) in factors.iter().enumerate() {
        if f != 1.0 {
            x.scale_col(j, f);
            z.scale_col(j, f);
        }
    }
    let out = ds.with_designs(x, z).mark_normalized()?;
    Ok((out, factors))
}
