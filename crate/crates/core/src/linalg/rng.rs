//! Seeded Gaussian sampling.
//!
//! The generator is ChaCha8 (`rand_chacha`), a counter-based stream cipher
//! RNG whose output for a given seed is fixed across platforms and releases.
//! Seeds are expanded with `SeedableRng::seed_from_u64`. Uniforms take the top
//! 53 bits of a `u64` and are shifted off zero; normals come from the
//! Box-Muller transform, consumed in pairs (the sine branch is cached).
//! Changing any of this changes every experiment output.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct GaussianRng {
    inner: ChaCha8Rng,
    spare: Option<f64>,
}

impl GaussianRng {
    pub fn seed_from_u64(seed: u64) -> Self {
        Self { inner: ChaCha8Rng::seed_from_u64(seed), spare: None }
    }

    /// Uniform on the open interval (0, 1).
    pub fn uniform(&mut self) -> f64 {
        ((self.inner.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    pub fn standard_normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let u1 = self.uniform();
        let u2 = self.uniform();
        let r = (-2.0 * u1.ln()).sqrt();
        let (s, c) = (std::f64::consts::TAU * u2).sin_cos();
        self.spare = Some(r * s);
        r * c
    }

    pub fn normal_vec(&mut self, len: usize, sd: f64) -> Vec<f64> {
        (0..len).map(|_| sd * self.standard_normal()).collect()
    }

    /// Uniform index in `0..n` (`n > 0`).
    pub fn index(&mut self, n: usize) -> usize {
        ((self.uniform() * n as f64) as usize).min(n - 1)
    }
}

/// One design row with `Cov(x_j, x_k) = rho^|j-k|`, produced by the AR(1)
/// recursion `x_1 ~ N(0,1)`, `x_j = rho x_{j-1} + sqrt(1 - rho^2) z_j`.
pub fn mvn_ar1_row(p: usize, rho: f64, rng: &mut GaussianRng) -> Result<Vec<f64>> {
    if !(0.0..1.0).contains(&rho) {
        return Err(Error::InvalidParameter(format!("rho must lie in [0, 1), got {rho}")));
    }
    let innovation = (1.0 - rho * rho).sqrt();
    let mut row = Vec::with_capacity(p);
    let mut prev = 0.0;
    for j in 0..p {
        let z = rng.standard_normal();
        prev = if j == 0 { z } else { rho * prev + innovation * z };
        row.push(prev);
    }
    Ok(row)
}
