//! User-specified drift, variance and noise law.
//!
//! Noise acts along the ray: `ξ = s·σ(x)·r` with `s` a Rademacher sign or a
//! standard normal, so `ℓξ = s·σ(x)`. Steps leaving the orthant are projected
//! back onto it; the origin is absorbing.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::engine::ProcessModel;
use crate::error::{invalid, Result};
use crate::rng::RandomStream;
use crate::spectral::SpectralData;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum NoiseLaw {
    Zero,
    Rademacher,
    Gaussian,
}

type DriftFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;
type Sigma2Fn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

#[derive(Clone)]
pub struct SyntheticModel {
    spectral: SpectralData,
    drift: DriftFn,
    sigma2: Sigma2Fn,
    noise: NoiseLaw,
}

impl fmt::Debug for SyntheticModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SyntheticModel").field("dim", &self.spectral.dim()).field("noise", &self.noise).finish()
    }
}

impl SyntheticModel {
    pub fn new(
        spectral: SpectralData,
        drift: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
        sigma2: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        noise: NoiseLaw,
    ) -> Self {
        Self { spectral, drift: Arc::new(drift), sigma2: Arc::new(sigma2), noise }
    }

    /// `g(x) = a (ℓx)^p r` and `σ²(x) = c (ℓx)^s`, both zero at `ℓx = 0`.
    pub fn power_law(
        spectral: SpectralData,
        drift_coeff: f64,
        drift_exp: f64,
        sigma_coeff: f64,
        sigma_exp: f64,
        noise: NoiseLaw,
    ) -> Result<Self> {
        if !(sigma_coeff >= 0.0) {
            return Err(invalid(format!("sigma_coeff must be non-negative, got {sigma_coeff}")));
        }
        if ![drift_coeff, drift_exp, sigma_exp].iter().all(|v| v.is_finite()) {
            return Err(invalid("synthetic coefficients must be finite"));
        }
        let s_drift = spectral.clone();
        let s_sigma = spectral.clone();
        let right = spectral.right().to_vec();
        Ok(Self::new(
            spectral,
            move |x| {
                let w = s_drift.ell_dot(x);
                let mag = if w > 0.0 { drift_coeff * w.powf(drift_exp) } else { 0.0 };
                right.iter().map(|r| mag * r).collect()
            },
            move |x| {
                let w = s_sigma.ell_dot(x);
                if w > 0.0 {
                    sigma_coeff * w.powf(sigma_exp)
                } else {
                    0.0
                }
            },
            noise,
        ))
    }

    pub fn noise_law(&self) -> NoiseLaw {
        self.noise
    }

    fn raw_noise(&self, x: &[f64], rng: &mut RandomStream) -> Vec<f64> {
        let sign: f64 = match self.noise {
            NoiseLaw::Zero => 0.0,
            NoiseLaw::Rademacher => {
                if rng.random::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
            NoiseLaw::Gaussian => rng.sample(StandardNormal),
        };
        let amp = sign * (self.sigma2)(x).max(0.0).sqrt();
        self.spectral.right().iter().map(|r| amp * r).collect()
    }
}

impl ProcessModel for SyntheticModel {
    fn spectral(&self) -> &SpectralData {
        &self.spectral
    }

    fn drift(&self, x: &[f64]) -> Vec<f64> {
        (self.drift)(x)
    }

    fn sigma2(&self, x: &[f64]) -> f64 {
        match self.noise {
            NoiseLaw::Zero => 0.0,
            _ => (self.sigma2)(x),
        }
    }

    fn transition(&self, x: &[f64], rng: &mut RandomStream) -> Result<Vec<f64>> {
        let mean = self.conditional_mean(x);
        let xi = self.raw_noise(x, rng);
        Ok(mean.iter().zip(xi).map(|(m, e)| (m + e).max(0.0)).collect())
    }

    fn sample_noise(&self, x: &[f64], rng: &mut RandomStream) -> Result<Vec<f64>> {
        Ok(self.raw_noise(x, rng))
    }

    fn sample_noise_batch(&self, x: &[f64], n: usize, rng: &mut RandomStream) -> Result<Vec<Vec<f64>>> {
        Ok((0..n).map(|_| self.raw_noise(x, rng)).collect())
    }
}
