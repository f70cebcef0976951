//! Population-size-dependent bisexual Galton-Watson process with mating
//! function `L(f, m) = min(f, r·m)`.
//!
//! The chain of interest is the number of couples `X_n`. Given `X_n = x`, each
//! of the `x` couples has `ρ` female and `τ` male offspring, iid across
//! couples, with `E[ρ] = e(x) = 1 + β/√x` and `E[τ] = e(x)/r`.

use std::f64::consts::PI;

use rand_distr::{Binomial, Distribution, Poisson};
use serde::Serialize;

use super::pmf::{min_moments, WindowPmf};
use crate::engine::{ProcessModel, OVERFLOW_GUARD};
use crate::error::{invalid, Error, Result};
use crate::rng::RandomStream;
use crate::spectral::SpectralData;

/// Offspring law of one couple.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum OffspringFamily {
    /// Independent Poisson counts (variance equals mean).
    Equidispersed,
    /// `ρ = 2·Bernoulli(e/2)`, `τ = 2·Bernoulli(e/(2r))`, independent.
    Bernoulli,
    /// Fixed counts, ignoring `β`.
    Degenerate { rho: u64, tau: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BisexualModel {
    r_mate: u64,
    beta: f64,
    family: OffspringFamily,
    /// Exponent of the uniform `2 + η` moment bound.
    eta: f64,
    #[serde(skip)]
    spectral: SpectralData,
}

/// `L(f, m) = min(f, r·m)`.
pub fn mating(females: u64, males: u64, r: u64) -> u64 {
    females.min(males.saturating_mul(r))
}

/// `(β − √(α/2π))·√x`, the leading term of the drift.
pub fn bisexual_drift_asymptotic(beta: f64, alpha: f64, x: f64) -> Result<f64> {
    Ok((beta - bisexual_threshold(alpha)?) * x.sqrt())
}

/// `√(α/2π)`: extinction is almost sure below this `β`, divergence has
/// positive probability above it.
pub fn bisexual_threshold(alpha: f64) -> Result<f64> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(invalid(format!("alpha must be positive, got {alpha}")));
    }
    Ok((alpha / (2.0 * PI)).sqrt())
}

/// One generation from `x` couples.
pub fn bisexual_step(model: &BisexualModel, x: u64, rng: &mut RandomStream) -> Result<u64> {
    if x == 0 {
        return Ok(0);
    }
    let (females, males) = model.sample_offspring_totals(x, rng)?;
    let next = mating(females, males, model.r_mate);
    if next as f64 > OVERFLOW_GUARD {
        return Err(Error::NumericOverflow { value: next as f64, guard: OVERFLOW_GUARD });
    }
    Ok(next)
}

impl BisexualModel {
    pub fn new(r_mate: u64, beta: f64, family: OffspringFamily) -> Result<Self> {
        if r_mate < 1 {
            return Err(invalid("r_mate must be at least 1"));
        }
        if !beta.is_finite() {
            return Err(invalid(format!("beta must be finite, got {beta}")));
        }
        Ok(Self { r_mate, beta, family, eta: 1.0, spectral: SpectralData::univariate() })
    }

    pub fn r_mate(&self) -> u64 {
        self.r_mate
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn family(&self) -> OffspringFamily {
        self.family
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    /// `e(x) = E_x[ρ]`, clamped to the family's admissible range.
    pub fn mean_female_offspring(&self, x: u64) -> f64 {
        match self.family {
            OffspringFamily::Degenerate { rho, .. } => rho as f64,
            _ if x == 0 => 0.0,
            OffspringFamily::Equidispersed => (1.0 + self.beta / (x as f64).sqrt()).max(0.0),
            OffspringFamily::Bernoulli => (1.0 + self.beta / (x as f64).sqrt()).clamp(0.0, 2.0),
        }
    }

    /// `v(x) = E_x[(ρ − rτ)²]`.
    pub fn v(&self, x: u64) -> f64 {
        let e = self.mean_female_offspring(x);
        let r = self.r_mate as f64;
        match self.family {
            OffspringFamily::Equidispersed => e * (1.0 + r),
            OffspringFamily::Bernoulli => 2.0 * e * (1.0 + r) - 2.0 * e * e,
            OffspringFamily::Degenerate { rho, tau } => (rho as f64 - r * tau as f64).powi(2),
        }
    }

    /// `α = lim v(x)`.
    pub fn alpha(&self) -> f64 {
        let r = self.r_mate as f64;
        match self.family {
            OffspringFamily::Equidispersed => 1.0 + r,
            OffspringFamily::Bernoulli => 2.0 * r,
            OffspringFamily::Degenerate { rho, tau } => (rho as f64 - r * tau as f64).powi(2),
        }
    }

    pub fn threshold(&self) -> Result<f64> {
        bisexual_threshold(self.alpha())
    }

    /// Totals `(Σρᵢ, Στᵢ)` over `x` couples, sampled through the family's
    /// convolution closure (Poisson and binomial sums).
    pub fn sample_offspring_totals(&self, x: u64, rng: &mut RandomStream) -> Result<(u64, u64)> {
        let e = self.mean_female_offspring(x);
        let r = self.r_mate as f64;
        let n = x as f64;
        if n * e.max(1.0) > OVERFLOW_GUARD {
            return Err(Error::NumericOverflow { value: n * e, guard: OVERFLOW_GUARD });
        }
        Ok(match self.family {
            OffspringFamily::Equidispersed => (poisson(n * e, rng), poisson(n * e / r, rng)),
            OffspringFamily::Bernoulli => (2 * binomial(x, e / 2.0, rng), 2 * binomial(x, e / (2.0 * r), rng)),
            OffspringFamily::Degenerate { rho, tau } => (x * rho, x * tau),
        })
    }

    /// Exact `(E_x[X₁], Var_x(X₁))` from truncated mass functions.
    pub fn exact_moments(&self, x: u64) -> (f64, f64) {
        if x == 0 {
            return (0.0, 0.0);
        }
        let e = self.mean_female_offspring(x);
        let r = self.r_mate;
        let n = x as f64;
        match self.family {
            OffspringFamily::Equidispersed => {
                min_moments(&WindowPmf::poisson(n * e), &WindowPmf::poisson(n * e / r as f64), r)
            }
            OffspringFamily::Bernoulli => {
                let (m, v) = min_moments(
                    &WindowPmf::binomial(x, e / 2.0),
                    &WindowPmf::binomial(x, e / (2.0 * r as f64)),
                    r,
                );
                (2.0 * m, 4.0 * v)
            }
            OffspringFamily::Degenerate { rho, tau } => (mating(x * rho, x * tau, r) as f64, 0.0),
        }
    }
}

fn poisson(lambda: f64, rng: &mut RandomStream) -> u64 {
    if lambda <= 0.0 {
        return 0;
    }
    Poisson::new(lambda).expect("finite positive rate").sample(rng) as u64
}

fn binomial(n: u64, p: f64, rng: &mut RandomStream) -> u64 {
    Binomial::new(n, p.clamp(0.0, 1.0)).expect("probability in [0, 1]").sample(rng)
}

fn count(x: &[f64]) -> u64 {
    x[0].round() as u64
}

impl ProcessModel for BisexualModel {
    fn spectral(&self) -> &SpectralData {
        &self.spectral
    }

    fn drift(&self, x: &[f64]) -> Vec<f64> {
        let n = count(x);
        vec![self.exact_moments(n).0 - n as f64]
    }

    fn sigma2(&self, x: &[f64]) -> f64 {
        self.exact_moments(count(x)).1
    }

    fn conditional_mean(&self, x: &[f64]) -> Vec<f64> {
        vec![self.exact_moments(count(x)).0]
    }

    fn transition(&self, x: &[f64], rng: &mut RandomStream) -> Result<Vec<f64>> {
        Ok(vec![bisexual_step(self, count(x), rng)? as f64])
    }

    fn moment_delta(&self) -> f64 {
        self.eta
    }
}
