//! The process contract `X_{n+1} = M X_n + g(X_n) + ξ_n` and path simulation.

use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::rng::RandomStream;
use crate::spectral::{check_ratio, norm1, SpectralData};

/// Largest admissible state component. Integer counts below this stay exact in `f64`.
pub const OVERFLOW_GUARD: f64 = 1e15;
pub const DEFAULT_HORIZON: u64 = 1_000_000;

/// A Markov model on the orthant obeying the near-critical model equation.
///
/// Implementations are immutable after construction and shared across threads.
pub trait ProcessModel: Send + Sync {
    fn spectral(&self) -> &SpectralData;

    fn dim(&self) -> usize {
        self.spectral().dim()
    }

    /// `g(x)`.
    fn drift(&self, x: &[f64]) -> Vec<f64>;

    /// `σ²(x) = E[(ℓξ)² | X = x]`.
    fn sigma2(&self, x: &[f64]) -> f64;

    /// One transition from `x`. Callers go through [`step`], which validates
    /// the input and applies the overflow guard.
    fn transition(&self, x: &[f64], rng: &mut RandomStream) -> Result<Vec<f64>>;

    /// A draw of `ξ` at `x`. Defaults to `X₁ − Mx − g(x)`.
    fn sample_noise(&self, x: &[f64], rng: &mut RandomStream) -> Result<Vec<f64>> {
        let next = self.transition(x, rng)?;
        let mean = self.conditional_mean(x);
        Ok(next.iter().zip(mean).map(|(a, b)| a - b).collect())
    }

    /// `n` draws of `ξ` at `x`, evaluating `Mx + g(x)` once.
    fn sample_noise_batch(&self, x: &[f64], n: usize, rng: &mut RandomStream) -> Result<Vec<Vec<f64>>> {
        let mean = self.conditional_mean(x);
        (0..n)
            .map(|_| Ok(self.transition(x, rng)?.iter().zip(&mean).map(|(a, b)| a - b).collect()))
            .collect()
    }

    /// `Mx + g(x)`.
    fn conditional_mean(&self, x: &[f64]) -> Vec<f64> {
        let mx = self.spectral().matrix().mul_vec(x);
        mx.iter().zip(self.drift(x)).map(|(a, b)| a + b).collect()
    }

    fn is_absorbing(&self, x: &[f64]) -> bool {
        x.iter().all(|v| *v == 0.0)
    }

    /// δ in the `2 + δ` moment condition.
    fn moment_delta(&self) -> f64 {
        1.0
    }

    /// c in the moment condition `E‖ξ‖^p ≤ c σ^p`.
    fn moment_const(&self) -> f64 {
        100.0
    }
}

impl<T: ProcessModel + ?Sized> ProcessModel for Box<T> {
    fn spectral(&self) -> &SpectralData {
        (**self).spectral()
    }
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn drift(&self, x: &[f64]) -> Vec<f64> {
        (**self).drift(x)
    }
    fn sigma2(&self, x: &[f64]) -> f64 {
        (**self).sigma2(x)
    }
    fn transition(&self, x: &[f64], rng: &mut RandomStream) -> Result<Vec<f64>> {
        (**self).transition(x, rng)
    }
    fn sample_noise(&self, x: &[f64], rng: &mut RandomStream) -> Result<Vec<f64>> {
        (**self).sample_noise(x, rng)
    }
    fn sample_noise_batch(&self, x: &[f64], n: usize, rng: &mut RandomStream) -> Result<Vec<Vec<f64>>> {
        (**self).sample_noise_batch(x, n, rng)
    }
    fn conditional_mean(&self, x: &[f64]) -> Vec<f64> {
        (**self).conditional_mean(x)
    }
    fn is_absorbing(&self, x: &[f64]) -> bool {
        (**self).is_absorbing(x)
    }
    fn moment_delta(&self) -> f64 {
        (**self).moment_delta()
    }
    fn moment_const(&self) -> f64 {
        (**self).moment_const()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum StopReason {
    Absorbed,
    HitUpper,
    HorizonExhausted,
}

impl StopReason {
    pub fn as_str(self) -> &'static str {
        match self {
            StopReason::Absorbed => "Absorbed",
            StopReason::HitUpper => "HitUpper",
            StopReason::HorizonExhausted => "HorizonExhausted",
        }
    }
}

/// Stop when `ℓX ≥ upper_level` (divergence surrogate), on absorption, or after `horizon` steps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StopRule {
    pub horizon: u64,
    pub upper_level: f64,
}

impl StopRule {
    pub fn new(horizon: u64, upper_level: f64) -> Result<Self> {
        if horizon < 1 {
            return Err(invalid("horizon must be at least 1"));
        }
        if !(upper_level > 0.0) {
            return Err(invalid(format!("upper_level must be positive, got {upper_level}")));
        }
        Ok(Self { horizon, upper_level })
    }

    /// Horizon 10⁶ and `U = 10⁶ · max(1, ℓx₀)`.
    pub fn default_for(x0: &[f64], s: &SpectralData) -> Self {
        Self { horizon: DEFAULT_HORIZON, upper_level: 1e6 * s.ell_dot(x0).max(1.0) }
    }
}

/// A realized path with its per-step `ℓX_n` and `‖X̌_n‖₁ / ‖X_n‖₁`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub states: Vec<Vec<f64>>,
    pub ell_x: Vec<f64>,
    pub check_ratio: Vec<f64>,
    pub stop_reason: StopReason,
}

/// What an ensemble keeps from a path.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSummary {
    pub steps: u64,
    pub stop_reason: StopReason,
    pub final_state: Vec<f64>,
    /// `‖X̌‖₁/‖X‖₁` at the step where the upper level was hit.
    pub crossing_ratio: Option<f64>,
}

/// Validated single step.
pub fn step<M: ProcessModel + ?Sized>(model: &M, x: &[f64], rng: &mut RandomStream) -> Result<Vec<f64>> {
    check_state(model, x)?;
    let next = model.transition(x, rng)?;
    guard(&next)?;
    Ok(next)
}

pub(crate) fn guard(x: &[f64]) -> Result<()> {
    match x.iter().find(|v| !(v.abs() <= OVERFLOW_GUARD)) {
        Some(v) => Err(Error::NumericOverflow { value: *v, guard: OVERFLOW_GUARD }),
        None => Ok(()),
    }
}

fn check_state<M: ProcessModel + ?Sized>(model: &M, x: &[f64]) -> Result<()> {
    if x.len() != model.dim() {
        return Err(Error::DimensionMismatch { expected: model.dim(), found: x.len() });
    }
    if let Some(v) = x.iter().find(|v| !(**v >= 0.0)) {
        return Err(invalid(format!("state component {v} is not non-negative")));
    }
    guard(x)
}

/// Runs one path from `x0`, calling `observe` on every visited state
/// (including `x0`).
pub fn run_path<M: ProcessModel + ?Sized>(
    model: &M,
    x0: &[f64],
    stop: &StopRule,
    rng: &mut RandomStream,
    mut observe: impl FnMut(&[f64]),
) -> Result<PathSummary> {
    check_state(model, x0)?;
    let s = model.spectral();
    let mut x = x0.to_vec();
    let mut steps = 0u64;
    observe(&x);
    let stop_reason = loop {
        if model.is_absorbing(&x) {
            break StopReason::Absorbed;
        }
        if s.ell_dot(&x) >= stop.upper_level {
            break StopReason::HitUpper;
        }
        if steps >= stop.horizon {
            break StopReason::HorizonExhausted;
        }
        x = step(model, &x, rng)?;
        steps += 1;
        observe(&x);
    };
    let crossing_ratio = (stop_reason == StopReason::HitUpper).then(|| check_ratio(&x, s));
    Ok(PathSummary { steps, stop_reason, final_state: x, crossing_ratio })
}

/// Full trajectory, deterministic in `(model, x0, stop, seed)`.
pub fn simulate<M: ProcessModel + ?Sized>(model: &M, x0: &[f64], stop: &StopRule, seed: u64) -> Result<Trajectory> {
    let mut rng = RandomStream::new(seed, 0);
    let s = model.spectral();
    let mut states = Vec::new();
    let mut ell_x = Vec::new();
    let mut ratios = Vec::new();
    let summary = run_path(model, x0, stop, &mut rng, |x| {
        states.push(x.to_vec());
        ell_x.push(s.ell_dot(x));
        ratios.push(check_ratio(x, s));
    })?;
    Ok(Trajectory { states, ell_x, check_ratio: ratios, stop_reason: summary.stop_reason })
}

/// A sample mean together with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub value: f64,
    pub se: f64,
}

impl Estimate {
    pub fn from_samples(samples: &[f64]) -> Self {
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let var = samples.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
        Self { value: mean, se: (var / n).sqrt() }
    }

    /// `|value − target|` in units of standard error (0 when both vanish).
    pub fn z_score(&self, target: f64) -> f64 {
        let diff = (self.value - target).abs();
        if diff == 0.0 {
            0.0
        } else {
            diff / self.se
        }
    }
}

/// Empirical conditional moments of `ξ` at a fixed state.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentEstimates {
    pub n_samples: usize,
    pub p: f64,
    pub mean_vec: Vec<Estimate>,
    /// `E[ℓξ]`.
    pub mean_ell_xi: Estimate,
    /// `E[(ℓξ)²]`, to be compared with `σ²(x)`.
    pub var_of_ell_xi: Estimate,
    /// `E[‖ξ‖₁^p]`.
    pub abs_p_moment_of_norm: Estimate,
}

pub fn noise_probe<M: ProcessModel + ?Sized>(
    model: &M,
    x: &[f64],
    n_samples: usize,
    p: f64,
    seed: u64,
) -> Result<MomentEstimates> {
    if n_samples < 100 {
        return Err(invalid(format!("noise_probe needs at least 100 samples, got {n_samples}")));
    }
    check_state(model, x)?;
    let s = model.spectral();
    let d = model.dim();
    let mut rng = RandomStream::new(seed, 0);
    let mut comps = vec![Vec::with_capacity(n_samples); d];
    let mut ell = Vec::with_capacity(n_samples);
    let mut ell_sq = Vec::with_capacity(n_samples);
    let mut norm_p = Vec::with_capacity(n_samples);
    for xi in model.sample_noise_batch(x, n_samples, &mut rng)? {
        for (c, v) in comps.iter_mut().zip(&xi) {
            c.push(*v);
        }
        let e = s.ell_dot(&xi);
        ell.push(e);
        ell_sq.push(e * e);
        norm_p.push(norm1(&xi).powf(p));
    }
    Ok(MomentEstimates {
        n_samples,
        p,
        mean_vec: comps.iter().map(|c| Estimate::from_samples(c)).collect(),
        mean_ell_xi: Estimate::from_samples(&ell),
        var_of_ell_xi: Estimate::from_samples(&ell_sq),
        abs_p_moment_of_norm: Estimate::from_samples(&norm_p),
    })
}
