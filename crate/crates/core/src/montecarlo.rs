//! Ensembles of independent trajectories, phase sweeps and direction statistics.
//!
//! Trajectory `i` always draws from stream `(master_seed, i)` and results are
//! reduced in index order.

use std::io::{self, Write};

use rayon::prelude::*;
use serde::Serialize;

use crate::engine::{run_path, Estimate, PathSummary, ProcessModel, StopReason, StopRule};
use crate::error::{invalid, Error, Result};
use crate::rng::{RandomStream, DIAGNOSTIC_STREAM};
use crate::spectral::{check_ratio, SpectralData};

/// Two-sided 95% normal quantile.
const Z95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnsembleConfig {
    pub n_traj: u64,
    pub master_seed: u64,
    pub stop: StopRule,
    pub x0: Vec<f64>,
    /// Fit `γ̂` from noise samples alongside the ensemble.
    pub estimate_gamma: bool,
}

impl EnsembleConfig {
    pub fn new(n_traj: u64, master_seed: u64, stop: StopRule, x0: Vec<f64>) -> Self {
        Self { n_traj, master_seed, stop, x0, estimate_gamma: true }
    }
}

/// A frequency with its Wilson 95% interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Frequency {
    pub count: u64,
    pub freq: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
}

impl Frequency {
    pub fn wilson(count: u64, n: u64) -> Self {
        if n == 0 {
            return Self { count, freq: 0.0, ci_lo: 0.0, ci_hi: 1.0 };
        }
        let nf = n as f64;
        let p = count as f64 / nf;
        let z2 = Z95 * Z95;
        let denom = 1.0 + z2 / nf;
        let center = (p + z2 / (2.0 * nf)) / denom;
        let half = Z95 / denom * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt();
        Self { count, freq: p, ci_lo: (center - half).max(0.0).min(p), ci_hi: (center + half).min(1.0).max(p) }
    }
}

/// Quantiles of `‖X̌‖₁/‖X‖₁` at the upper-level crossing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DirectionStats {
    pub n: usize,
    pub median: f64,
    pub p90: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnsembleReport {
    pub n_traj: u64,
    pub extinction: Frequency,
    pub divergence: Frequency,
    pub horizon_exhausted: Frequency,
    pub direction_stats: Option<DirectionStats>,
    /// Slope of `E[(ℓξ)² | x]` against `ℓx`.
    pub gamma_hat: Option<f64>,
    pub mean_steps: f64,
    pub master_seed: u64,
    pub x0: Vec<f64>,
    pub stop: StopRule,
}

/// Runs `cfg.n_traj` trajectories on a pool of `threads` workers.
pub fn run_ensemble<M: ProcessModel + ?Sized>(model: &M, cfg: &EnsembleConfig, threads: usize) -> Result<EnsembleReport> {
    let paths = run_paths(model, cfg, threads)?;
    let gamma_hat = if cfg.estimate_gamma { estimate_gamma(model, cfg.master_seed)? } else { None };
    Ok(summarize(model.spectral(), cfg, &paths, gamma_hat))
}

/// Per-trajectory summaries in index order.
pub fn run_paths<M: ProcessModel + ?Sized>(model: &M, cfg: &EnsembleConfig, threads: usize) -> Result<Vec<PathSummary>> {
    if cfg.n_traj < 1 {
        return Err(invalid("n_traj must be at least 1"));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| invalid(format!("thread pool: {e}")))?;
    pool.install(|| {
        (0..cfg.n_traj)
            .into_par_iter()
            .map(|i| {
                let mut rng = RandomStream::new(cfg.master_seed, i);
                run_path(model, &cfg.x0, &cfg.stop, &mut rng, |_| {})
            })
            .collect()
    })
}

fn summarize(s: &SpectralData, cfg: &EnsembleConfig, paths: &[PathSummary], gamma_hat: Option<f64>) -> EnsembleReport {
    let n = paths.len() as u64;
    let count = |reason| paths.iter().filter(|p| p.stop_reason == reason).count() as u64;
    let mean_steps = paths.iter().map(|p| p.steps as f64).sum::<f64>() / n as f64;
    EnsembleReport {
        n_traj: n,
        extinction: Frequency::wilson(count(StopReason::Absorbed), n),
        divergence: Frequency::wilson(count(StopReason::HitUpper), n),
        horizon_exhausted: Frequency::wilson(count(StopReason::HorizonExhausted), n),
        direction_stats: direction_of_divergence(paths, s).ok(),
        gamma_hat,
        mean_steps,
        master_seed: cfg.master_seed,
        x0: cfg.x0.clone(),
        stop: cfg.stop,
    }
}

/// Quantiles (50%, 90%, max) of `‖X̌‖₁/‖X‖₁` at the crossing step over the
/// trajectories that hit the upper level.
pub fn direction_of_divergence(paths: &[PathSummary], s: &SpectralData) -> Result<DirectionStats> {
    let mut ratios: Vec<f64> = paths
        .iter()
        .filter(|p| p.stop_reason == StopReason::HitUpper)
        .map(|p| check_ratio(&p.final_state, s))
        .collect();
    if ratios.is_empty() {
        return Err(Error::NoDivergentTrajectories);
    }
    ratios.sort_by(f64::total_cmp);
    Ok(DirectionStats {
        n: ratios.len(),
        median: quantile(&ratios, 0.5),
        p90: quantile(&ratios, 0.9),
        max: *ratios.last().unwrap(),
    })
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Regression through the origin of `E[(ℓξ)² | x]` on `ℓx` at `x ≈ t·r`,
/// `t ∈ {10², 10³, 10⁴}`.
pub fn estimate_gamma<M: ProcessModel + ?Sized>(model: &M, master_seed: u64) -> Result<Option<f64>> {
    const SAMPLES: usize = 2_000;
    let s = model.spectral();
    let mut rng = RandomStream::new(master_seed, DIAGNOSTIC_STREAM);
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for t in [1e2, 1e3, 1e4] {
        let x: Vec<f64> = s.right().iter().map(|r| (t * r).round()).collect();
        if model.is_absorbing(&x) {
            continue;
        }
        let second: f64 = model
            .sample_noise_batch(&x, SAMPLES, &mut rng)?
            .iter()
            .map(|xi| s.ell_dot(xi).powi(2))
            .sum();
        let w = s.ell_dot(&x);
        sxy += w * second / SAMPLES as f64;
        sxx += w * w;
    }
    Ok((sxx > 0.0).then(|| sxy / sxx))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub param_value: f64,
    pub report: EnsembleReport,
}

/// One ensemble per parameter value. `build` maps a value to a model.
pub fn phase_sweep<M, F>(build: F, values: &[f64], cfg: &EnsembleConfig, threads: usize) -> Result<Vec<SweepRow>>
where
    M: ProcessModel,
    F: Fn(f64) -> Result<M>,
{
    if let Some(v) = values.iter().find(|v| !v.is_finite()) {
        return Err(invalid(format!("sweep value {v} is not finite")));
    }
    values
        .iter()
        .map(|&v| Ok(SweepRow { param_value: v, report: run_ensemble(&build(v)?, cfg, threads)? }))
        .collect()
}

pub const SWEEP_COLUMNS: &str = "param_value,n_traj,extinct,diverged,exhausted,ext_freq,ext_ci_lo,ext_ci_hi,div_freq,div_ci_lo,div_ci_hi,median_check_ratio";

pub fn write_sweep_csv(out: &mut impl Write, rows: &[SweepRow]) -> io::Result<()> {
    writeln!(out, "{SWEEP_COLUMNS}")?;
    for row in rows {
        let r = &row.report;
        let median = r.direction_stats.map(|d| d.median.to_string()).unwrap_or_else(|| "NA".into());
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            row.param_value,
            r.n_traj,
            r.extinction.count,
            r.divergence.count,
            r.horizon_exhausted.count,
            r.extinction.freq,
            r.extinction.ci_lo,
            r.extinction.ci_hi,
            r.divergence.freq,
            r.divergence.ci_lo,
            r.divergence.ci_hi,
            median
        )?;
    }
    Ok(())
}

/// Mean of `|N|` over `n` standard normal draws from the harness sampler.
pub fn abs_normal_mean(n: usize, seed: u64) -> Estimate {
    use rand::Rng;
    use rand_distr::StandardNormal;
    let mut rng = RandomStream::new(seed, 0);
    let samples: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal).abs()).collect();
    Estimate::from_samples(&samples)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wilson_interval_contains_estimate() {
        for (k, n) in [(0, 10), (10, 10), (3, 7), (480, 500), (1, 1000)] {
            let f = Frequency::wilson(k, n);
            assert!(f.ci_lo <= f.freq && f.freq <= f.ci_hi, "{f:?}");
            assert!(f.ci_lo >= 0.0 && f.ci_hi <= 1.0);
        }
        // Reference value: k = 3, n = 7 gives (0.1582, 0.7495).
        let f = Frequency::wilson(3, 7);
        assert!((f.ci_lo - 0.1582).abs() < 1e-4 && (f.ci_hi - 0.7495).abs() < 1e-4, "{f:?}");
    }

    #[test]
    fn quantiles() {
        let v = [0.0, 1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile(&v, 0.5), 2.0);
        assert_eq!(quantile(&v, 0.9), 3.6);
        assert_eq!(quantile(&[7.0], 0.9), 7.0);
    }
}
