//! Numerical recurrence/transience classification.
//!
//! The recurrence test checks `ℓx·ℓg(x) ≤ (1−ε)/2·σ²(x)` and the transience
//! test checks `ℓx·ℓg(x) ≥ (1+ε)/2·σ²(x)`, each over the grid states inside
//! its region near the ray `{λr}`. In one dimension both reduce to comparing
//! `x·g(x)` against `σ²(x)`. The asymptotic side conditions are finite-grid
//! audits: they can flag a violation but never prove a condition.

use serde::Serialize;

use crate::engine::{noise_probe, ProcessModel};
use crate::error::{invalid, Error, Result};
use crate::spectral::{decompose, norm1, SpectralData};

/// Parameters of a classification run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriterionConfig {
    /// Smallest ε accepted as a witness.
    pub epsilon: f64,
    /// Region parameter `a` in `‖x̌‖² ≤ a‖x‖‖g(x)‖` and `‖x̌‖² ≤ aσ²(x)`.
    pub region_a: f64,
    /// Lower cutoff `‖x‖ ≥ b`.
    pub region_b: f64,
    /// δ in the moment exponent `p = 2 + δ` and the growth audit.
    pub delta: f64,
    /// Largest grid magnitude.
    pub top: f64,
    /// Band `(u, v)` on `ℓx` where σ² must stay away from zero.
    pub band: (f64, f64),
    /// Cap on `σ²(x) log^{2/δ}‖x‖ / ‖x‖²` at the top of the grid.
    pub sigma_cap: f64,
    /// Off-ray perturbation sizes `‖v‖₁ / ‖x‖₁`.
    pub offsets: Vec<f64>,
}

impl Default for CriterionConfig {
    fn default() -> Self {
        Self {
            epsilon: 1e-3,
            region_a: 1.0,
            region_b: 10.0,
            delta: 1.0,
            top: 1e8,
            band: (1.0, 100.0),
            sigma_cap: f64::INFINITY,
            offsets: vec![0.0, 1e-3, 1e-2, 1e-1],
        }
    }
}

impl CriterionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(invalid(format!("epsilon must lie in (0, 1), got {}", self.epsilon)));
        }
        if !(self.region_a > 0.0) {
            return Err(invalid(format!("region_a must be positive, got {}", self.region_a)));
        }
        if !(self.region_b > 0.0) || !(self.top >= self.region_b) || !self.top.is_finite() {
            return Err(invalid(format!("need 0 < region_b <= top < inf, got b = {}, top = {}", self.region_b, self.top)));
        }
        if !(self.delta > 0.0) {
            return Err(invalid(format!("delta must be positive, got {}", self.delta)));
        }
        let (u, v) = self.band;
        if !(u > 0.0 && v > u && v.is_finite()) {
            return Err(invalid(format!("band must satisfy 0 < u < v, got ({u}, {v})")));
        }
        if !(self.sigma_cap > 0.0) {
            return Err(invalid("sigma_cap must be positive"));
        }
        if self.offsets.iter().any(|o| !(*o >= 0.0 && *o < 1.0)) {
            return Err(invalid("offsets must lie in [0, 1)"));
        }
        Ok(())
    }

    /// Magnitudes `b·2^i ≤ top`.
    pub fn magnitudes(&self) -> Vec<f64> {
        let mut out = Vec::new();
        let mut m = self.region_b;
        while m <= self.top {
            out.push(m);
            m *= 2.0;
        }
        out
    }

    fn band_magnitudes(&self) -> Vec<f64> {
        let (u, v) = self.band;
        (1..16).map(|j| u * (v / u).powf(j as f64 / 16.0)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Verdict {
    Recurrent,
    Transient,
    Indeterminate,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Recurrent => "Recurrent",
            Verdict::Transient => "Transient",
            Verdict::Indeterminate => "Indeterminate",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Side {
    Recurrence,
    Transience,
}

/// A grid state inside a region where the inequality failed at the configured ε.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub side: Side,
    pub state: Vec<f64>,
    /// `ℓx·ℓg(x)`.
    pub lhs: f64,
    /// `(1 ∓ ε)/2·σ²(x)`.
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NearCriticalityAudit {
    pub pass: bool,
    pub max_ratio: f64,
    /// Largest `‖g(x)‖/‖x‖` per decade of `‖x‖`, lowest decade first.
    pub decade_ratios: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentAudit {
    pub pass: bool,
    pub p: f64,
    /// Largest `E‖ξ‖^p / σ^p(x)` over audited states.
    pub max_ratio: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Audits {
    pub near_criticality: NearCriticalityAudit,
    /// Present only when noise samples were available.
    pub moment: Option<MomentAudit>,
    pub sigma_growth: bool,
    pub sigma_positive: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriterionVerdict {
    pub verdict: Verdict,
    /// Largest ε (within `[epsilon, 1)`) for which the winning inequality held grid-wide.
    pub witness_epsilon: Option<f64>,
    pub violations: Vec<Violation>,
    pub audits: Audits,
    pub grid_size: usize,
}

/// One evaluated grid state.
#[derive(Debug, Clone)]
struct Point {
    state: Vec<f64>,
    norm: f64,
    lhs: f64,
    sigma2: f64,
    in_recurrence: bool,
    in_transience: bool,
}

/// `‖x̌‖₁² ≤ a‖x‖₁‖g(x)‖₁`.
pub fn in_recurrence_region(x: &[f64], g_of_x: &[f64], s: &SpectralData, a: f64) -> Result<bool> {
    let check = norm1(&decompose(x, s)?.check);
    Ok(check * check <= a * norm1(x) * norm1(g_of_x))
}

/// `‖x̌‖₁² ≤ a σ²(x)`.
pub fn in_transience_region(x: &[f64], sigma2_of_x: f64, s: &SpectralData, a: f64) -> Result<bool> {
    let check = norm1(&decompose(x, s)?.check);
    Ok(check * check <= a * sigma2_of_x)
}

/// Grid states: `t·r + v` with `ℓx = t ∈ magnitudes`, `ℓv = 0`, and
/// `‖v‖₁ = offset·t‖r‖₁`, projected onto the orthant. States with `‖x‖₁ < b`
/// or `ℓx = 0` are dropped.
pub fn ray_grid(s: &SpectralData, magnitudes: &[f64], offsets: &[f64], b: f64) -> Vec<Vec<f64>> {
    let d = s.dim();
    let r = s.right();
    let r_norm = norm1(r);
    // Directions eᵢ − ℓᵢ r satisfy ℓv = 0; both signs are used.
    let mut directions: Vec<Vec<f64>> = Vec::new();
    for i in 0..d {
        let v: Vec<f64> = (0..d).map(|k| if k == i { 1.0 } else { 0.0 } - s.left()[i] * r[k]).collect();
        let n = norm1(&v);
        if n > 1e-12 {
            let unit: Vec<f64> = v.iter().map(|c| c / n).collect();
            directions.push(unit.iter().map(|c| -c).collect());
            directions.push(unit);
        }
    }
    let mut grid = Vec::new();
    for &t in magnitudes {
        let base: Vec<f64> = r.iter().map(|ri| t * ri).collect();
        let mut push = |x: Vec<f64>| {
            if norm1(&x) >= b && s.ell_dot(&x) > 0.0 && !grid.contains(&x) {
                grid.push(x);
            }
        };
        push(base.clone());
        for &off in offsets.iter().filter(|o| **o > 0.0) {
            for dir in &directions {
                push(base.iter().zip(dir).map(|(x, v)| (x + off * t * r_norm * v).max(0.0)).collect());
            }
        }
    }
    grid
}

/// Classifies a univariate model from `g` and `σ²`.
pub fn classify_univariate(
    g: impl Fn(f64) -> f64,
    sigma2: impl Fn(f64) -> f64,
    cfg: &CriterionConfig,
) -> Result<CriterionVerdict> {
    cfg.validate()?;
    let points: Vec<Point> = cfg
        .magnitudes()
        .into_iter()
        .map(|x| Point {
            state: vec![x],
            norm: x,
            lhs: x * g(x),
            sigma2: sigma2(x),
            in_recurrence: true,
            in_transience: true,
        })
        .collect();
    let band_min = cfg.band_magnitudes().into_iter().map(&sigma2).fold(f64::INFINITY, f64::min);
    let near = near_criticality(points.iter().map(|p| (p.norm, g(p.norm).max(0.0))));
    Ok(decide(points, band_min, near, cfg))
}

/// Classifies a multivariate model with `g ≥ 0` from `g`, `σ²` and the spectral data of `M`.
pub fn classify_multivariate(
    g: impl Fn(&[f64]) -> Vec<f64>,
    sigma2: impl Fn(&[f64]) -> f64,
    s: &SpectralData,
    cfg: &CriterionConfig,
) -> Result<CriterionVerdict> {
    cfg.validate()?;
    let grid = ray_grid(s, &cfg.magnitudes(), &cfg.offsets, cfg.region_b);
    let mut points = Vec::with_capacity(grid.len());
    let mut drift_norms = Vec::with_capacity(grid.len());
    for x in grid {
        let gx = g(&x);
        if gx.len() != x.len() {
            return Err(Error::DimensionMismatch { expected: x.len(), found: gx.len() });
        }
        if let Some(v) = gx.iter().find(|v| **v < 0.0) {
            return Err(Error::NegativeDrift { state: x, value: *v });
        }
        let sig = sigma2(&x);
        let norm = norm1(&x);
        drift_norms.push((norm, norm1(&gx)));
        points.push(Point {
            lhs: s.ell_dot(&x) * s.ell_dot(&gx),
            sigma2: sig,
            in_recurrence: in_recurrence_region(&x, &gx, s, cfg.region_a)?,
            in_transience: in_transience_region(&x, sig, s, cfg.region_a)?,
            norm,
            state: x,
        });
    }
    let band = ray_grid(s, &cfg.band_magnitudes(), &cfg.offsets, 0.0);
    let band_min = band.iter().map(|x| sigma2(x)).fold(f64::INFINITY, f64::min);
    let near = near_criticality(drift_norms.into_iter());
    Ok(decide(points, band_min, near, cfg))
}

/// Classifies a model through its own `g` and `σ²`, adding the noise-moment audit.
pub fn classify_model<M: ProcessModel + ?Sized>(
    model: &M,
    cfg: &CriterionConfig,
    moment_samples: usize,
    seed: u64,
) -> Result<CriterionVerdict> {
    let mut verdict = if model.dim() == 1 {
        classify_univariate(|x| model.drift(&[x])[0], |x| model.sigma2(&[x]), cfg)?
    } else {
        classify_multivariate(|x| model.drift(x), |x| model.sigma2(x), model.spectral(), cfg)?
    };
    let states: Vec<Vec<f64>> = [1e2, 1e3, 1e4]
        .iter()
        .map(|t| model.spectral().right().iter().map(|r| (t * r).round()).collect())
        .collect();
    verdict.audits.moment = Some(audit_moments(model, &states, moment_samples, 2.0 + cfg.delta, seed)?);
    Ok(verdict)
}

fn decide(points: Vec<Point>, band_min: f64, near: NearCriticalityAudit, cfg: &CriterionConfig) -> CriterionVerdict {
    let recurrence_holds = |eps: f64| {
        points.iter().filter(|p| p.in_recurrence).all(|p| p.lhs <= (1.0 - eps) / 2.0 * p.sigma2)
    };
    let transience_holds = |eps: f64| {
        points.iter().filter(|p| p.in_transience).all(|p| p.lhs >= (1.0 + eps) / 2.0 * p.sigma2)
    };
    let sigma_growth = audit_sigma_growth(points.iter().map(|p| (p.norm, p.sigma2)), cfg);
    let sigma_positive = band_min > 0.0;
    let audits = Audits { near_criticality: near, moment: None, sigma_growth, sigma_positive };
    let grid_size = points.len();

    if recurrence_holds(cfg.epsilon) {
        return CriterionVerdict {
            verdict: Verdict::Recurrent,
            witness_epsilon: Some(largest_witness(cfg.epsilon, recurrence_holds)),
            violations: Vec::new(),
            audits,
            grid_size,
        };
    }
    if transience_holds(cfg.epsilon) && sigma_growth && sigma_positive {
        return CriterionVerdict {
            verdict: Verdict::Transient,
            witness_epsilon: Some(largest_witness(cfg.epsilon, transience_holds)),
            violations: Vec::new(),
            audits,
            grid_size,
        };
    }

    let eps = cfg.epsilon;
    let mut violations = Vec::new();
    for p in &points {
        let rec_rhs = (1.0 - eps) / 2.0 * p.sigma2;
        if p.in_recurrence && p.lhs > rec_rhs {
            violations.push(Violation { side: Side::Recurrence, state: p.state.clone(), lhs: p.lhs, rhs: rec_rhs });
        }
        let tr_rhs = (1.0 + eps) / 2.0 * p.sigma2;
        if p.in_transience && p.lhs < tr_rhs {
            violations.push(Violation { side: Side::Transience, state: p.state.clone(), lhs: p.lhs, rhs: tr_rhs });
        }
    }
    CriterionVerdict { verdict: Verdict::Indeterminate, witness_epsilon: None, violations, audits, grid_size }
}

/// Bisection for the largest ε in `[lo, 1)` with `holds(ε)`, given `holds(lo)`.
fn largest_witness(lo: f64, holds: impl Fn(f64) -> bool) -> f64 {
    let (mut lo, mut hi) = (lo, 1.0);
    for _ in 0..64 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if holds(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Largest value per decade of `norm`, in increasing decade order.
fn decade_maxima(values: impl Iterator<Item = (f64, f64)>) -> Vec<f64> {
    let mut by_decade: Vec<(i32, f64)> = Vec::new();
    for (norm, v) in values {
        let decade = norm.log10().floor() as i32;
        match by_decade.iter_mut().find(|(d, _)| *d == decade) {
            Some((_, m)) => *m = m.max(v),
            None => by_decade.push((decade, v)),
        }
    }
    by_decade.sort_by_key(|(d, _)| *d);
    by_decade.into_iter().map(|(_, m)| m).collect()
}

fn non_increasing(seq: &[f64]) -> bool {
    seq.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-9) + 1e-300)
}

/// Finite-grid proxy for `‖g(x)‖ = o(‖x‖)`: the per-decade maxima of
/// `‖g(x)‖/‖x‖` are non-increasing over at least three decades and the last
/// one is at most 0.1.
pub fn audit_near_criticality(g: impl Fn(&[f64]) -> Vec<f64>, grid: &[Vec<f64>]) -> NearCriticalityAudit {
    near_criticality(grid.iter().map(|x| (norm1(x), norm1(&g(x)))))
}

fn near_criticality(pairs: impl Iterator<Item = (f64, f64)>) -> NearCriticalityAudit {
    let decade_ratios = decade_maxima(pairs.filter(|(n, _)| *n > 0.0).map(|(n, gn)| (n, gn / n)));
    let max_ratio = decade_ratios.iter().cloned().fold(0.0, f64::max);
    let pass = decade_ratios.len() >= 3
        && non_increasing(&decade_ratios)
        && decade_ratios.last().is_some_and(|r| *r <= 0.1);
    NearCriticalityAudit { pass, max_ratio, decade_ratios }
}

/// Finite-grid proxy for `σ²(x) = O(‖x‖² log^{−2/δ}‖x‖)`: per-decade maxima
/// of `σ²(x) log^{2/δ}‖x‖ / ‖x‖²` are non-increasing beyond `e^{2/δ}` (where
/// this profile peaks for linear σ²) and the last is at most the cap.
fn audit_sigma_growth(pairs: impl Iterator<Item = (f64, f64)>, cfg: &CriterionConfig) -> bool {
    let start = (2.0 / cfg.delta).exp().max(1.0);
    let profile = decade_maxima(
        pairs.filter(|(n, _)| *n > start).map(|(n, s2)| (n, s2 * n.ln().powf(2.0 / cfg.delta) / (n * n))),
    );
    non_increasing(&profile) && profile.last().is_none_or(|v| *v <= cfg.sigma_cap)
}

/// Audit of `E‖ξ‖^p ≤ c σ^p(x)` at the given states, with `c = model.moment_const()`.
pub fn audit_moments<M: ProcessModel + ?Sized>(
    model: &M,
    states: &[Vec<f64>],
    n_samples: usize,
    p: f64,
    seed: u64,
) -> Result<MomentAudit> {
    let mut max_ratio: f64 = 0.0;
    for (i, x) in states.iter().enumerate() {
        let sigma2 = model.sigma2(x);
        if sigma2 <= 0.0 {
            continue;
        }
        let est = noise_probe(model, x, n_samples, p, seed.wrapping_add(i as u64))?;
        max_ratio = max_ratio.max(est.abs_p_moment_of_norm.value / sigma2.powf(p / 2.0));
    }
    let bound = model.moment_const();
    Ok(MomentAudit { pass: max_ratio <= bound, p, max_ratio, bound })
}

/// Normalized drift `h` and variance `τ²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Normalized {
    /// `ℓg/ℓx` (`g/x` in one dimension).
    pub h: f64,
    /// `σ²/(ℓx)²`.
    pub tau2: f64,
}

impl Normalized {
    /// `h / (τ²/2)`; below 1 points to recurrence, above 1 to transience.
    pub fn ratio(&self) -> f64 {
        self.h / (self.tau2 / 2.0)
    }
}

pub fn normalized_diagnostics(g_of_x: &[f64], sigma2_of_x: f64, x: &[f64], s: &SpectralData) -> Result<Normalized> {
    let w = s.ell_dot(x);
    if !(w > 0.0) {
        return Err(invalid("normalized diagnostics need ℓx > 0"));
    }
    Ok(Normalized { h: s.ell_dot(g_of_x) / w, tau2: sigma2_of_x / (w * w) })
}
