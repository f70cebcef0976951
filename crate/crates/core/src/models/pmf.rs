//! Truncated probability mass functions for exact moment evaluation.

/// Mass function on `start..start + probs.len()`. Mass outside the window is
/// below 1e-20 relative to the mode and dropped.
#[derive(Debug, Clone)]
pub(crate) struct WindowPmf {
    start: u64,
    /// `survival[i] = P(X ≥ start + i)`.
    survival: Vec<f64>,
}

const CUTOFF: f64 = 1e-20;

impl WindowPmf {
    pub fn point(at: u64) -> Self {
        Self { start: at, survival: vec![1.0] }
    }

    pub fn poisson(lambda: f64) -> Self {
        if lambda <= 0.0 {
            return Self::point(0);
        }
        let mode = lambda.floor() as u64;
        Self::from_ratios(
            mode,
            |k| lambda / (k + 1) as f64,
            |k| k as f64 / lambda,
            None,
        )
    }

    pub fn binomial(n: u64, p: f64) -> Self {
        if n == 0 || p <= 0.0 {
            return Self::point(0);
        }
        if p >= 1.0 {
            return Self::point(n);
        }
        let odds = p / (1.0 - p);
        let mode = (((n + 1) as f64 * p).floor() as u64).min(n);
        Self::from_ratios(
            mode,
            |k| (n - k) as f64 / (k + 1) as f64 * odds,
            |k| k as f64 / (n - k + 1) as f64 / odds,
            Some(n),
        )
    }

    /// Builds weights outward from the mode using `w(k+1)/w(k) = up(k)` and
    /// `w(k−1)/w(k) = down(k)`.
    fn from_ratios(mode: u64, up: impl Fn(u64) -> f64, down: impl Fn(u64) -> f64, max: Option<u64>) -> Self {
        let mut upper = vec![1.0];
        let mut k = mode;
        let mut w = 1.0;
        while max.is_none_or(|m| k < m) {
            w *= up(k);
            k += 1;
            if w < CUTOFF {
                break;
            }
            upper.push(w);
        }
        let mut lower = Vec::new();
        let mut k = mode;
        let mut w = 1.0;
        while k > 0 {
            w *= down(k);
            k -= 1;
            if w < CUTOFF {
                break;
            }
            lower.push(w);
        }
        let start = mode - lower.len() as u64;
        let mut probs: Vec<f64> = lower.into_iter().rev().chain(upper).collect();
        let total: f64 = probs.iter().sum();
        probs.iter_mut().for_each(|p| *p /= total);
        let mut survival = vec![0.0; probs.len()];
        let mut acc = 0.0;
        for i in (0..probs.len()).rev() {
            acc += probs[i];
            survival[i] = acc;
        }
        Self { start, survival }
    }

    pub fn start(&self) -> u64 {
        self.start
    }

    /// Largest value carrying mass.
    pub fn end(&self) -> u64 {
        self.start + self.survival.len() as u64 - 1
    }

    /// `P(X ≥ k)`.
    pub fn survival(&self, k: u64) -> f64 {
        if k <= self.start {
            1.0
        } else {
            self.survival.get((k - self.start) as usize).copied().unwrap_or(0.0)
        }
    }
}

/// Mean and variance of `min(A, r·B)` for independent `A`, `B`.
pub(crate) fn min_moments(a: &WindowPmf, b: &WindowPmf, r: u64) -> (f64, f64) {
    // P(min ≥ c) = 1 below both windows; accumulate tail sums above c.
    let c = a.start().min(r * b.start());
    let hi = a.end().min(r * b.end());
    let mut first = 0.0;
    let mut second = 0.0;
    for k in c + 1..=hi {
        let tail = a.survival(k) * b.survival(k.div_ceil(r));
        let j = (k - c) as f64;
        first += tail;
        second += (2.0 * j - 1.0) * tail;
    }
    (c as f64 + first, (second - first * first).max(0.0))
}
