//! Population-size-dependent multitype Galton-Watson process.
//!
//! A type-`j` parent has independent Poisson numbers of children of each type
//! `k` with means `E_x[k, j]`, where
//!
//! ```text
//! E_x = M + β / (ℓx)^q · r ℓ
//! ```
//!
//! The rank-one perturbation along `(r, ℓ)` gives `g(x) = β (ℓx)^{1−q} r ≥ 0`.

use rand_distr::{Distribution, Poisson};
use serde::Serialize;

use crate::engine::{ProcessModel, OVERFLOW_GUARD};
use crate::error::{invalid, Error, Result};
use crate::rng::RandomStream;
use crate::spectral::{assert_critical, SpectralData, TOL_CRIT};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MultitypeModel {
    spectral: SpectralData,
    beta: f64,
    q: f64,
}

impl MultitypeModel {
    /// `spectral` must be critical; `β ≥ 0`, `q > 0`.
    pub fn new(spectral: SpectralData, beta: f64, q: f64) -> Result<Self> {
        assert_critical(&spectral, TOL_CRIT)?;
        if !(beta >= 0.0) || !beta.is_finite() {
            return Err(invalid(format!("beta must be a non-negative real, got {beta}")));
        }
        if !(q > 0.0) || !q.is_finite() {
            return Err(invalid(format!("q must be positive, got {q}")));
        }
        Ok(Self { spectral, beta, q })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    fn perturbation(&self, ell_x: f64) -> f64 {
        if ell_x > 0.0 {
            self.beta / ell_x.powf(self.q)
        } else {
            0.0
        }
    }

    /// `E_x`, row `k` column `j` = mean number of type-`k` children of a type-`j` parent.
    pub fn mean_matrix(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let m = self.spectral.matrix();
        let eps = self.perturbation(self.spectral.ell_dot(x));
        let (l, r) = (self.spectral.left(), self.spectral.right());
        (0..m.dim()).map(|k| (0..m.dim()).map(|j| m.get(k, j) + eps * r[k] * l[j]).collect()).collect()
    }

    /// `E_x x = Mx + β (ℓx)^{1−q} r`.
    pub fn expected_next(&self, x: &[f64]) -> Vec<f64> {
        let mx = self.spectral.matrix().mul_vec(x);
        mx.iter().zip(self.drift_vec(x)).map(|(a, b)| a + b).collect()
    }

    fn drift_vec(&self, x: &[f64]) -> Vec<f64> {
        let ell_x = self.spectral.ell_dot(x);
        let scale = self.perturbation(ell_x) * ell_x;
        self.spectral.right().iter().map(|r| scale * r).collect()
    }

    /// Diagonal of `Γ_x = Σⱼ Cov_x(ζ_j) xⱼ`, which is itself diagonal.
    pub fn gamma_diagonal(&self, x: &[f64]) -> Vec<f64> {
        self.expected_next(x)
    }

    pub fn trace_gamma(&self, x: &[f64]) -> f64 {
        self.gamma_diagonal(x).iter().sum()
    }

    /// The uniform constant in `trace Γ_x ≤ c·ℓΓ_xℓᵀ` available for this family.
    pub fn trace_bound(&self) -> f64 {
        let min_l = self.spectral.left().iter().cloned().fold(f64::INFINITY, f64::min);
        1.0 / (min_l * min_l)
    }
}

impl ProcessModel for MultitypeModel {
    fn spectral(&self) -> &SpectralData {
        &self.spectral
    }

    fn drift(&self, x: &[f64]) -> Vec<f64> {
        self.drift_vec(x)
    }

    /// `ℓΓ_xℓᵀ = Σ_k ℓ_k² (E_x x)_k`.
    fn sigma2(&self, x: &[f64]) -> f64 {
        self.gamma_diagonal(x).iter().zip(self.spectral.left()).map(|(g, l)| g * l * l).sum()
    }

    fn conditional_mean(&self, x: &[f64]) -> Vec<f64> {
        self.expected_next(x)
    }

    /// Children of type `k` summed over all parents are Poisson with mean `(E_x x)_k`,
    /// independently across `k`.
    fn transition(&self, x: &[f64], rng: &mut RandomStream) -> Result<Vec<f64>> {
        self.expected_next(x)
            .into_iter()
            .map(|mean| {
                if mean > OVERFLOW_GUARD {
                    return Err(Error::NumericOverflow { value: mean, guard: OVERFLOW_GUARD });
                }
                Ok(if mean > 0.0 { Poisson::new(mean).expect("finite positive rate").sample(rng) } else { 0.0 })
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{perron_frobenius, NonNegativeMatrix, TOL_EIG};

    fn half() -> SpectralData {
        let m = NonNegativeMatrix::from_rows(&[vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap();
        perron_frobenius(&m, TOL_EIG).unwrap()
    }

    #[test]
    fn drift_examples() {
        let m = MultitypeModel::new(half(), 0.0, 1.0).unwrap();
        assert_eq!(m.drift(&[3.0, 1.0]), vec![0.0, 0.0]);

        let m = MultitypeModel::new(half(), 0.5, 1.0).unwrap();
        for x in [[1.0, 0.0], [3.0, 7.0], [1e6, 2.0]] {
            let g = m.drift(&x);
            assert!(g.iter().all(|v| (v - 0.5).abs() < 1e-12), "{g:?}");
        }

        let m = MultitypeModel::new(half(), 0.25, 1.0).unwrap();
        let g = m.drift(&[3.0, 1.0]);
        assert!(g.iter().all(|v| (v - 0.25).abs() < 1e-15));
        assert_eq!(m.drift(&[0.0, 0.0]), vec![0.0, 0.0]);
    }

    #[test]
    fn drift_matches_mean_matrix() {
        let m = MultitypeModel::new(half(), 0.3, 0.5).unwrap();
        let x = [4.0, 9.0];
        let ex = m.mean_matrix(&x);
        let via_matrix: Vec<f64> = ex.iter().map(|row| row[0] * x[0] + row[1] * x[1]).collect();
        let mx = m.spectral().matrix().mul_vec(&x);
        for ((a, b), g) in via_matrix.iter().zip(mx).zip(m.drift(&x)) {
            assert!((a - b - g).abs() < 1e-12);
        }
    }

    #[test]
    fn sigma2_examples() {
        let m = MultitypeModel::new(half(), 0.0, 1.0).unwrap();
        assert_eq!(m.sigma2(&[0.0, 0.0]), 0.0);
        for lambda in [1.0, 10.0, 1e4] {
            assert!((m.sigma2(&[lambda, lambda]) - 0.5 * lambda).abs() < 1e-12 * lambda);
        }

        let one = MultitypeModel::new(SpectralData::univariate(), 0.0, 1.0).unwrap();
        // Poisson offspring with mean 1: Var(ζ) = 1.
        assert_eq!(one.sigma2(&[17.0]), 17.0);
    }

    #[test]
    fn trace_condition_holds() {
        let m = MultitypeModel::new(half(), 0.4, 1.0).unwrap();
        for x in [[1.0, 0.0], [0.0, 5.0], [30.0, 2.0], [1e5, 1e5]] {
            assert!(m.trace_gamma(&x) <= m.trace_bound() * m.sigma2(&x) * (1.0 + 1e-12));
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(MultitypeModel::new(half(), -0.1, 1.0).is_err());
        assert!(MultitypeModel::new(half(), 0.1, 0.0).is_err());
        let m = NonNegativeMatrix::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
        let s = perron_frobenius(&m, TOL_EIG).unwrap();
        assert!(matches!(MultitypeModel::new(s, 0.1, 1.0), Err(Error::NotCritical(_))));
    }
}
