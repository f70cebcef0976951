//! Primitivity, Perron-Frobenius data and the ray decomposition `x = x̂ + x̌`.
//!
//! All norms in this module are the ℓ¹ norm `‖x‖ = Σ|xᵢ|`.

use serde::Serialize;

use crate::error::{Error, Result};

/// Default tolerance for the eigen-solver.
pub const TOL_EIG: f64 = 1e-12;
/// Default iteration cap for the eigen-solver.
pub const MAX_ITER: usize = 100_000;
/// Default tolerance for `|λ₁ − 1|`.
pub const TOL_CRIT: f64 = 1e-9;

/// A square matrix with non-negative finite entries, stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NonNegativeMatrix {
    dim: usize,
    entries: Vec<f64>,
}

impl NonNegativeMatrix {
    pub fn from_row_major(dim: usize, entries: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidConfig("matrix dimension must be at least 1".into()));
        }
        if entries.len() != dim * dim {
            return Err(Error::DimensionMismatch { expected: dim * dim, found: entries.len() });
        }
        if let Some(bad) = entries.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::InvalidConfig(format!("matrix entry {bad} is not a non-negative real")));
        }
        Ok(Self { dim, entries })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.len();
        let mut entries = Vec::with_capacity(dim * dim);
        for row in rows {
            if row.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: row.len() });
            }
            entries.extend_from_slice(row);
        }
        Self::from_row_major(dim, entries)
    }

    /// The 1×1 identity, the mean matrix of every univariate model.
    pub fn identity_1d() -> Self {
        Self { dim: 1, entries: vec![1.0] }
    }

    /// Parses the matrix file format: first line `d`, then `d` rows of `d`
    /// whitespace-separated reals. Blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
            .filter(|(_, l)| !l.is_empty());

        let (line_no, header) = lines.next().ok_or(Error::Parse { line: 1, message: "empty matrix file".into() })?;
        let dim: usize = header.parse().map_err(|_| Error::Parse {
            line: line_no,
            message: format!("expected the dimension d, found {header:?}"),
        })?;
        if dim == 0 {
            return Err(Error::Parse { line: line_no, message: "dimension must be at least 1".into() });
        }

        let mut entries = Vec::with_capacity(dim * dim);
        let mut last_line = line_no;
        for row in 0..dim {
            let (line_no, line) = lines.next().ok_or(Error::Parse {
                line: last_line + 1,
                message: format!("expected {dim} rows, found {row}"),
            })?;
            last_line = line_no;
            let values = line
                .split_whitespace()
                .map(|tok| {
                    tok.parse::<f64>().map_err(|_| Error::Parse { line: line_no, message: format!("not a number: {tok:?}") })
                })
                .collect::<Result<Vec<_>>>()?;
            if values.len() != dim {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("expected {dim} entries, found {}", values.len()),
                });
            }
            if let Some(v) = values.iter().find(|v| !v.is_finite() || **v < 0.0) {
                return Err(Error::Parse { line: line_no, message: format!("entry {v} is not a non-negative real") });
            }
            entries.extend(values);
        }
        if let Some((line_no, _)) = lines.next() {
            return Err(Error::Parse { line: line_no, message: format!("trailing data after {dim} rows") });
        }
        Self::from_row_major(dim, entries)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.entries[row * self.dim + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.entries[row * self.dim..(row + 1) * self.dim]
    }

    /// `M x`.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.dim).map(|i| dot(self.row(i), x)).collect()
    }

    /// `y M` for a row vector `y`.
    pub fn vec_mul(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for (i, yi) in y.iter().enumerate() {
            for (o, m) in out.iter_mut().zip(self.row(i)) {
                *o += yi * m;
            }
        }
        out
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self { dim: self.dim, entries: self.entries.iter().map(|v| v * factor).collect() }
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.dim).map(|i| self.row(i).to_vec()).collect()
    }
}

/// Perron-Frobenius data of a primitive matrix, normalized so that
/// `Σ ℓᵢ = 1` and `Σ ℓᵢ rᵢ = 1`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectralData {
    matrix: NonNegativeMatrix,
    lambda1: f64,
    left: Vec<f64>,
    right: Vec<f64>,
    primitivity_power: usize,
}

impl SpectralData {
    pub fn matrix(&self) -> &NonNegativeMatrix {
        &self.matrix
    }

    pub fn lambda1(&self) -> f64 {
        self.lambda1
    }

    /// Left eigenvector ℓ.
    pub fn left(&self) -> &[f64] {
        &self.left
    }

    /// Right eigenvector r.
    pub fn right(&self) -> &[f64] {
        &self.right
    }

    pub fn primitivity_power(&self) -> usize {
        self.primitivity_power
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim
    }

    /// `ℓx`.
    pub fn ell_dot(&self, x: &[f64]) -> f64 {
        dot(&self.left, x)
    }

    /// Divides `M` by `λ₁`. Eigenvectors and their normalization are unchanged.
    pub fn rescaled_to_critical(&self) -> Self {
        Self {
            matrix: self.matrix.scaled(1.0 / self.lambda1),
            lambda1: 1.0,
            left: self.left.clone(),
            right: self.right.clone(),
            primitivity_power: self.primitivity_power,
        }
    }

    /// Spectral data of the 1×1 matrix `[[1]]`.
    pub fn univariate() -> Self {
        Self {
            matrix: NonNegativeMatrix::identity_1d(),
            lambda1: 1.0,
            left: vec![1.0],
            right: vec![1.0],
            primitivity_power: 1,
        }
    }
}

/// The split `x = x̂ + x̌` with `x̂ = (ℓx) r` and `ℓ x̌ = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    pub hat: Vec<f64>,
    pub check: Vec<f64>,
}

/// Smallest `k ≤ (d−1)² + 1` with `M^k` entrywise positive.
///
/// Powers are taken on the zero pattern, so magnitudes never overflow.
pub fn check_primitive(m: &NonNegativeMatrix) -> Result<usize> {
    let d = m.dim;
    let bound = (d - 1) * (d - 1) + 1;
    let pattern: Vec<bool> = m.entries.iter().map(|v| *v > 0.0).collect();
    let mut power = pattern.clone();
    for k in 1..=bound {
        if power.iter().all(|b| *b) {
            return Ok(k);
        }
        let mut next = vec![false; d * d];
        for i in 0..d {
            for j in 0..d {
                next[i * d + j] = (0..d).any(|l| power[i * d + l] && pattern[l * d + j]);
            }
        }
        power = next;
    }
    Err(Error::NotPrimitive { bound })
}

/// Perron-Frobenius eigenvalue and normalized eigenvectors by power iteration.
pub fn perron_frobenius(m: &NonNegativeMatrix, tol: f64) -> Result<SpectralData> {
    perron_frobenius_with(m, tol, MAX_ITER)
}

pub fn perron_frobenius_with(m: &NonNegativeMatrix, tol: f64, max_iter: usize) -> Result<SpectralData> {
    let primitivity_power = check_primitive(m)?;
    let right = power_iterate(|v| m.mul_vec(v), m.dim, tol, max_iter)?;
    let mut left = power_iterate(|v| m.vec_mul(v), m.dim, tol, max_iter)?;

    let left_sum: f64 = left.iter().sum();
    left.iter_mut().for_each(|v| *v /= left_sum);
    let scale = dot(&left, &right);
    let right: Vec<f64> = right.iter().map(|v| v / scale).collect();

    // With ℓr = 1 this is the Rayleigh-type quotient ℓMr / ℓr.
    let lambda1 = dot(&left, &m.mul_vec(&right));

    if left.iter().chain(right.iter()).any(|v| !(*v > 0.0)) {
        return Err(Error::NonConvergence { iterations: max_iter, residual: f64::NAN });
    }
    Ok(SpectralData { matrix: m.clone(), lambda1, left, right, primitivity_power })
}

fn power_iterate(apply: impl Fn(&[f64]) -> Vec<f64>, dim: usize, tol: f64, max_iter: usize) -> Result<Vec<f64>> {
    let mut v = vec![1.0 / dim as f64; dim];
    let mut change = f64::INFINITY;
    for _ in 0..max_iter {
        let mut next = apply(&v);
        let norm = norm1(&next);
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::NonConvergence { iterations: 0, residual: norm });
        }
        next.iter_mut().for_each(|x| *x /= norm);
        change = next.iter().zip(&v).map(|(a, b)| (a - b).abs()).sum();
        v = next;
        if change <= tol {
            return Ok(v);
        }
    }
    Err(Error::NonConvergence { iterations: max_iter, residual: change })
}

/// Checks `|λ₁ − 1| ≤ tol_crit`.
pub fn assert_critical(s: &SpectralData, tol_crit: f64) -> Result<()> {
    if (s.lambda1 - 1.0).abs() <= tol_crit {
        Ok(())
    } else {
        Err(Error::NotCritical(s.lambda1))
    }
}

pub fn decompose(x: &[f64], s: &SpectralData) -> Result<Decomposition> {
    if x.len() != s.dim() {
        return Err(Error::DimensionMismatch { expected: s.dim(), found: x.len() });
    }
    let weight = s.ell_dot(x);
    let hat: Vec<f64> = s.right.iter().map(|r| weight * r).collect();
    let check = x.iter().zip(&hat).map(|(a, b)| a - b).collect();
    Ok(Decomposition { hat, check })
}

/// `‖x̌‖₁ / ‖x‖₁`, defined as 0 at the origin.
pub fn check_ratio(x: &[f64], s: &SpectralData) -> f64 {
    let total = norm1(x);
    if total == 0.0 {
        return 0.0;
    }
    let weight = s.ell_dot(x);
    let check: f64 = x.iter().zip(&s.right).map(|(xi, ri)| (xi - weight * ri).abs()).sum();
    check / total
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm1(x: &[f64]) -> f64 {
    x.iter().map(|v| v.abs()).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mat(rows: &[&[f64]]) -> NonNegativeMatrix {
        NonNegativeMatrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn primitivity_examples() {
        assert_eq!(check_primitive(&mat(&[&[0.5, 0.5], &[0.5, 0.5]])), Ok(1));
        assert_eq!(check_primitive(&mat(&[&[0.0, 1.0], &[1.0, 0.0]])), Err(Error::NotPrimitive { bound: 2 }));
        assert_eq!(check_primitive(&mat(&[&[0.0, 1.0], &[0.5, 0.5]])), Ok(2));
        assert_eq!(check_primitive(&mat(&[&[0.0]])), Err(Error::NotPrimitive { bound: 1 }));
    }

    #[test]
    fn wielandt_matrix_reaches_the_bound() {
        // The Wielandt matrix attains (d−1)² + 1.
        let d = 4;
        let mut rows = vec![vec![0.0; d]; d];
        for i in 0..d - 1 {
            rows[i][i + 1] = 1.0;
        }
        rows[d - 1][0] = 1.0;
        rows[d - 1][1] = 1.0;
        let m = NonNegativeMatrix::from_rows(&rows).unwrap();
        assert_eq!(check_primitive(&m), Ok(10));
    }

    #[test]
    fn perron_frobenius_examples() {
        let s = perron_frobenius(&mat(&[&[1.0]]), TOL_EIG).unwrap();
        assert_eq!((s.lambda1(), s.left(), s.right()), (1.0, &[1.0][..], &[1.0][..]));

        let s = perron_frobenius(&mat(&[&[0.2, 0.8], &[0.6, 0.4]]), TOL_EIG).unwrap();
        assert!((s.lambda1() - 1.0).abs() < 1e-12);
        assert!((s.left()[0] - 3.0 / 7.0).abs() < 1e-12);
        assert!((s.left()[1] - 4.0 / 7.0).abs() < 1e-12);
        assert!(s.right().iter().all(|r| (r - 1.0).abs() < 1e-12));

        let s = perron_frobenius(&mat(&[&[0.5, 0.5], &[0.5, 0.5]]), TOL_EIG).unwrap();
        assert!(s.left().iter().all(|l| (l - 0.5).abs() < 1e-15));
        assert!(s.right().iter().all(|r| (r - 1.0).abs() < 1e-15));
    }

    #[test]
    fn perron_frobenius_rejects_periodic() {
        assert!(matches!(
            perron_frobenius(&mat(&[&[0.0, 1.0], &[1.0, 0.0]]), TOL_EIG),
            Err(Error::NotPrimitive { .. })
        ));
    }

    #[test]
    fn criticality() {
        let s = perron_frobenius(&mat(&[&[1.3]]), TOL_EIG).unwrap();
        assert_eq!(assert_critical(&s, TOL_CRIT), Err(Error::NotCritical(1.3)));
        assert_eq!(assert_critical(&s.rescaled_to_critical(), TOL_CRIT), Ok(()));
        let s = perron_frobenius(&mat(&[&[1.0 + 1e-12]]), TOL_EIG).unwrap();
        assert_eq!(assert_critical(&s, 1e-9), Ok(()));
    }

    #[test]
    fn decompose_examples() {
        let s = perron_frobenius(&mat(&[&[0.5, 0.5], &[0.5, 0.5]]), TOL_EIG).unwrap();
        let d = decompose(&[3.0, 1.0], &s).unwrap();
        assert_eq!(d.hat, vec![2.0, 2.0]);
        assert_eq!(d.check, vec![1.0, -1.0]);

        let d = decompose(&[2.0, 2.0], &s).unwrap();
        assert_eq!(d.check, vec![0.0, 0.0]);

        let d = decompose(&[0.0, 0.0], &s).unwrap();
        assert_eq!((d.hat, d.check), (vec![0.0, 0.0], vec![0.0, 0.0]));

        assert_eq!(decompose(&[1.0], &s), Err(Error::DimensionMismatch { expected: 2, found: 1 }));
    }

    #[test]
    fn parse_reports_line_numbers() {
        let m = NonNegativeMatrix::parse("2\n0.2 0.8\n0.6 0.4\n").unwrap();
        assert_eq!(m.get(1, 0), 0.6);
        assert_eq!(NonNegativeMatrix::parse("1\n1").unwrap().get(0, 0), 1.0);

        let err = NonNegativeMatrix::parse("2\n0.2 0.8\n0.6 x\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err:?}");
        let err = NonNegativeMatrix::parse("2\n0.2 0.8 0.1\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err:?}");
        let err = NonNegativeMatrix::parse("2\n0.2 0.8\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err:?}");
        let err = NonNegativeMatrix::parse("1\n-1\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err:?}");
    }
}
