//! Domain types shared by the learners and the environments: sparse basis
//! vectors, Gaussian beliefs over the basis weights and the two small dense
//! kernels every learner needs (`dot` and `quadratic_form`).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Quadratic forms in `[-NEGATIVE_VARIANCE_CLAMP, 0)` are round-off and
/// clamped to zero; anything more negative is reported as an error.
pub const NEGATIVE_VARIANCE_CLAMP: f64 = 1e-9;

/// Relative tolerance for the symmetry check on full covariances.
const SYMMETRY_TOLERANCE: f64 = 1e-9;

/// Basis-function activations `phi(s, a)` over `n` features, stored sparsely.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasisVector {
    n: usize,
    entries: Vec<(usize, f64)>,
}

impl BasisVector {
    /// Builds a basis vector from `(index, value)` pairs. Entries are sorted by
    /// index; zero values are dropped.
    pub fn new(n: usize, mut entries: Vec<(usize, f64)>) -> Result<Self> {
        entries.retain(|&(_, v)| v != 0.0);
        entries.sort_by_key(|&(i, _)| i);
        for window in entries.windows(2) {
            if window[0].0 == window[1].0 {
                return Err(Error::InvalidBasis(format!(
                    "duplicate feature index {}",
                    window[0].0
                )));
            }
        }
        for &(i, v) in &entries {
            if i >= n {
                return Err(Error::InvalidBasis(format!(
                    "feature index {i} out of range for {n} features"
                )));
            }
            if !v.is_finite() {
                return Err(Error::InvalidBasis(format!(
                    "feature {i} has non-finite value {v}"
                )));
            }
        }
        Ok(Self { n, entries })
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            entries: Vec::new(),
        }
    }

    pub fn one_hot(n: usize, index: usize) -> Result<Self> {
        Self::new(n, vec![(index, 1.0)])
    }

    pub fn from_dense(values: &[f64]) -> Result<Self> {
        Self::new(values.len(), values.iter().copied().enumerate().collect())
    }

    /// Total feature count.
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Number of stored (non-zero) entries.
    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.entries.iter().copied()
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for &(i, v) in &self.entries {
            out[i] = v;
        }
        out
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if self.n != len {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: len,
            });
        }
        Ok(())
    }
}

/// Square dense matrix in row-major order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    dim: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![0.0; dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self::scaled_identity(dim, 1.0)
    }

    pub fn scaled_identity(dim: usize, scale: f64) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m[(i, i)] = scale;
        }
        m
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.len();
        let mut data = Vec::with_capacity(dim * dim);
        for row in rows {
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Ok(Self { dim, data })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim).map(|i| self[(i, i)]).collect()
    }

    /// `(A + A') / 2`, in place.
    pub fn symmetrize(&mut self) {
        let n = self.dim;
        for i in 0..n {
            for j in (i + 1)..n {
                let avg = 0.5 * (self.data[i * n + j] + self.data[j * n + i]);
                self.data[i * n + j] = avg;
                self.data[j * n + i] = avg;
            }
        }
    }

    /// `A phi` for sparse `phi`.
    pub fn mul_sparse(&self, phi: &BasisVector) -> Vec<f64> {
        let n = self.dim;
        let mut out = vec![0.0; n];
        for (i, out_i) in out.iter_mut().enumerate() {
            let row = &self.data[i * n..(i + 1) * n];
            *out_i = phi.iter().map(|(j, v)| row[j] * v).sum();
        }
        out
    }

    /// `phi' A` for sparse `phi`.
    pub fn sparse_mul(&self, phi: &BasisVector) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for (i, v) in phi.iter() {
            for (o, a) in out.iter_mut().zip(self.row(i)) {
                *o += v * a;
            }
        }
        out
    }

    fn is_symmetric(&self) -> bool {
        let n = self.dim;
        (0..n).all(|i| {
            ((i + 1)..n).all(|j| {
                let (a, b) = (self[(i, j)], self[(j, i)]);
                (a - b).abs() <= SYMMETRY_TOLERANCE * a.abs().max(b.abs()).max(1.0)
            })
        })
    }
}

impl std::ops::Index<(usize, usize)> for Matrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.dim + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.dim + j]
    }
}

/// Covariance of the weight belief: full (KFQL) or diagonal only (AKFQL).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Covariance {
    Full(Matrix),
    Diagonal(Vec<f64>),
}

impl Covariance {
    pub fn dim(&self) -> usize {
        match self {
            Covariance::Full(m) => m.dim(),
            Covariance::Diagonal(d) => d.len(),
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        match self {
            Covariance::Full(m) => m.diagonal(),
            Covariance::Diagonal(d) => d.clone(),
        }
    }

    pub fn is_finite(&self) -> bool {
        match self {
            Covariance::Full(m) => m.as_slice().iter().all(|v| v.is_finite()),
            Covariance::Diagonal(d) => d.iter().all(|v| v.is_finite()),
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            Covariance::Full(m) => {
                if !m.is_symmetric() {
                    return Err(Error::InvalidBelief("covariance is not symmetric".into()));
                }
                if m.diagonal().iter().any(|&d| d < 0.0) {
                    return Err(Error::InvalidBelief(
                        "covariance has a negative diagonal entry".into(),
                    ));
                }
            }
            Covariance::Diagonal(d) => {
                if d.iter().any(|&v| v < 0.0) {
                    return Err(Error::InvalidBelief("negative variance".into()));
                }
            }
        }
        Ok(())
    }
}

/// Multivariate-normal belief `r ~ N(mean, covariance)` over basis weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightBelief {
    pub mean: Vec<f64>,
    pub covariance: Covariance,
}

impl WeightBelief {
    pub fn new(mean: Vec<f64>, covariance: Covariance) -> Result<Self> {
        if mean.len() != covariance.dim() {
            return Err(Error::DimensionMismatch {
                expected: mean.len(),
                found: covariance.dim(),
            });
        }
        covariance.validate()?;
        Ok(Self { mean, covariance })
    }

    /// Independent prior with the same variance on every weight, stored as a
    /// full matrix.
    pub fn full_prior(mean: Vec<f64>, variance: f64) -> Result<Self> {
        let n = mean.len();
        Self::new(mean, Covariance::Full(Matrix::scaled_identity(n, variance)))
    }

    pub fn diagonal_prior(mean: Vec<f64>, variance: f64) -> Result<Self> {
        let n = mean.len();
        Self::new(mean, Covariance::Diagonal(vec![variance; n]))
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

/// A sample-update target `value` observed with variance `noise`.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub phi: BasisVector,
    pub value: f64,
    pub noise: f64,
}

impl Observation {
    pub fn new(phi: BasisVector, value: f64, noise: f64) -> Result<Self> {
        if !value.is_finite() {
            return Err(Error::InvalidObservation(format!(
                "target value {value} is not finite"
            )));
        }
        if !noise.is_finite() || noise < 0.0 {
            return Err(Error::InvalidObservation(format!(
                "sensor noise {noise} must be finite and non-negative"
            )));
        }
        Ok(Self { phi, value, noise })
    }
}

/// Predicted mean and variance of a Q-value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QEstimate {
    pub mean: f64,
    pub variance: f64,
}

/// `phi' v` over the stored entries of `phi`.
pub fn dot(phi: &BasisVector, v: &[f64]) -> Result<f64> {
    phi.check_len(v.len())?;
    Ok(phi.iter().map(|(i, x)| x * v[i]).sum())
}

/// `phi' Sigma phi`, or `sum_i phi_i^2 Sigma_ii` for a diagonal covariance.
pub fn quadratic_form(phi: &BasisVector, sigma: &Covariance) -> Result<f64> {
    phi.check_len(sigma.dim())?;
    let raw = match sigma {
        Covariance::Full(m) => phi
            .iter()
            .map(|(i, x)| {
                let row = m.row(i);
                x * phi.iter().map(|(j, y)| row[j] * y).sum::<f64>()
            })
            .sum(),
        Covariance::Diagonal(d) => phi.iter().map(|(i, x)| x * (d[i] * x)).sum(),
    };
    clamp_variance(raw)
}

pub(crate) fn clamp_variance(v: f64) -> Result<f64> {
    if v >= 0.0 {
        Ok(v)
    } else if v >= -NEGATIVE_VARIANCE_CLAMP {
        Ok(0.0)
    } else {
        // NaN also lands here
        Err(Error::NegativeVariance(v))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e(n: usize, k: usize) -> BasisVector {
        BasisVector::one_hot(n, k).unwrap()
    }

    #[test]
    fn dot_examples() {
        assert_eq!(dot(&e(3, 0), &[5.0, 0.0, 0.0]).unwrap(), 5.0);
        assert_eq!(dot(&BasisVector::zeros(3), &[1.0, 2.0, 3.0]).unwrap(), 0.0);
        let phi = BasisVector::new(2, vec![(0, 0.25), (1, 0.75)]).unwrap();
        assert_eq!(dot(&phi, &[4.0, 8.0]).unwrap(), 7.0);
    }

    #[test]
    fn dot_rejects_dimension_mismatch() {
        assert_eq!(
            dot(&e(3, 0), &[1.0, 2.0]),
            Err(Error::DimensionMismatch {
                expected: 3,
                found: 2
            })
        );
    }

    #[test]
    fn quadratic_form_examples() {
        let id = Covariance::Full(Matrix::identity(2));
        assert_eq!(quadratic_form(&e(2, 0), &id).unwrap(), 1.0);
        assert_eq!(quadratic_form(&BasisVector::zeros(2), &id).unwrap(), 0.0);
        let sigma = Covariance::Full(
            Matrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap(),
        );
        let ones = BasisVector::from_dense(&[1.0, 1.0]).unwrap();
        assert_eq!(quadratic_form(&ones, &sigma).unwrap(), 6.0);
    }

    #[test]
    fn quadratic_form_clamps_round_off_and_rejects_corruption() {
        let tiny = Covariance::Diagonal(vec![-1e-12]);
        assert_eq!(quadratic_form(&e(1, 0), &tiny).unwrap(), 0.0);
        let bad = Covariance::Diagonal(vec![-1.0]);
        assert!(matches!(
            quadratic_form(&e(1, 0), &bad),
            Err(Error::NegativeVariance(_))
        ));
    }

    #[test]
    fn basis_vector_validation() {
        assert!(BasisVector::new(2, vec![(0, 1.0), (0, 2.0)]).is_err());
        assert!(BasisVector::new(2, vec![(2, 1.0)]).is_err());
        assert!(BasisVector::new(2, vec![(1, f64::NAN)]).is_err());
        let phi = BasisVector::new(4, vec![(3, 1.0), (1, 0.0), (0, 2.0)]).unwrap();
        assert_eq!(phi.entries(), &[(0, 2.0), (3, 1.0)]);
        assert_eq!(phi.to_dense(), vec![2.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn belief_validation() {
        let asym = Matrix::from_rows(&[vec![1.0, 0.5], vec![0.4, 1.0]]).unwrap();
        assert!(WeightBelief::new(vec![0.0; 2], Covariance::Full(asym)).is_err());
        assert!(WeightBelief::new(vec![0.0; 3], Covariance::Diagonal(vec![1.0; 2])).is_err());
        assert!(WeightBelief::diagonal_prior(vec![0.0; 2], -1.0).is_err());
        assert!(WeightBelief::full_prior(vec![0.0; 2], 10_000.0).is_ok());
    }

    #[test]
    fn sparse_products_agree_with_dense() {
        let m = Matrix::from_rows(&[
            vec![1.0, 2.0, 3.0],
            vec![4.0, 5.0, 6.0],
            vec![7.0, 8.0, 9.0],
        ])
        .unwrap();
        let phi = BasisVector::new(3, vec![(0, 1.0), (2, -1.0)]).unwrap();
        assert_eq!(m.mul_sparse(&phi), vec![-2.0, -2.0, -2.0]);
        assert_eq!(m.sparse_mul(&phi), vec![-6.0, -6.0, -6.0]);
    }

    #[test]
    fn observation_rejects_negative_noise() {
        assert!(Observation::new(e(1, 0), 1.0, -0.1).is_err());
        assert!(Observation::new(e(1, 0), f64::INFINITY, 0.1).is_err());
    }
}
