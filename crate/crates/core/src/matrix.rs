//! Dense symmetric matrices.
//!
//! [`SymMatrix`] wraps a square `nalgebra` matrix and keeps it exactly
//! symmetric: every constructor averages `(M + Mᵀ)/2` and every setter writes
//! both triangles. Positive-definiteness is decided by a Cholesky attempt only.

use nalgebra::{Cholesky, DMatrix, Dyn, SymmetricEigen};

use crate::error::{Error, Result};

/// Serialises through [`MatrixEnvelope`](crate::io::MatrixEnvelope).
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(try_from = "crate::io::MatrixEnvelope", into = "crate::io::MatrixEnvelope")]
pub struct SymMatrix {
    inner: DMatrix<f64>,
}

impl SymMatrix {
    /// Builds a symmetric matrix from any square matrix by averaging it with its transpose.
    pub fn from_dmatrix(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch {
                expected: m.nrows(),
                found: m.ncols(),
            });
        }
        if m.nrows() == 0 {
            return Err(Error::InvalidArgument("matrix dimension must be at least 1".into()));
        }
        let mut m = m;
        let d = m.nrows();
        for j in 0..d {
            for i in 0..j {
                let v = 0.5 * (m[(i, j)] + m[(j, i)]);
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        Ok(SymMatrix { inner: m })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.len();
        if let Some(bad) = rows.iter().find(|r| r.len() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: bad.len(),
            });
        }
        Self::from_dmatrix(DMatrix::from_fn(d, d, |i, j| rows[i][j]))
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        Self::from_dmatrix(DMatrix::from_fn(dim, dim, &mut f))
    }

    pub fn zeros(dim: usize) -> Self {
        assert!(dim >= 1, "matrix dimension must be at least 1");
        SymMatrix {
            inner: DMatrix::zeros(dim, dim),
        }
    }

    pub fn identity(dim: usize) -> Self {
        assert!(dim >= 1, "matrix dimension must be at least 1");
        SymMatrix {
            inner: DMatrix::identity(dim, dim),
        }
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &v) in diag.iter().enumerate() {
            m.inner[(i, i)] = v;
        }
        m
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.inner.nrows()
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.inner[(i, j)]
    }

    /// Sets entries `(i, j)` and `(j, i)`.
    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        self.inner[(i, j)] = value;
        self.inner[(j, i)] = value;
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.get(i, i)).collect()
    }

    pub fn as_dmatrix(&self) -> &DMatrix<f64> {
        &self.inner
    }

    pub fn into_dmatrix(self) -> DMatrix<f64> {
        self.inner
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.dim())
            .map(|i| (0..self.dim()).map(|j| self.get(i, j)).collect())
            .collect()
    }

    /// Column-major storage; both triangles are present.
    #[inline]
    pub(crate) fn as_mut_slice(&mut self) -> &mut [f64] {
        self.inner.as_mut_slice()
    }

    pub(crate) fn check_same_dim(&self, other: &SymMatrix) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: other.dim(),
            });
        }
        Ok(())
    }

    pub fn cholesky(&self) -> Result<Cholesky<f64, Dyn>> {
        Cholesky::new(self.inner.clone()).ok_or(Error::NotPositiveDefinite)
    }

    pub fn is_positive_definite(&self) -> bool {
        self.cholesky().is_ok()
    }

    /// `log det` as twice the sum of the log Cholesky pivots.
    pub fn log_det(&self) -> Result<f64> {
        let chol = self.cholesky()?;
        Ok(log_det_from_cholesky(&chol))
    }

    pub fn inverse(&self) -> Result<SymMatrix> {
        let chol = self.cholesky()?;
        SymMatrix::from_dmatrix(chol.inverse())
    }

    /// `trace(A B)` for symmetric `A`, `B`, i.e. the Frobenius inner product.
    pub fn trace_product(&self, other: &SymMatrix) -> f64 {
        self.inner.dot(&other.inner)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.inner.norm()
    }

    pub fn sub(&self, other: &SymMatrix) -> Result<SymMatrix> {
        self.check_same_dim(other)?;
        Ok(SymMatrix {
            inner: &self.inner - &other.inner,
        })
    }

    pub fn add(&self, other: &SymMatrix) -> Result<SymMatrix> {
        self.check_same_dim(other)?;
        Ok(SymMatrix {
            inner: &self.inner + &other.inner,
        })
    }

    pub fn scale(&self, c: f64) -> SymMatrix {
        SymMatrix {
            inner: &self.inner * c,
        }
    }

    pub fn add_to_diagonal(&self, shift: &[f64]) -> Result<SymMatrix> {
        if shift.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: shift.len(),
            });
        }
        let mut out = self.clone();
        for (i, &v) in shift.iter().enumerate() {
            out.inner[(i, i)] += v;
        }
        Ok(out)
    }

    /// Extracts the principal block `[offset, offset + size)`.
    pub fn principal_block(&self, offset: usize, size: usize) -> Result<SymMatrix> {
        if size == 0 || offset + size > self.dim() {
            return Err(Error::InvalidArgument(format!(
                "block offset {offset} size {size} exceeds dimension {}",
                self.dim()
            )));
        }
        Ok(SymMatrix {
            inner: self.inner.view((offset, offset), (size, size)).into_owned(),
        })
    }

    /// Ascending eigenvalues.
    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        let eig = SymmetricEigen::try_new(self.inner.clone(), f64::EPSILON, 0)
            .ok_or(Error::EigenFailure)?;
        let mut vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        vals.sort_by(f64::total_cmp);
        Ok(vals)
    }

    /// Smallest eigenvalue with a unit eigenvector.
    pub fn min_eigenpair(&self) -> Result<(f64, Vec<f64>)> {
        let eig = SymmetricEigen::try_new(self.inner.clone(), f64::EPSILON, 0)
            .ok_or(Error::EigenFailure)?;
        let (k, &lambda) = eig
            .eigenvalues
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .ok_or(Error::EigenFailure)?;
        Ok((lambda, eig.eigenvectors.column(k).iter().copied().collect()))
    }

    /// Scales to unit diagonal: `D^{-1/2} M D^{-1/2}`.
    pub fn to_correlation(&self) -> Result<SymMatrix> {
        let diag = self.diagonal();
        if let Some((index, &value)) = diag.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
            return Err(Error::NonPositiveDiagonal { index, value });
        }
        let inv_sqrt: Vec<f64> = diag.iter().map(|v| 1.0 / v.sqrt()).collect();
        let d = self.dim();
        let mut out = self.clone();
        for j in 0..d {
            for i in 0..d {
                out.inner[(i, j)] *= inv_sqrt[i] * inv_sqrt[j];
            }
            out.inner[(j, j)] = 1.0;
        }
        Ok(out)
    }

    /// Upper-diagonal pairs `(i, j)`, `i < j`, whose entry exceeds `threshold` in magnitude.
    pub fn off_diagonal_pattern(&self, threshold: f64) -> Vec<(usize, usize)> {
        let d = self.dim();
        let mut out = Vec::new();
        for i in 0..d {
            for j in (i + 1)..d {
                if self.get(i, j).abs() > threshold {
                    out.push((i, j));
                }
            }
        }
        out
    }
}

pub(crate) fn log_det_from_cholesky(chol: &Cholesky<f64, Dyn>) -> f64 {
    let l = chol.l_dirty();
    2.0 * (0..l.nrows()).map(|i| l[(i, i)].ln()).sum::<f64>()
}

/// Frobenius norm of `A B - I` for square matrices.
pub(crate) fn identity_residual(a: &SymMatrix, b: &SymMatrix) -> f64 {
    let mut prod = a.as_dmatrix() * b.as_dmatrix();
    for i in 0..prod.nrows() {
        prod[(i, i)] -= 1.0;
    }
    prod.norm()
}
