//! Dense symmetric matrices for the `N × N` blocks `Q_t`.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense symmetric `n × n` matrix stored row-major in full.
///
/// Symmetry holds exactly: every mutation writes both `(i, j)` and `(j, i)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * n],
        }
    }

    /// `E/n`: every entry equal to `1/n`.
    pub fn all_ones_scaled(n: usize) -> Self {
        Self {
            n,
            data: vec![1.0 / n as f64; n * n],
        }
    }

    /// `I/n`.
    pub fn identity_scaled(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.data[i * n + i] = 1.0 / n as f64;
        }
        m
    }

    /// Builds from the lower triangle `f(i, j)` with `j <= i`.
    pub fn from_lower_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in 0..=i {
                m.set(i, j, f(i, j));
            }
        }
        m
    }

    /// Builds from a full row-major array after checking symmetry to `tol`.
    /// The stored matrix is the symmetric part.
    pub fn from_row_major(n: usize, data: &[f64], tol: f64) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                got: data.len(),
            });
        }
        if let Some(v) = data.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!("non-finite entry {v}")));
        }
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..i {
                worst = worst.max((data[i * n + j] - data[j * n + i]).abs());
            }
        }
        if worst > tol {
            return Err(Error::NotSymmetric(worst));
        }
        Ok(Self::from_lower_fn(n, |i, j| {
            0.5 * (data[i * n + j] + data[j * n + i])
        }))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    /// Sets `(i, j)` and `(j, i)`.
    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
        self.data[j * self.n + i] = v;
    }

    pub fn row_major(&self) -> &[f64] {
        &self.data
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    pub fn to_dmatrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.n, self.n, &self.data)
    }

    /// Symmetric part of a dense matrix.
    pub fn from_dmatrix(m: &DMatrix<f64>) -> Self {
        let n = m.nrows();
        Self::from_lower_fn(n, |i, j| 0.5 * (m[(i, j)] + m[(j, i)]))
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        if self.n == 0 {
            return Vec::new();
        }
        let mut ev: Vec<f64> = SymmetricEigen::new(self.to_dmatrix())
            .eigenvalues
            .iter()
            .copied()
            .collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues().first().copied().unwrap_or(f64::INFINITY)
    }

    pub fn max_abs_diff(&self, other: &SymMatrix) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scaled_constants() {
        let e = SymMatrix::all_ones_scaled(4);
        assert!((e.trace() - 1.0).abs() < 1e-15);
        assert!((e.eigenvalues()[3] - 1.0).abs() < 1e-12);
        let i = SymMatrix::identity_scaled(4);
        assert!((i.min_eigenvalue() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn row_major_symmetry_check() {
        assert!(SymMatrix::from_row_major(2, &[1.0, 2.0, 2.0 + 1e-3, 1.0], 1e-12).is_err());
        let m = SymMatrix::from_row_major(2, &[1.0, 2.0, 2.0, 1.0], 1e-12).unwrap();
        assert_eq!(m.get(0, 1), 2.0);
        assert!(SymMatrix::from_row_major(2, &[1.0], 1e-12).is_err());
    }
}
