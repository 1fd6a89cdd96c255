//! Dense Hermitian eigendecomposition.

use alloc::vec::Vec;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::sparse::SparseMatrix;

#[derive(Clone, Debug)]
pub enum Eigenvectors {
    Real(DMatrix<f64>),
    Complex(DMatrix<Complex64>),
}

/// Eigenvalues in ascending order with orthonormal eigenvectors as columns.
#[derive(Clone, Debug)]
pub struct Eigen {
    pub values: Vec<f64>,
    pub vectors: Eigenvectors,
}

impl Eigen {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// Component `i` of eigenvector `j`.
    pub fn component(&self, i: usize, j: usize) -> Complex64 {
        match &self.vectors {
            Eigenvectors::Real(v) => Complex64::new(v[(i, j)], 0.0),
            Eigenvectors::Complex(v) => v[(i, j)],
        }
    }

    pub fn column(&self, j: usize) -> Vec<Complex64> {
        (0..self.dim()).map(|i| self.component(i, j)).collect()
    }
}

/// Hermitian tolerance accepted by [`eigh`].
pub const HERMITIAN_TOLERANCE: f64 = 1e-12;

pub fn eigh(h: &SparseMatrix) -> Result<Eigen> {
    let deviation = h.hermitian_deviation();
    if deviation > HERMITIAN_TOLERANCE {
        return Err(Error::NotHermitian { deviation });
    }
    let n = h.n;
    let (values, vectors) = if h.is_real() {
        let e = h.to_dense_real().symmetric_eigen();
        (e.eigenvalues.iter().copied().collect::<Vec<f64>>(), Eigenvectors::Real(e.eigenvectors))
    } else {
        let e = h.to_dense_complex().symmetric_eigen();
        (e.eigenvalues.iter().copied().collect::<Vec<f64>>(), Eigenvectors::Complex(e.eigenvectors))
    };
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let values = order.iter().map(|&i| values[i]).collect();
    let vectors = match vectors {
        Eigenvectors::Real(v) => Eigenvectors::Real(v.select_columns(order.iter())),
        Eigenvectors::Complex(v) => Eigenvectors::Complex(v.select_columns(order.iter())),
    };
    Ok(Eigen { values, vectors })
}

/// Eigenvalues only, ascending.
pub fn eigvalsh(h: &SparseMatrix) -> Result<Vec<f64>> {
    let deviation = h.hermitian_deviation();
    if deviation > HERMITIAN_TOLERANCE {
        return Err(Error::NotHermitian { deviation });
    }
    let mut values: Vec<f64> = if h.is_real() {
        h.to_dense_real().symmetric_eigenvalues().iter().copied().collect()
    } else {
        h.to_dense_complex().symmetric_eigenvalues().iter().copied().collect()
    };
    values.sort_by(f64::total_cmp);
    Ok(values)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(x: f64, y: f64) -> Complex64 {
        Complex64::new(x, y)
    }

    fn residual_ok(h: &SparseMatrix, e: &Eigen) -> bool {
        let norm = h.max_row_sum();
        (0..e.dim()).all(|j| {
            let v = e.column(j);
            let hv = h.matvec(&v);
            let r: f64 = hv.iter().zip(&v).map(|(a, b)| (a - b * e.values[j]).norm_sqr()).sum();
            libm::sqrt(r) <= 1e-10 * (1.0 + norm)
        })
    }

    #[test]
    fn examples() {
        let d = SparseMatrix::from_triplets(3, [(0, 0, c(3.0, 0.0)), (1, 1, c(-1.0, 0.0)), (2, 2, c(2.0, 0.0))]);
        assert_eq!(eigh(&d).unwrap().values, alloc::vec![-1.0, 2.0, 3.0]);
        let r1 = SparseMatrix::from_triplets(2, [(0, 0, c(2.0, 0.0)), (0, 1, c(2.0, 0.0)), (1, 0, c(2.0, 0.0)), (1, 1, c(2.0, 0.0))]);
        let e = eigh(&r1).unwrap();
        assert!(e.values[0].abs() < 1e-14 && (e.values[1] - 4.0).abs() < 1e-14);
        assert!(residual_ok(&r1, &e));
    }

    #[test]
    fn complex_hermitian() {
        let h = SparseMatrix::from_triplets(2, [(0, 0, c(1.0, 0.0)), (0, 1, c(0.0, 1.0)), (1, 0, c(0.0, -1.0)), (1, 1, c(1.0, 0.0))]);
        let e = eigh(&h).unwrap();
        assert!(e.values[0].abs() < 1e-14 && (e.values[1] - 2.0).abs() < 1e-14);
        assert!(residual_ok(&h, &e));
        let bad = SparseMatrix::from_triplets(2, [(0, 1, c(1.0, 0.0))]);
        assert!(matches!(eigh(&bad), Err(Error::NotHermitian { .. })));
    }

    #[test]
    fn circulant_matches_fourier() {
        let n = 16;
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, c(2.0, 0.0)));
            t.push((i, (i + 1) % n, c(-1.0, 0.0)));
            t.push((i, (i + n - 1) % n, c(-1.0, 0.0)));
        }
        let h = SparseMatrix::from_triplets(n, t);
        let mut expected: Vec<f64> =
            (0..n).map(|k| 2.0 - 2.0 * libm::cos(2.0 * core::f64::consts::PI * k as f64 / n as f64)).collect();
        expected.sort_by(f64::total_cmp);
        let e = eigh(&h).unwrap();
        for (a, b) in e.values.iter().zip(&expected) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(residual_ok(&h, &e));
    }
}
