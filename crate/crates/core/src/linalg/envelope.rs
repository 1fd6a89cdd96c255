//! Envelope (skyline) `LDLᵀ` factorization of real symmetric sparse
//! matrices. Used for log-determinants of definite matrices and for
//! eigenvalue counting through Sylvester's law of inertia.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::sparse::SparseMatrix;

/// Diagonal of `D` in `H − σI = L D Lᵀ`, plus the number of pivots that were
/// exactly zero and replaced by a tiny positive value.
#[derive(Clone, Debug)]
pub struct LdlDiagonal {
    pub d: Vec<f64>,
    pub perturbed_pivots: usize,
}

pub fn ldl_envelope(h: &SparseMatrix, sigma: f64) -> Result<LdlDiagonal> {
    if !h.is_real() {
        return Err(Error::Unsupported("envelope factorization needs a real matrix".into()));
    }
    let n = h.n;
    let scale = h.max_row_sum().max(sigma.abs()).max(1.0);
    let tiny = f64::EPSILON * scale;
    // first stored column of each row of the lower triangle
    let first: Vec<usize> = h.rows.iter().enumerate().map(|(i, r)| r.first().map_or(i, |e| e.0.min(i))).collect();
    let mut l: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut d: Vec<f64> = Vec::with_capacity(n);
    let mut perturbed = 0;
    for i in 0..n {
        let fi = first[i];
        let mut row = alloc::vec![0.0; i - fi];
        for &(j, v) in &h.rows[i] {
            if j < i {
                row[j - fi] = v.re;
            }
        }
        let mut diag = h.get(i, i).re - sigma;
        for j in fi..i {
            let fj = first[j];
            let lo = fi.max(fj);
            let mut s = row[j - fi];
            for k in lo..j {
                s -= row[k - fi] * d[k] * l[j][k - fj];
            }
            let lij = s / d[j];
            row[j - fi] = lij;
            diag -= lij * lij * d[j];
        }
        if diag == 0.0 || !diag.is_finite() {
            if !diag.is_finite() {
                return Err(Error::Degenerate("non-finite pivot in LDLᵀ".into()));
            }
            diag = tiny;
            perturbed += 1;
        }
        d.push(diag);
        l.push(row);
    }
    Ok(LdlDiagonal { d, perturbed_pivots: perturbed })
}

/// Number of eigenvalues strictly below `x`.
pub fn count_eigenvalues_below(h: &SparseMatrix, x: f64) -> Result<usize> {
    Ok(ldl_envelope(h, x)?.d.iter().filter(|&&v| v < 0.0).count())
}

/// `ln det H` for a positive definite real symmetric `H`.
pub fn log_det_definite(h: &SparseMatrix) -> Result<f64> {
    let f = ldl_envelope(h, 0.0)?;
    if let Some(&v) = f.d.iter().find(|&&v| v < 0.0) {
        return Err(Error::NegativeSpectrum(v));
    }
    // pivots at rounding level mean the matrix is singular to working precision
    let floor = 64.0 * f64::EPSILON * h.max_row_sum().max(1.0);
    if f.perturbed_pivots > 0 || f.d.iter().any(|&v| v <= floor) {
        return Err(Error::Degenerate("matrix is singular to working precision".into()));
    }
    Ok(f.d.iter().map(|v| libm::log(*v)).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    fn circulant(n: usize, diag: f64, off: f64) -> SparseMatrix {
        let c = |x: f64| Complex64::new(x, 0.0);
        let mut t = alloc::vec::Vec::new();
        for i in 0..n {
            t.push((i, i, c(diag)));
            t.push((i, (i + 1) % n, c(off)));
            t.push((i, (i + n - 1) % n, c(off)));
        }
        SparseMatrix::from_triplets(n, t)
    }

    #[test]
    fn circulant_log_det_matches_eigenvalues() {
        for n in [3usize, 8, 50] {
            let h = circulant(n, 3.0, 1.0);
            let exact: f64 = (0..n)
                .map(|k| libm::log(3.0 + 2.0 * libm::cos(2.0 * core::f64::consts::PI * k as f64 / n as f64)))
                .sum();
            assert!((log_det_definite(&h).unwrap() - exact).abs() < 1e-10 * n as f64);
        }
    }

    #[test]
    fn inertia_counts_eigenvalues() {
        let n = 40;
        let h = circulant(n, 2.0, -1.0);
        let eig: alloc::vec::Vec<f64> =
            (0..n).map(|k| 2.0 - 2.0 * libm::cos(2.0 * core::f64::consts::PI * k as f64 / n as f64)).collect();
        for x in [-0.5, 1e-9, 0.3, 1.0, 2.0001, 3.7, 4.1] {
            let expected = eig.iter().filter(|&&e| e < x).count();
            assert_eq!(count_eigenvalues_below(&h, x).unwrap(), expected, "x = {x}");
        }
        assert!(log_det_definite(&h).is_err());
    }
}
