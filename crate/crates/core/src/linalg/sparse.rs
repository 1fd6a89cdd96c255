//! Sparse complex matrices in row-list form.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;
use num_complex::Complex64;

/// Square sparse matrix; rows sorted by column, no stored zeros.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix {
    pub n: usize,
    pub rows: Vec<Vec<(usize, Complex64)>>,
}

impl SparseMatrix {
    pub fn zeros(n: usize) -> Self {
        SparseMatrix { n, rows: vec![Vec::new(); n] }
    }

    pub fn identity(n: usize) -> Self {
        SparseMatrix { n, rows: (0..n).map(|i| vec![(i, Complex64::new(1.0, 0.0))]).collect() }
    }

    /// Builds from `(row, col, value)` triples; duplicates are summed and
    /// exact zeros dropped.
    pub fn from_triplets(n: usize, triplets: impl IntoIterator<Item = (usize, usize, Complex64)>) -> Self {
        let mut rows: Vec<Vec<(usize, Complex64)>> = vec![Vec::new(); n];
        for (r, c, v) in triplets {
            assert!(r < n && c < n, "triplet out of bounds");
            rows[r].push((c, v));
        }
        for row in &mut rows {
            row.sort_by_key(|e| e.0);
            let mut merged: Vec<(usize, Complex64)> = Vec::with_capacity(row.len());
            for &(c, v) in row.iter() {
                match merged.last_mut() {
                    Some((lc, lv)) if *lc == c => *lv += v,
                    _ => merged.push((c, v)),
                }
            }
            merged.retain(|(_, v)| v.re != 0.0 || v.im != 0.0);
            *row = merged;
        }
        SparseMatrix { n, rows }
    }

    pub fn get(&self, r: usize, c: usize) -> Complex64 {
        match self.rows[r].binary_search_by_key(&c, |e| e.0) {
            Ok(p) => self.rows[r][p].1,
            Err(_) => Complex64::new(0.0, 0.0),
        }
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(|r| r.len()).sum()
    }

    pub fn is_real(&self) -> bool {
        self.rows.iter().flatten().all(|(_, v)| v.im == 0.0)
    }

    pub fn matvec(&self, x: &[Complex64]) -> Vec<Complex64> {
        self.rows.iter().map(|row| row.iter().map(|(j, v)| v * x[*j]).sum()).collect()
    }

    pub fn matvec_real(&self, x: &[f64]) -> Vec<f64> {
        self.rows.iter().map(|row| row.iter().map(|(j, v)| v.re * x[*j]).sum()).collect()
    }

    /// Largest `|Hᵢⱼ − conj(Hⱼᵢ)|`.
    pub fn hermitian_deviation(&self) -> f64 {
        let mut dev: f64 = 0.0;
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, v) in row {
                dev = dev.max((v - self.get(j, i).conj()).norm());
            }
        }
        dev
    }

    /// Largest absolute row sum, an upper bound for the operator norm of a
    /// Hermitian matrix.
    pub fn max_row_sum(&self) -> f64 {
        self.rows.iter().map(|r| r.iter().map(|(_, v)| v.norm()).sum::<f64>()).fold(0.0, f64::max)
    }

    pub fn to_dense_real(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, v) in row {
                m[(i, j)] = v.re;
            }
        }
        m
    }

    pub fn to_dense_complex(&self) -> DMatrix<Complex64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, v) in row {
                m[(i, j)] = v;
            }
        }
        m
    }

    /// Entries rounded to integers if every entry is an integer-valued real.
    pub fn to_integer_dense(&self) -> Option<Vec<i64>> {
        let mut out = vec![0i64; self.n * self.n];
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, v) in row {
                if v.im != 0.0 || libm::trunc(v.re) != v.re || v.re.abs() > 9.0e15 {
                    return None;
                }
                out[i * self.n + j] = v.re as i64;
            }
        }
        Some(out)
    }

    /// Principal submatrix on the given sorted index set.
    pub fn principal_submatrix(&self, keep: &[usize]) -> SparseMatrix {
        let mut pos = vec![usize::MAX; self.n];
        for (k, &i) in keep.iter().enumerate() {
            pos[i] = k;
        }
        let rows = keep
            .iter()
            .map(|&i| self.rows[i].iter().filter(|(j, _)| pos[*j] != usize::MAX).map(|&(j, v)| (pos[j], v)).collect())
            .collect();
        SparseMatrix { n: keep.len(), rows }
    }

    pub fn shifted(&self, sigma: f64) -> SparseMatrix {
        let mut t: Vec<(usize, usize, Complex64)> =
            self.rows.iter().enumerate().flat_map(|(i, r)| r.iter().map(move |&(j, v)| (i, j, v))).collect();
        for i in 0..self.n {
            t.push((i, i, Complex64::new(-sigma, 0.0)));
        }
        SparseMatrix::from_triplets(self.n, t)
    }
}
