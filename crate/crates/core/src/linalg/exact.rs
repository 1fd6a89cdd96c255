//! Sparse matrices over exact fields and Gaussian elimination on them.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt::Debug;

use num_bigint::BigInt;
use num_rational::{BigRational, Ratio};
use num_traits::{CheckedAdd, CheckedDiv, CheckedMul, CheckedSub, One, ToPrimitive, Zero};

use crate::cyclotomic::Cyclotomic;
use crate::error::{Error, Result};

/// Field operations needed by the exact solvers.
pub trait ExactField: Clone + PartialEq + Debug {
    fn zero() -> Self;
    fn one() -> Self;
    fn is_zero(&self) -> bool;
    fn add(&self, other: &Self) -> Self;
    fn sub(&self, other: &Self) -> Self;
    fn mul(&self, other: &Self) -> Self;
    /// `self / other`; `other` is nonzero.
    fn div(&self, other: &Self) -> Self;
    /// `1 / self`; `self` is nonzero.
    fn inv(&self) -> Self {
        Self::one().div(self)
    }
    /// Value whose exactness was lost (see [`SmallRational`]).
    fn is_poisoned(&self) -> bool {
        false
    }
    /// Complex conjugate; the identity on real fields.
    fn conj(&self) -> Self {
        self.clone()
    }
}

/// Rational with `i64` numerator and denominator. An overflowing operation
/// yields the sticky `Overflow` marker, which is never zero, so it reaches
/// every entry computed from it and the caller can fall back to
/// [`BigRational`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SmallRational {
    Value(Ratio<i64>),
    Overflow,
}

impl SmallRational {
    pub fn from_big(q: &BigRational) -> Option<Self> {
        Some(SmallRational::Value(Ratio::new(q.numer().to_i64()?, q.denom().to_i64()?)))
    }

    pub fn to_big(self) -> Option<BigRational> {
        match self {
            SmallRational::Value(v) => Some(BigRational::new(BigInt::from(*v.numer()), BigInt::from(*v.denom()))),
            SmallRational::Overflow => None,
        }
    }

    fn lift(a: &Self, b: &Self, f: impl Fn(&Ratio<i64>, &Ratio<i64>) -> Option<Ratio<i64>>) -> Self {
        match (a, b) {
            (SmallRational::Value(x), SmallRational::Value(y)) => f(x, y).map_or(SmallRational::Overflow, SmallRational::Value),
            _ => SmallRational::Overflow,
        }
    }
}

impl ExactField for SmallRational {
    fn zero() -> Self {
        SmallRational::Value(<Ratio<i64> as Zero>::zero())
    }
    fn one() -> Self {
        SmallRational::Value(<Ratio<i64> as One>::one())
    }
    fn is_zero(&self) -> bool {
        matches!(self, SmallRational::Value(v) if v.is_zero())
    }
    fn add(&self, other: &Self) -> Self {
        Self::lift(self, other, |x, y| x.checked_add(y))
    }
    fn sub(&self, other: &Self) -> Self {
        Self::lift(self, other, |x, y| x.checked_sub(y))
    }
    fn mul(&self, other: &Self) -> Self {
        Self::lift(self, other, |x, y| x.checked_mul(y))
    }
    fn div(&self, other: &Self) -> Self {
        Self::lift(self, other, |x, y| x.checked_div(y))
    }
    fn is_poisoned(&self) -> bool {
        matches!(self, SmallRational::Overflow)
    }
}

impl ExactField for BigRational {
    fn zero() -> Self {
        Zero::zero()
    }
    fn one() -> Self {
        One::one()
    }
    fn is_zero(&self) -> bool {
        Zero::is_zero(self)
    }
    fn add(&self, other: &Self) -> Self {
        self + other
    }
    fn sub(&self, other: &Self) -> Self {
        self - other
    }
    fn mul(&self, other: &Self) -> Self {
        self * other
    }
    fn div(&self, other: &Self) -> Self {
        self / other
    }
}

impl ExactField for Cyclotomic {
    fn zero() -> Self {
        Cyclotomic::zero()
    }
    fn one() -> Self {
        Cyclotomic::one()
    }
    fn is_zero(&self) -> bool {
        Cyclotomic::is_zero(self)
    }
    fn add(&self, other: &Self) -> Self {
        self.add_ref(other)
    }
    fn sub(&self, other: &Self) -> Self {
        self.sub_ref(other)
    }
    fn mul(&self, other: &Self) -> Self {
        self.mul_ref(other)
    }
    fn div(&self, other: &Self) -> Self {
        self.div_ref(other).expect("division by a nonzero element")
    }
    fn conj(&self) -> Self {
        Cyclotomic::conj(self)
    }
}

/// Row-list sparse matrix; every row is sorted by column with no stored zeros.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseExact<T> {
    pub n_rows: usize,
    pub n_cols: usize,
    pub rows: Vec<Vec<(usize, T)>>,
}

impl<T: ExactField> SparseExact<T> {
    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        SparseExact { n_rows, n_cols, rows: vec![Vec::new(); n_rows] }
    }

    pub fn identity(n: usize) -> Self {
        SparseExact { n_rows: n, n_cols: n, rows: (0..n).map(|i| vec![(i, T::one())]).collect() }
    }

    /// Builds from `(row, col, value)` triples; duplicates are summed.
    pub fn from_triplets(n_rows: usize, n_cols: usize, triplets: impl IntoIterator<Item = (usize, usize, T)>) -> Self {
        let mut acc: Vec<BTreeMap<usize, T>> = vec![BTreeMap::new(); n_rows];
        for (r, c, v) in triplets {
            assert!(r < n_rows && c < n_cols, "triplet out of bounds");
            let e = acc[r].entry(c).or_insert_with(T::zero);
            *e = e.add(&v);
        }
        let rows = acc
            .into_iter()
            .map(|m| m.into_iter().filter(|(_, v)| !v.is_zero()).collect())
            .collect();
        SparseExact { n_rows, n_cols, rows }
    }

    pub fn get(&self, r: usize, c: usize) -> T {
        match self.rows[r].binary_search_by_key(&c, |(j, _)| *j) {
            Ok(p) => self.rows[r][p].1.clone(),
            Err(_) => T::zero(),
        }
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(|r| r.len()).sum()
    }

    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.n_cols);
        self.rows
            .iter()
            .map(|row| {
                row.iter().fold(T::zero(), |acc, (j, v)| if x[*j].is_zero() { acc } else { acc.add(&v.mul(&x[*j])) })
            })
            .collect()
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.n_cols, other.n_rows);
        let rows = self
            .rows
            .iter()
            .map(|row| {
                let mut acc: BTreeMap<usize, T> = BTreeMap::new();
                for (k, a) in row {
                    for (j, b) in &other.rows[*k] {
                        let e = acc.entry(*j).or_insert_with(T::zero);
                        *e = e.add(&a.mul(b));
                    }
                }
                acc.into_iter().filter(|(_, v)| !v.is_zero()).collect()
            })
            .collect();
        SparseExact { n_rows: self.n_rows, n_cols: other.n_cols, rows }
    }

    pub fn map<U: ExactField>(&self, f: impl Fn(&T) -> Option<U>) -> Option<SparseExact<U>> {
        let rows = self
            .rows
            .iter()
            .map(|row| row.iter().map(|(j, v)| Some((*j, f(v)?))).collect::<Option<Vec<_>>>())
            .collect::<Option<Vec<_>>>()?;
        Some(SparseExact { n_rows: self.n_rows, n_cols: self.n_cols, rows })
    }

    /// Rank by elimination.
    pub fn rank(&self) -> usize {
        self.try_rank().unwrap_or(0)
    }

    /// Rank, or [`Error::Overflow`] when exactness was lost.
    pub fn try_rank(&self) -> Result<usize> {
        Echelon::new(self, &[]).map(|e| e.pivots.len())
    }

    /// Canonical kernel basis: one vector per non-pivot column `f`, equal to
    /// 1 at `f` and 0 at the other non-pivot columns. `None` when the
    /// nullity exceeds `max`.
    pub fn kernel_basis(&self, max: usize) -> Result<Option<Vec<(usize, Vec<T>)>>> {
        let ech = Echelon::new(self, &[])?;
        let mut is_pivot = vec![false; self.n_cols];
        for (c, _, _) in &ech.pivots {
            is_pivot[*c] = true;
        }
        let free: Vec<usize> = (0..self.n_cols).filter(|&c| !is_pivot[c]).collect();
        if free.len() > max {
            return Ok(None);
        }
        let basis: Vec<(usize, Vec<T>)> = free.iter().map(|&f| (f, ech.kernel_vector(self.n_cols, f))).collect();
        if basis.iter().flat_map(|b| &b.1).any(T::is_poisoned) {
            return Err(Error::Overflow);
        }
        Ok(Some(basis))
    }

    /// A solution `X` of `A X = B` for each column of `B` (free variables set
    /// to zero), or [`Error::Inconsistent`].
    pub fn solve_consistent(&self, rhs: &[Vec<T>]) -> Result<Vec<Vec<T>>> {
        for b in rhs {
            if b.len() != self.n_rows {
                return Err(Error::DimensionMismatch("right-hand side length".into()));
            }
        }
        let ech = Echelon::new(self, rhs)?;
        let xs: Vec<Vec<T>> = (0..rhs.len()).map(|j| ech.back_substitute(self.n_cols, j)).collect();
        if xs.iter().flatten().any(T::is_poisoned) {
            return Err(Error::Overflow);
        }
        Ok(xs)
    }
}

/// Row-echelon form of `[A | B]`: pivot column, inverse of the leading
/// entry, and the pivot row.
struct Echelon<T> {
    n: usize,
    pivots: Vec<(usize, T, Vec<(usize, T)>)>,
}

fn axpy<T: ExactField>(row: &[(usize, T)], f: &T, pivot: &[(usize, T)]) -> Vec<(usize, T)> {
    // row − f·pivot, both sorted
    let mut out = Vec::with_capacity(row.len() + pivot.len());
    let (mut i, mut j) = (0, 0);
    while i < row.len() || j < pivot.len() {
        let ci = row.get(i).map_or(usize::MAX, |e| e.0);
        let cj = pivot.get(j).map_or(usize::MAX, |e| e.0);
        if ci < cj {
            out.push(row[i].clone());
            i += 1;
        } else if cj < ci {
            out.push((cj, T::zero().sub(&f.mul(&pivot[j].1))));
            j += 1;
        } else {
            let v = row[i].1.sub(&f.mul(&pivot[j].1));
            if !v.is_zero() {
                out.push((ci, v));
            }
            i += 1;
            j += 1;
        }
    }
    out
}

impl<T: ExactField> Echelon<T> {
    fn new(a: &SparseExact<T>, rhs: &[Vec<T>]) -> Result<Self> {
        let n = a.n_cols;
        // rows bucketed by their leading column
        let mut buckets: Vec<Vec<Vec<(usize, T)>>> = (0..n + rhs.len()).map(|_| Vec::new()).collect();
        for (r, row) in a.rows.iter().enumerate() {
            let mut full = row.clone();
            for (j, b) in rhs.iter().enumerate() {
                if !b[r].is_zero() {
                    full.push((n + j, b[r].clone()));
                }
            }
            if let Some(&(c, _)) = full.first() {
                buckets[c].push(full);
            }
        }
        let mut pivots = Vec::new();
        for c in 0..buckets.len() {
            let mut rows = core::mem::take(&mut buckets[c]);
            if rows.is_empty() {
                continue;
            }
            if c >= n {
                let poisoned = rows.iter().flatten().any(|(_, v)| v.is_poisoned());
                return Err(if poisoned { Error::Overflow } else { Error::Inconsistent });
            }
            // shortest row as pivot keeps fill-in low
            let best = (0..rows.len()).min_by_key(|&i| rows[i].len()).unwrap();
            let pivot = rows.swap_remove(best);
            let inv = pivot[0].1.inv();
            for row in rows {
                // the leading entries cancel by construction
                let f = row[0].1.mul(&inv);
                let reduced = axpy(&row[1..], &f, &pivot[1..]);
                if let Some(&(c2, _)) = reduced.first() {
                    buckets[c2].push(reduced);
                }
            }
            pivots.push((c, inv, pivot));
        }
        let poisoned = |(_, inv, row): &(usize, T, Vec<(usize, T)>)| inv.is_poisoned() || row.iter().any(|(_, v)| v.is_poisoned());
        if pivots.iter().any(poisoned) {
            return Err(Error::Overflow);
        }
        Ok(Echelon { n, pivots })
    }

    fn kernel_vector(&self, n_cols: usize, free: usize) -> Vec<T> {
        let mut x = vec![T::zero(); n_cols];
        x[free] = T::one();
        for (c, inv, row) in self.pivots.iter().rev() {
            let mut acc = T::zero();
            for (j, v) in &row[1..] {
                if !x[*j].is_zero() {
                    acc = acc.sub(&v.mul(&x[*j]));
                }
            }
            x[*c] = acc.mul(inv);
        }
        x
    }

    fn back_substitute(&self, n_cols: usize, rhs_index: usize) -> Vec<T> {
        let mut x = vec![T::zero(); n_cols];
        let target = self.n + rhs_index;
        for (c, inv, row) in self.pivots.iter().rev() {
            let mut acc = T::zero();
            for (j, v) in &row[1..] {
                if *j < self.n {
                    if !x[*j].is_zero() {
                        acc = acc.sub(&v.mul(&x[*j]));
                    }
                } else if *j == target {
                    acc = acc.add(v);
                }
            }
            x[*c] = acc.mul(inv);
        }
        x
    }
}
