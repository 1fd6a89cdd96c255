//! Arithmetic modulo the primes `2⁶¹ − c` and a kernel projection for
//! rational symmetric matrices that is computed modulo primes, lifted back
//! to ℚ, and then verified in exact integer arithmetic.

use alloc::vec;
use alloc::vec::Vec;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use super::exact::{ExactField, SparseExact};

const MASK: u128 = (1 << 61) - 1;

/// Residue modulo `2⁶¹ − C`; `C` must make the modulus prime.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ModP<const C: u64>(pub u64);

impl<const C: u64> ModP<C> {
    pub const P: u64 = (1 << 61) - C;

    pub fn new(x: i128) -> Self {
        ModP(x.rem_euclid(Self::P as i128) as u64)
    }

    fn reduce(t: u128) -> u64 {
        let t = (t >> 61) * C as u128 + (t & MASK);
        let t = (t >> 61) * C as u128 + (t & MASK);
        let r = t as u64;
        if r >= Self::P {
            r - Self::P
        } else {
            r
        }
    }
}

impl<const C: u64> ExactField for ModP<C> {
    fn zero() -> Self {
        ModP(0)
    }
    fn one() -> Self {
        ModP(1)
    }
    fn is_zero(&self) -> bool {
        self.0 == 0
    }
    fn add(&self, other: &Self) -> Self {
        let s = self.0 + other.0;
        ModP(if s >= Self::P { s - Self::P } else { s })
    }
    fn sub(&self, other: &Self) -> Self {
        ModP(if self.0 >= other.0 { self.0 - other.0 } else { self.0 + Self::P - other.0 })
    }
    fn mul(&self, other: &Self) -> Self {
        ModP(Self::reduce(self.0 as u128 * other.0 as u128))
    }
    fn div(&self, other: &Self) -> Self {
        self.mul(&other.inv())
    }
    fn inv(&self) -> Self {
        let (mut r0, mut r1) = (Self::P as i128, self.0 as i128);
        let (mut s0, mut s1) = (0i128, 1i128);
        while r1 != 0 {
            let q = r0 / r1;
            (r0, r1) = (r1, r0 - q * r1);
            (s0, s1) = (s1, s0 - q * s1);
        }
        ModP::new(s0)
    }
}

type IntRows = Vec<Vec<(usize, i128)>>;

fn to_integer_rows(m: &SparseExact<BigRational>) -> Option<(IntRows, i128)> {
    let mut den = BigInt::one();
    for (_, v) in m.rows.iter().flatten() {
        if !v.denom().is_one() {
            den = den.lcm(v.denom());
        }
    }
    let unit = den.is_one();
    let rows = m
        .rows
        .iter()
        .map(|row| {
            row.iter()
                .map(|(j, v)| {
                    let x = if unit { v.numer().to_i64()? } else { (v.numer() * (&den / v.denom())).to_i64()? };
                    Some((*j, x as i128))
                })
                .collect::<Option<Vec<_>>>()
        })
        .collect::<Option<Vec<_>>>()?;
    Some((rows, den.to_i64()? as i128))
}

fn square(rows: &IntRows, n: usize) -> Option<IntRows> {
    let mut acc = vec![0i128; n];
    let mut touched = Vec::new();
    let mut out = Vec::with_capacity(rows.len());
    for row in rows {
        for (k, a) in row {
            for (j, b) in &rows[*k] {
                if acc[*j] == 0 {
                    touched.push(*j);
                }
                acc[*j] = acc[*j].checked_add(a.checked_mul(*b)?)?;
            }
        }
        touched.sort_unstable();
        touched.dedup();
        out.push(touched.iter().filter(|&&j| acc[j] != 0).map(|&j| (j, acc[j])).collect());
        for &j in &touched {
            acc[j] = 0;
        }
        touched.clear();
    }
    Some(out)
}

fn matvec<V: Copy + Into<i128>>(rows: &[Vec<(usize, V)>], x: &[i128]) -> Option<Vec<i128>> {
    rows.iter()
        .map(|row| row.iter().try_fold(0i128, |s, (j, v)| s.checked_add((*v).into().checked_mul(x[*j])?)))
        .collect()
}

fn column(rows: &IntRows, t: usize) -> Vec<i128> {
    rows.iter()
        .map(|row| row.binary_search_by_key(&t, |e| e.0).map_or(0, |p| row[p].1))
        .collect()
}

/// Canonical solutions (free variables zero) of `S y = b` modulo `2⁶¹ − C`.
fn solve_mod<const C: u64>(s: &IntRows, n: usize, rhs: &[Vec<i128>]) -> Option<Vec<Vec<u64>>> {
    let m = SparseExact {
        n_rows: n,
        n_cols: n,
        rows: s
            .iter()
            .map(|row| row.iter().map(|(j, v)| (*j, ModP::<C>::new(*v))).filter(|e| e.1 .0 != 0).collect())
            .collect(),
    };
    let b: Vec<Vec<ModP<C>>> = rhs.iter().map(|v| v.iter().map(|x| ModP::new(*x)).collect()).collect();
    let ys = m.solve_consistent(&b).ok()?;
    Some(ys.into_iter().map(|y| y.into_iter().map(|v| v.0).collect()).collect())
}

/// `a/b ≡ r (mod m)` with `|a|, b ≤ √(m/2)`.
fn rational_reconstruct(r: &BigInt, m: &BigInt) -> Option<(BigInt, BigInt)> {
    let bound = (m / 2u32).sqrt();
    let (mut r0, mut r1) = (m.clone(), r.mod_floor(m));
    let (mut t0, mut t1) = (BigInt::zero(), BigInt::one());
    while r1 > bound {
        let q = &r0 / &r1;
        let r2 = &r0 - &q * &r1;
        let t2 = &t0 - &q * &t1;
        (r0, r1, t0, t1) = (r1, r2, t1, t2);
    }
    if t1.is_zero() || t1.abs() > bound {
        return None;
    }
    if t1.is_negative() {
        Some((-r1, -t1))
    } else {
        Some((r1, t1))
    }
}

/// Lifts residues to an integer vector `Y` and a denominator `L` with
/// `Y/L ≡ residues`; entries share denominators as they are discovered.
fn lift(residues: &[BigInt], m: &BigInt) -> Option<(Vec<i128>, i128)> {
    let half = m / 2u32;
    let bound = half.sqrt();
    let mut l = BigInt::one();
    let mut entries: Vec<(BigInt, BigInt)> = Vec::with_capacity(residues.len());
    for r in residues {
        // try the running denominator first
        let mut v = (r * &l).mod_floor(m);
        if v > half {
            v -= m;
        }
        if v.abs() <= bound {
            entries.push((v, l.clone()));
            continue;
        }
        let (a, b) = rational_reconstruct(&(r * &l), m)?;
        l *= &b;
        entries.push((a, l.clone()));
    }
    let y = entries
        .into_iter()
        .map(|(a, den)| (a * (&l / den)).to_i128())
        .collect::<Option<Vec<_>>>()?;
    Some((y, l.to_i128()?))
}

/// [`lift`] for a single prime below `2⁶⁴`, in machine words while the
/// running denominator stays below `2⁶⁴`.
fn lift_word(residues: &[u64], p: u64) -> Option<(Vec<i128>, i128)> {
    let m = p as u128;
    let half = m / 2;
    let bound = libm::sqrt(half as f64) as u128;
    let mut l: u128 = 1;
    let mut entries: Vec<(i128, u128)> = Vec::with_capacity(residues.len());
    for &r in residues {
        let v = (r as u128 * l) % m;
        let s = if v > half { v as i128 - m as i128 } else { v as i128 };
        if s.unsigned_abs() <= bound {
            entries.push((s, l));
            continue;
        }
        let (a, b) = rational_reconstruct(&BigInt::from(v), &BigInt::from(m))?;
        l = l.checked_mul(b.to_u128()?).filter(|&l| l < 1 << 64)?;
        entries.push((a.to_i128()?, l));
    }
    let y = entries
        .into_iter()
        .map(|(a, den)| a.checked_mul((l / den) as i128))
        .collect::<Option<Vec<_>>>()?;
    Some((y, l as i128))
}

/// Kernel bases with at most this many vectors take the basis route in
/// [`certified_kernel_pairing`]; larger kernels use the squared system.
pub const SMALL_KERNEL: usize = 16;

/// Canonical kernel basis modulo `2⁶¹ − C`, if its size is at most `max`.
fn kernel_mod<const C: u64, V: Copy + Into<i128>>(
    rows: &[Vec<(usize, V)>],
    n: usize,
    max: usize,
) -> Option<Vec<(usize, Vec<u64>)>> {
    let m = SparseExact {
        n_rows: n,
        n_cols: n,
        rows: rows
            .iter()
            .map(|row| row.iter().map(|(j, v)| (*j, ModP::<C>::new((*v).into()))).filter(|e| e.1 .0 != 0).collect())
            .collect(),
    };
    let basis = m.kernel_basis(max).ok()??;
    Some(basis.into_iter().map(|(f, v)| (f, v.into_iter().map(|x| x.0).collect())).collect())
}

/// Exact integer kernel basis of `rows`, certified complete: every vector
/// is checked to lie in the kernel over ℤ, the vectors are independent
/// (each is 1 at its own free column and 0 at the others), and their count
/// equals the nullity modulo a prime, which bounds the rational nullity
/// from above.
fn certified_kernel<V: Copy + Into<i128>>(rows: &[Vec<(usize, V)>], n: usize) -> Option<Vec<Vec<i128>>> {
    let basis = kernel_mod::<1, V>(rows, n, SMALL_KERNEL)?;
    let free: Vec<usize> = basis.iter().map(|b| b.0).collect();
    let mut out = Vec::with_capacity(basis.len());
    for (f, v) in basis {
        let (y, _) = lift_word(&v, ModP::<1>::P)?;
        let independent = free.iter().all(|&g| (y[g] != 0) == (g == f));
        if !independent || matvec(rows, &y)?.iter().any(|&e| e != 0) {
            return None;
        }
        out.push(y);
    }
    Some(out)
}

/// `x = N (NᵀN)⁻¹ Nᵀ δ_t` for an exact kernel basis `N`.
fn project_with_basis(basis: &[Vec<i128>], partners: &[(usize, Vec<usize>)]) -> Option<(BigRational, BigRational)> {
    let k = basis.len();
    let mut std = <BigRational as Zero>::zero();
    let mut raw = <BigRational as Zero>::zero();
    if k == 0 {
        return Some((std, raw));
    }
    let mut gram = Vec::with_capacity(k * k);
    for a in 0..k {
        for b in 0..k {
            let s = basis[a].iter().zip(&basis[b]).try_fold(0i128, |s, (x, y)| s.checked_add(x.checked_mul(*y)?))?;
            gram.push((a, b, BigRational::from_integer(BigInt::from(s))));
        }
    }
    let gram = SparseExact::from_triplets(k, k, gram);
    let rhs: Vec<Vec<BigRational>> = partners
        .iter()
        .map(|(t, _)| basis.iter().map(|v| BigRational::from_integer(BigInt::from(v[*t]))).collect())
        .collect();
    let coeffs = gram.solve_consistent(&rhs).ok()?;
    for ((t, hs), c) in partners.iter().zip(coeffs) {
        let x = |s: usize| {
            basis.iter().zip(&c).fold(<BigRational as Zero>::zero(), |acc, (v, ca)| {
                if v[s] == 0 {
                    acc
                } else {
                    acc + ca * BigRational::from_integer(BigInt::from(v[s]))
                }
            })
        };
        std += x(*t);
        for &s in hs {
            raw += x(s);
        }
    }
    Some((std, raw))
}

/// For each `(t, partners)`: the orthogonal projection `x` of `δ_t` onto the
/// kernel of the symmetric rational matrix `h`. Small kernels go through a
/// certified exact basis. Otherwise `x = δ_t − h y` with `h² y = h δ_t`,
/// where `y` is found modulo one or two primes, lifted to ℚ, and accepted
/// only when `h² y = h δ_t` holds exactly.
/// Returns `(Σ_t x[t], Σ_t Σ_s x[s])`, or `None` when the entries do not fit
/// machine words or the lift does not verify.
pub fn certified_kernel_pairing(
    h: &SparseExact<BigRational>,
    partners: &[(usize, Vec<usize>)],
) -> Option<(BigRational, BigRational)> {
    let (rows, den) = to_integer_rows(h)?;
    pairing_from_rows(&rows, den, partners)
}

/// [`certified_kernel_pairing`] for the square matrix `rows / den` with
/// machine-word entries.
pub fn certified_kernel_pairing_words(
    rows: &[Vec<(usize, i64)>],
    den: i64,
    partners: &[(usize, Vec<usize>)],
) -> Option<(BigRational, BigRational)> {
    if let Some(basis) = certified_kernel(rows, rows.len()) {
        return project_with_basis(&basis, partners);
    }
    let wide: IntRows = rows.iter().map(|row| row.iter().map(|&(j, v)| (j, v as i128)).collect()).collect();
    squared_pairing(&wide, den as i128, partners)
}

fn pairing_from_rows(rows: &IntRows, den: i128, partners: &[(usize, Vec<usize>)]) -> Option<(BigRational, BigRational)> {
    if let Some(basis) = certified_kernel(rows, rows.len()) {
        return project_with_basis(&basis, partners);
    }
    squared_pairing(rows, den, partners)
}

fn squared_pairing(rows: &IntRows, den: i128, partners: &[(usize, Vec<usize>)]) -> Option<(BigRational, BigRational)> {
    let n = rows.len();
    let sq = square(rows, n)?;
    // h = rows/den, so h² y = h δ_t reads rows² y = den · rows δ_t
    let rhs: Vec<Vec<i128>> = partners
        .iter()
        .map(|(t, _)| column(rows, *t).into_iter().map(|v| v.checked_mul(den)).collect::<Option<Vec<_>>>())
        .collect::<Option<_>>()?;
    let p1 = BigInt::from(ModP::<1>::P);
    let p2 = BigInt::from(ModP::<31>::P);
    let first = solve_mod::<1>(&sq, n, &rhs)?;
    let mut second: Option<Vec<Vec<u64>>> = None;
    let mut solutions = Vec::with_capacity(partners.len());
    for (idx, b) in rhs.iter().enumerate() {
        let mut lifted = lift_word(&first[idx], ModP::<1>::P).filter(|(y, l)| verifies(&sq, y, *l, b));
        if lifted.is_none() {
            if second.is_none() {
                second = Some(solve_mod::<31>(&sq, n, &rhs)?);
            }
            let m = &p1 * &p2;
            let inv = p1.modpow(&(&p2 - 2u32), &p2);
            let combined: Vec<BigInt> = first[idx]
                .iter()
                .zip(&second.as_ref().unwrap()[idx])
                .map(|(&a, &b)| {
                    let (a, b) = (BigInt::from(a), BigInt::from(b));
                    let k = ((b - &a) * &inv).mod_floor(&p2);
                    a + k * &p1
                })
                .collect();
            lifted = lift(&combined, &m).filter(|(y, l)| verifies(&sq, y, *l, b));
        }
        solutions.push(lifted?);
    }
    let mut std = <BigRational as Zero>::zero();
    let mut raw = <BigRational as Zero>::zero();
    for ((t, hs), (y, l)) in partners.iter().zip(solutions) {
        let hy = matvec(&rows, &y)?;
        let scale = BigInt::from(l) * BigInt::from(den);
        let x = |s: usize| {
            let delta = if s == *t { <BigRational as One>::one() } else { <BigRational as Zero>::zero() };
            delta - BigRational::new(BigInt::from(hy[s]), scale.clone())
        };
        std += x(*t);
        for &s in hs {
            raw += x(s);
        }
    }
    Some((std, raw))
}

fn verifies(sq: &IntRows, y: &[i128], l: i128, b: &[i128]) -> bool {
    match matvec(sq, y) {
        Some(lhs) => lhs.iter().zip(b).all(|(u, v)| v.checked_mul(l) == Some(*u)),
        None => false,
    }
}
