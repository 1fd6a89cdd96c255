//! Exact arithmetic in cyclotomic fields ℚ(ζₙ).
//!
//! Elements are stored in the power basis `1, ζ, …, ζ^{φ(n)−1}` reduced
//! modulo the cyclotomic polynomial Φₙ. Operands of different conductors are
//! lifted to the lcm. Rational values are always normalized to conductor 1.

use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_complex::Complex64;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// `Φₙ` with integer coefficients, lowest degree first.
pub fn cyclotomic_polynomial(n: u32) -> Vec<i64> {
    assert!(n >= 1);
    // xⁿ − 1 divided by Φ_d for every proper divisor d
    let mut num = vec![0i64; n as usize + 1];
    num[0] = -1;
    num[n as usize] = 1;
    for d in 1..n {
        if n % d == 0 {
            num = exact_div(&num, &cyclotomic_polynomial(d));
        }
    }
    num
}

fn exact_div(num: &[i64], den: &[i64]) -> Vec<i64> {
    // den is monic
    let mut rem = num.to_vec();
    let dd = den.len() - 1;
    let mut q = vec![0i64; rem.len() - dd];
    for k in (0..q.len()).rev() {
        let c = rem[k + dd];
        q[k] = c;
        for (i, &b) in den.iter().enumerate() {
            rem[k + i] -= c * b;
        }
    }
    debug_assert!(rem.iter().all(|&r| r == 0));
    q
}

pub fn euler_phi(n: u32) -> u32 {
    let mut m = n;
    let mut phi = n;
    let mut p = 2;
    while p * p <= m {
        if m % p == 0 {
            while m % p == 0 {
                m /= p;
            }
            phi -= phi / p;
        }
        p += 1;
    }
    if m > 1 {
        phi -= phi / m;
    }
    phi
}

#[derive(Debug)]
struct Field {
    n: u32,
    phi: usize,
    poly: Vec<i64>,
}

impl Field {
    fn new(n: u32) -> Arc<Self> {
        let n = if n == 2 { 1 } else { n };
        let poly = cyclotomic_polynomial(n);
        Arc::new(Field { n, phi: poly.len() - 1, poly })
    }

    /// Reduces a polynomial in ζ modulo Φₙ.
    fn reduce(&self, mut p: Vec<BigRational>) -> Vec<BigRational> {
        let phi = self.phi;
        if p.len() > phi {
            for deg in (phi..p.len()).rev() {
                let c = core::mem::replace(&mut p[deg], BigRational::zero());
                if c.is_zero() {
                    continue;
                }
                for (i, &a) in self.poly[..phi].iter().enumerate() {
                    if a != 0 {
                        let t = &c * BigRational::from_integer(BigInt::from(a));
                        p[deg - phi + i] -= t;
                    }
                }
            }
            p.truncate(phi);
        }
        p.resize(phi, BigRational::zero());
        p
    }
}

/// An element of ℚ(ζₙ).
#[derive(Clone)]
pub struct Cyclotomic {
    field: Arc<Field>,
    coeffs: Vec<BigRational>,
}

impl fmt::Debug for Cyclotomic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Cyclotomic({self})")
    }
}

impl Cyclotomic {
    fn from_parts(field: Arc<Field>, coeffs: Vec<BigRational>) -> Self {
        let coeffs = field.reduce(coeffs);
        let mut x = Cyclotomic { field, coeffs };
        x.normalize();
        x
    }

    fn normalize(&mut self) {
        if self.field.n != 1 && self.coeffs[1..].iter().all(|c| c.is_zero()) {
            let c = self.coeffs[0].clone();
            *self = Cyclotomic::rational(c);
        }
    }

    pub fn rational(q: BigRational) -> Self {
        Cyclotomic { field: Field::new(1), coeffs: vec![q] }
    }

    pub fn from_integer(k: i64) -> Self {
        Self::rational(BigRational::from_integer(BigInt::from(k)))
    }

    pub fn from_fraction(p: i64, q: i64) -> Self {
        Self::rational(BigRational::new(BigInt::from(p), BigInt::from(q)))
    }

    pub fn zero() -> Self {
        Self::from_integer(0)
    }

    pub fn one() -> Self {
        Self::from_integer(1)
    }

    /// `ζₙᵏ`.
    pub fn zeta(n: u32, k: i64) -> Self {
        assert!(n >= 1, "conductor must be positive");
        if n == 2 {
            return Self::from_integer(if k.rem_euclid(2) == 0 { 1 } else { -1 });
        }
        let field = Field::new(n);
        let n = field.n as i64;
        let k = k.rem_euclid(n) as usize;
        let mut p = vec![BigRational::zero(); k + 1];
        p[k] = BigRational::one();
        Self::from_parts(field, p)
    }

    /// Conductor of the field the value is stored in (1 for rationals).
    pub fn conductor(&self) -> u32 {
        self.field.n
    }

    /// Power-basis coefficients.
    pub fn coefficients(&self) -> &[BigRational] {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_zero())
    }

    pub fn as_rational(&self) -> Option<&BigRational> {
        (self.field.n == 1).then(|| &self.coeffs[0])
    }

    /// Re-expresses the value in ℚ(ζₘ), `m` a multiple of the conductor.
    fn lifted(&self, m: u32) -> Vec<BigRational> {
        let n = self.field.n;
        debug_assert_eq!(m % n, 0);
        let step = (m / n) as usize;
        let field = Field::new(m);
        let mut p = vec![BigRational::zero(); (self.coeffs.len() - 1) * step + 1];
        for (k, c) in self.coeffs.iter().enumerate() {
            p[k * step] = c.clone();
        }
        field.reduce(p)
    }

    fn common(a: &Self, b: &Self) -> (Arc<Field>, Vec<BigRational>, Vec<BigRational>) {
        if a.field.n == b.field.n {
            return (a.field.clone(), a.coeffs.clone(), b.coeffs.clone());
        }
        let m = a.field.n.lcm(&b.field.n);
        let field = if m == a.field.n {
            a.field.clone()
        } else if m == b.field.n {
            b.field.clone()
        } else {
            Field::new(m)
        };
        (field, a.lifted(m), b.lifted(m))
    }

    pub fn add_ref(&self, other: &Self) -> Self {
        let (f, mut x, y) = Self::common(self, other);
        for (a, b) in x.iter_mut().zip(y) {
            *a += b;
        }
        Self::from_parts(f, x)
    }

    pub fn sub_ref(&self, other: &Self) -> Self {
        let (f, mut x, y) = Self::common(self, other);
        for (a, b) in x.iter_mut().zip(y) {
            *a -= b;
        }
        Self::from_parts(f, x)
    }

    pub fn mul_ref(&self, other: &Self) -> Self {
        if let Some(q) = self.as_rational() {
            return other.scale(q);
        }
        if let Some(q) = other.as_rational() {
            return self.scale(q);
        }
        let (f, x, y) = Self::common(self, other);
        let mut p = vec![BigRational::zero(); x.len() + y.len() - 1];
        for (i, a) in x.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in y.iter().enumerate() {
                if !b.is_zero() {
                    p[i + j] += a * b;
                }
            }
        }
        Self::from_parts(f, p)
    }

    pub fn scale(&self, q: &BigRational) -> Self {
        if q.is_zero() {
            return Self::zero();
        }
        Cyclotomic { field: self.field.clone(), coeffs: self.coeffs.iter().map(|c| c * q).collect() }
    }

    pub fn neg_ref(&self) -> Self {
        Cyclotomic { field: self.field.clone(), coeffs: self.coeffs.iter().map(|c| -c).collect() }
    }

    /// Galois automorphism `ζ ↦ ζʲ`; `j` must be a unit modulo the conductor.
    pub fn galois(&self, j: i64) -> Result<Self> {
        let n = self.field.n;
        let jm = j.rem_euclid(n as i64);
        if (jm as u32).gcd(&n) != 1 {
            return Err(Error::GaloisIndexNotUnit { j, n });
        }
        if n == 1 {
            return Ok(self.clone());
        }
        let mut p = vec![BigRational::zero(); n as usize];
        for (k, c) in self.coeffs.iter().enumerate() {
            let e = (k as i64 * jm).rem_euclid(n as i64) as usize;
            p[e] += c;
        }
        Ok(Self::from_parts(self.field.clone(), p))
    }

    /// Complex conjugation, `ζ ↦ ζ⁻¹`.
    pub fn conj(&self) -> Self {
        self.galois(-1).expect("−1 is a unit")
    }

    /// Units modulo `n` in increasing order, i.e. the Galois group indices.
    pub fn galois_indices(n: u32) -> Vec<i64> {
        if n <= 2 {
            return vec![1];
        }
        (1..n as i64).filter(|j| (*j as u32).gcd(&n) == 1).collect()
    }

    /// Field norm down to ℚ.
    pub fn norm(&self) -> BigRational {
        let mut acc = Self::one();
        for j in Self::galois_indices(self.field.n) {
            acc = acc.mul_ref(&self.galois(j).expect("unit index"));
        }
        acc.as_rational().cloned().expect("norm is rational")
    }

    /// Multiplicative inverse via `a⁻¹ = (∏_{σ≠1} σ(a)) / N(a)`.
    pub fn inv(&self) -> Option<Self> {
        if self.is_zero() {
            return None;
        }
        if let Some(q) = self.as_rational() {
            return Some(Self::rational(q.recip()));
        }
        let mut others = Self::one();
        for j in Self::galois_indices(self.field.n).into_iter().skip(1) {
            others = others.mul_ref(&self.galois(j).expect("unit index"));
        }
        let norm = self.mul_ref(&others);
        let q = norm.as_rational().expect("norm is rational").recip();
        Some(others.scale(&q))
    }

    pub fn div_ref(&self, other: &Self) -> Option<Self> {
        other.inv().map(|i| self.mul_ref(&i))
    }

    /// Embedding with `ζₙ = e^{2πi/n}`.
    pub fn to_complex(&self) -> Complex64 {
        let n = self.field.n as f64;
        let mut acc = Complex64::new(0.0, 0.0);
        for (k, c) in self.coeffs.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            let v = c.to_f64().unwrap_or(f64::NAN);
            let t = 2.0 * core::f64::consts::PI * k as f64 / n;
            acc += Complex64::new(v * libm::cos(t), v * libm::sin(t));
        }
        acc
    }

    /// Whether every power-basis coefficient is an integer. Since the power
    /// basis is an integral basis, these are the algebraic integers of ℚ(ζₙ).
    pub fn is_algebraic_integer(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_integer())
    }

    /// Parses a sum of terms `p/q`, `p`, `p/q*z^k@n`, `z^k@n` or `-z@n`.
    pub fn parse(input: &str) -> Result<Self> {
        let err = |offset: usize, reason: &str| Error::Parse {
            input: input.to_string(),
            offset,
            reason: reason.to_string(),
        };
        let s: String = input.chars().filter(|c| !c.is_whitespace()).collect();
        if s.is_empty() {
            return Err(err(0, "empty coefficient"));
        }
        let mut acc = Self::zero();
        let mut terms: Vec<(usize, &str, bool)> = Vec::new();
        let mut start = 0;
        let mut negative = false;
        let bytes = s.as_bytes();
        for i in 0..=bytes.len() {
            let boundary = i == bytes.len()
                || ((bytes[i] == b'+' || bytes[i] == b'-') && i > 0 && bytes[i - 1] != b'^');
            if i == 0 && (bytes[0] == b'+' || bytes[0] == b'-') {
                negative = bytes[0] == b'-';
                start = 1;
                continue;
            }
            if boundary {
                terms.push((start, &s[start..i], negative));
                if i < bytes.len() {
                    negative = bytes[i] == b'-';
                    start = i + 1;
                }
            }
        }
        for (offset, term, negative) in terms {
            if term.is_empty() {
                return Err(err(offset, "empty term"));
            }
            let (scalar, root) = match term.find('z') {
                Some(p) => {
                    let scalar = term[..p].trim_end_matches('*');
                    (scalar, Some((&term[p + 1..], offset + p + 1)))
                }
                None => (term, None),
            };
            let q = if scalar.is_empty() {
                BigRational::one()
            } else {
                parse_rational(scalar).ok_or_else(|| err(offset, "bad rational"))?
            };
            let mut value = Self::rational(q);
            if let Some((rest, off)) = root {
                let (power, conductor) =
                    rest.split_once('@').ok_or_else(|| err(off, "missing `@n` conductor"))?;
                let k: i64 = if power.is_empty() {
                    1
                } else {
                    power
                        .strip_prefix('^')
                        .ok_or_else(|| err(off, "expected `^k`"))?
                        .parse()
                        .map_err(|_| err(off, "bad exponent"))?
                };
                let n: u32 = conductor.parse().map_err(|_| err(off, "bad conductor"))?;
                if n == 0 {
                    return Err(err(off, "conductor must be positive"));
                }
                value = value.mul_ref(&Self::zeta(n, k));
            }
            acc = if negative { acc.sub_ref(&value) } else { acc.add_ref(&value) };
        }
        Ok(acc)
    }
}

fn parse_rational(s: &str) -> Option<BigRational> {
    match s.split_once('/') {
        Some((p, q)) => {
            let p: BigInt = p.parse().ok()?;
            let q: BigInt = q.parse().ok()?;
            (!q.is_zero()).then(|| BigRational::new(p, q))
        }
        None => Some(BigRational::from_integer(s.parse().ok()?)),
    }
}

impl PartialEq for Cyclotomic {
    fn eq(&self, other: &Self) -> bool {
        self.sub_ref(other).is_zero()
    }
}

impl Eq for Cyclotomic {}

impl fmt::Display for Cyclotomic {
    /// Renders in the same syntax [`Cyclotomic::parse`] accepts.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (k, c) in self.coeffs.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            let sign = if c.is_negative() { "-" } else if first { "" } else { "+" };
            let a = c.abs();
            if k == 0 {
                write!(f, "{sign}{a}")?;
            } else {
                write!(f, "{sign}{a}*z^{k}@{}", self.field.n)?;
            }
            first = false;
        }
        Ok(())
    }
}

macro_rules! forward_binop {
    ($tr:ident, $m:ident, $imp:ident) => {
        impl $tr<&Cyclotomic> for &Cyclotomic {
            type Output = Cyclotomic;
            fn $m(self, rhs: &Cyclotomic) -> Cyclotomic {
                self.$imp(rhs)
            }
        }
        impl $tr for Cyclotomic {
            type Output = Cyclotomic;
            fn $m(self, rhs: Cyclotomic) -> Cyclotomic {
                self.$imp(&rhs)
            }
        }
    };
}

forward_binop!(Add, add, add_ref);
forward_binop!(Sub, sub, sub_ref);
forward_binop!(Mul, mul, mul_ref);

impl Neg for Cyclotomic {
    type Output = Cyclotomic;
    fn neg(self) -> Cyclotomic {
        self.neg_ref()
    }
}

impl Neg for &Cyclotomic {
    type Output = Cyclotomic;
    fn neg(self) -> Cyclotomic {
        self.neg_ref()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn small_cyclotomic_polynomials() {
        assert_eq!(cyclotomic_polynomial(1), vec![-1, 1]);
        assert_eq!(cyclotomic_polynomial(4), vec![1, 0, 1]);
        assert_eq!(cyclotomic_polynomial(5), vec![1, 1, 1, 1, 1]);
        assert_eq!(cyclotomic_polynomial(12), vec![1, 0, -1, 0, 1]);
        for n in 1..40 {
            assert_eq!(cyclotomic_polynomial(n).len() as u32 - 1, euler_phi(n));
        }
    }

    #[test]
    fn i_squared_is_minus_one() {
        let i = Cyclotomic::zeta(4, 1);
        assert_eq!(&i * &i, Cyclotomic::from_integer(-1));
        assert_eq!((&i * &i).conductor(), 1);
        assert_eq!(i.galois(3).unwrap(), -i.clone());
        assert_eq!(i.conj(), -i);
    }

    #[test]
    fn mixed_conductors_lift() {
        let i = Cyclotomic::zeta(4, 1);
        let w = Cyclotomic::zeta(3, 1);
        let z12 = Cyclotomic::zeta(12, 1);
        // ζ₁₂ = ζ₄ · ζ₃⁻¹ since 1/12 = 1/4 − 1/6 … check via 3·(1/12) = 1/4
        assert_eq!(&(&z12 * &z12) * &z12, i);
        let s = &i + &w;
        assert_eq!(s.conductor(), 12);
        let c = s.to_complex();
        assert!((c.re - (-0.5)).abs() < 1e-14);
        assert!((c.im - (1.0 + 3f64.sqrt() / 2.0)).abs() < 1e-14);
    }

    #[test]
    fn galois_composition_conductor_five() {
        let a = Cyclotomic::parse("1/2 + 3*z^1@5 - 2/3*z^3@5").unwrap();
        assert_eq!(a.galois(2).unwrap().galois(2).unwrap(), a.galois(4).unwrap());
        assert!(matches!(a.galois(5), Err(Error::GaloisIndexNotUnit { .. })));
    }

    #[test]
    fn parse_and_display_round_trip() {
        for s in ["0", "3/4", "-2", "z@4", "1/2*z^3@8 - 1", "2 + 3*z^2@5"] {
            let x = Cyclotomic::parse(s).unwrap();
            let y = Cyclotomic::parse(&x.to_string()).unwrap();
            assert_eq!(x, y, "{s}");
        }
        assert!(Cyclotomic::parse("1/0").is_err());
        assert!(Cyclotomic::parse("z^2").is_err());
    }

    fn arb_element(n: u32) -> impl Strategy<Value = Cyclotomic> {
        proptest::collection::vec((-5i64..=5, 1i64..=4), euler_phi(n) as usize).prop_map(move |cs| {
            cs.into_iter().enumerate().fold(Cyclotomic::zero(), |acc, (k, (p, q))| {
                &acc + &(&Cyclotomic::from_fraction(p, q) * &Cyclotomic::zeta(n, k as i64))
            })
        })
    }

    proptest! {
        #[test]
        fn field_axioms_and_embedding(a in arb_element(5), b in arb_element(8)) {
            let s = &a + &b;
            let p = &a * &b;
            prop_assert!((s.to_complex() - a.to_complex() - b.to_complex()).norm() < 1e-9);
            prop_assert!((p.to_complex() - a.to_complex() * b.to_complex()).norm() < 1e-9 * (1.0 + p.to_complex().norm()));
            if !a.is_zero() {
                prop_assert_eq!(&a * &a.inv().unwrap(), Cyclotomic::one());
            }
            prop_assert!((a.conj().to_complex() - a.to_complex().conj()).norm() < 1e-9);
        }

        #[test]
        fn galois_is_a_ring_map(a in arb_element(7), b in arb_element(7), j in 1i64..7) {
            let ab = (&a * &b).galois(j).unwrap();
            prop_assert_eq!(ab, &a.galois(j).unwrap() * &b.galois(j).unwrap());
        }
    }
}
