//! Exact characteristic polynomials of integer matrices by Hessenberg
//! reduction modulo word-sized primes and Chinese remaindering.

use alloc::vec;
use alloc::vec::Vec;

use num_bigint::{BigInt, BigUint};
use num_traits::{One, Signed, Zero};

fn mul_mod(a: u64, b: u64, p: u64) -> u64 {
    ((a as u128 * b as u128) % p as u128) as u64
}

fn pow_mod(mut a: u64, mut e: u64, p: u64) -> u64 {
    let mut r = 1u64;
    a %= p;
    while e > 0 {
        if e & 1 == 1 {
            r = mul_mod(r, a, p);
        }
        a = mul_mod(a, a, p);
        e >>= 1;
    }
    r
}

/// Deterministic Miller–Rabin for 64-bit integers.
pub fn is_prime_u64(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    const BASES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];
    for p in BASES {
        if n % p == 0 {
            return n == p;
        }
    }
    let mut d = n - 1;
    let mut s = 0;
    while d % 2 == 0 {
        d /= 2;
        s += 1;
    }
    'outer: for a in BASES {
        let mut x = pow_mod(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mul_mod(x, x, n);
            if x == n - 1 {
                continue 'outer;
            }
        }
        return false;
    }
    true
}

/// Primes below 2⁶², largest first.
fn primes() -> impl Iterator<Item = u64> {
    let mut candidate = (1u64 << 62) - 1;
    core::iter::from_fn(move || {
        while candidate > 3 {
            let c = candidate;
            candidate -= 2;
            if is_prime_u64(c) {
                return Some(c);
            }
        }
        None
    })
}

fn inv_mod(a: u64, p: u64) -> u64 {
    pow_mod(a, p - 2, p)
}

/// Characteristic polynomial `det(xI − A)` modulo `p`, lowest degree first.
pub fn charpoly_mod(a: &[i64], n: usize, p: u64) -> Vec<u64> {
    let mut h: Vec<u64> = a.iter().map(|&v| v.rem_euclid(p as i64) as u64).collect();
    let at = |i: usize, j: usize| i * n + j;
    // similarity reduction to upper Hessenberg form
    for m in 1..n.saturating_sub(1) {
        let Some(piv) = (m..n).find(|&i| h[at(i, m - 1)] != 0) else { continue };
        if piv != m {
            for j in 0..n {
                h.swap(at(piv, j), at(m, j));
            }
            for i in 0..n {
                h.swap(at(i, piv), at(i, m));
            }
        }
        let inv = inv_mod(h[at(m, m - 1)], p);
        for i in m + 1..n {
            let f = mul_mod(h[at(i, m - 1)], inv, p);
            if f == 0 {
                continue;
            }
            // row_i -= f·row_m, then col_m += f·col_i
            for j in 0..n {
                let t = mul_mod(f, h[at(m, j)], p);
                h[at(i, j)] = (h[at(i, j)] + p - t) % p;
            }
            for r in 0..n {
                let t = mul_mod(f, h[at(r, i)], p);
                h[at(r, m)] = (h[at(r, m)] + t) % p;
            }
        }
    }
    // p_k(x) = (x − h_kk) p_{k−1}(x) − Σ_{i<k} h_ik (∏_{j=i+1}^{k} h_{j,j−1}) p_{i−1}(x)
    let mut polys: Vec<Vec<u64>> = vec![vec![1]];
    for k in 0..n {
        let prev = &polys[k];
        let mut next = vec![0u64; k + 2];
        for (d, &c) in prev.iter().enumerate() {
            next[d + 1] = (next[d + 1] + c) % p;
            let t = mul_mod(c, h[at(k, k)], p);
            next[d] = (next[d] + p - t) % p;
        }
        let mut prod = 1u64;
        for i in (0..k).rev() {
            prod = mul_mod(prod, h[at(i + 1, i)], p);
            if prod == 0 {
                break;
            }
            let coef = mul_mod(h[at(i, k)], prod, p);
            if coef == 0 {
                continue;
            }
            for (d, &c) in polys[i].iter().enumerate() {
                let t = mul_mod(coef, c, p);
                next[d] = (next[d] + p - t) % p;
            }
        }
        polys.push(next);
    }
    polys.pop().unwrap()
}

/// `∏ᵢ (1 + ‖rowᵢ‖₂)`, rounded up, bounds every characteristic-polynomial
/// coefficient (sums of principal minors, each bounded by Hadamard).
pub fn coefficient_bound(a: &[i64], n: usize) -> BigUint {
    let mut bound = BigUint::one();
    for i in 0..n {
        let sq: u128 = a[i * n..(i + 1) * n].iter().map(|&v| (v as i128 * v as i128) as u128).sum();
        // ⌈√sq⌉ + 1
        let mut r = libm::sqrt(sq as f64) as u128;
        while r * r < sq {
            r += 1;
        }
        bound *= BigUint::from(r + 1);
    }
    bound
}

/// Exact integer characteristic polynomial `det(xI − A)`, lowest degree first.
pub fn charpoly_integer(a: &[i64], n: usize) -> Vec<BigInt> {
    assert_eq!(a.len(), n * n);
    let limit = coefficient_bound(a, n) * 2u32 + 1u32;
    let mut modulus = BigUint::one();
    let mut residues: Vec<BigUint> = vec![BigUint::zero(); n + 1];
    for p in primes() {
        if modulus > limit {
            break;
        }
        let r = charpoly_mod(a, n, p);
        let pb = BigUint::from(p);
        // x ≡ residues (mod modulus), x ≡ r (mod p)
        let m_mod_p = (&modulus % &pb).iter_u64_digits().next().unwrap_or(0);
        let inv = inv_mod(m_mod_p, p);
        for (acc, &rp) in residues.iter_mut().zip(&r) {
            let cur = (&*acc % &pb).iter_u64_digits().next().unwrap_or(0);
            let diff = (rp + p - cur) % p;
            let t = mul_mod(diff, inv, p);
            *acc += &modulus * BigUint::from(t);
        }
        modulus *= pb;
    }
    let half = &modulus >> 1u32;
    residues
        .into_iter()
        .map(|r| if r > half { BigInt::from(r) - BigInt::from(modulus.clone()) } else { BigInt::from(r) })
        .collect()
}

/// `(multiplicity of the root 0, lowest nonzero coefficient)` of an integer
/// characteristic polynomial.
pub fn lowest_nonzero(poly: &[BigInt]) -> (usize, BigInt) {
    let k = poly.iter().position(|c| !c.is_zero()).expect("monic polynomial");
    (k, poly[k].clone())
}

/// Natural logarithm of a nonzero big integer's absolute value.
pub fn ln_abs(x: &BigInt) -> f64 {
    let x = x.abs();
    let bits = x.bits();
    if bits <= 1000 {
        let (_, digits) = x.to_u64_digits();
        let mut v = 0.0f64;
        for d in digits.iter().rev() {
            v = v * 18446744073709551616.0 + *d as f64;
        }
        if v.is_finite() {
            return libm::log(v);
        }
    }
    let shift = bits - 64;
    let top: BigInt = &x >> shift;
    let (_, digits) = top.to_u64_digits();
    libm::log(digits[0] as f64) + shift as f64 * core::f64::consts::LN_2
}

#[cfg(test)]
mod tests {
    use super::*;

    fn big(v: &[i64]) -> Vec<BigInt> {
        v.iter().map(|&x| BigInt::from(x)).collect()
    }

    #[test]
    fn primality() {
        assert!(is_prime_u64(2));
        assert!(is_prime_u64(1_000_000_007));
        assert!(!is_prime_u64(1_000_000_007 * 3));
        assert!(is_prime_u64((1u64 << 61) - 1));
        let p = primes().next().unwrap();
        assert!(p < 1 << 62 && is_prime_u64(p));
    }

    #[test]
    fn small_polynomials() {
        // [[2,2],[2,2]]: x² − 4x
        assert_eq!(charpoly_integer(&[2, 2, 2, 2], 2), big(&[0, -4, 1]));
        // identity of size 3: (x − 1)³
        let id = [1, 0, 0, 0, 1, 0, 0, 0, 1];
        assert_eq!(charpoly_integer(&id, 3), big(&[-1, 3, -3, 1]));
        // a non-symmetric matrix needing a row swap
        let a = [0, 1, 0, 0, 0, 1, 6, -11, 6];
        assert_eq!(charpoly_integer(&a, 3), big(&[-6, 11, -6, 1]));
    }

    #[test]
    fn circulant_laplacian_pseudodeterminant() {
        for n in [3usize, 5, 8, 17, 40] {
            let mut a = vec![0i64; n * n];
            for i in 0..n {
                a[i * n + i] += 2;
                a[i * n + (i + 1) % n] -= 1;
                a[i * n + (i + n - 1) % n] -= 1;
            }
            let poly = charpoly_integer(&a, n);
            let (k, c) = lowest_nonzero(&poly);
            assert_eq!(k, 1);
            assert_eq!(c.abs(), BigInt::from((n * n) as i64));
        }
    }

    #[test]
    fn large_coefficients_survive_reconstruction() {
        // diag(10⁶, …) has det 10^(6n), far beyond one prime
        let n = 12;
        let mut a = vec![0i64; n * n];
        for i in 0..n {
            a[i * n + i] = 1_000_000;
        }
        let poly = charpoly_integer(&a, n);
        assert_eq!(poly[0], BigInt::from(10).pow(72));
        assert!((ln_abs(&poly[0]) - 72.0 * libm::log(10.0)).abs() < 1e-9);
    }
}
