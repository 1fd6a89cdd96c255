//! Spectral data of finite realizations: standard and delocalized spectral
//! density functions, kernel dimensions, Fuglede–Kadison determinants and
//! their deviated variants.

use alloc::format;
use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::{BigRational, Ratio};

use crate::approximation::{ExactMatrix, FiniteRealization};
use crate::cyclotomic::Cyclotomic;
use crate::error::{Error, Result};
use crate::group::ConjugacyClassInfo;
use crate::linalg::envelope::{count_eigenvalues_below, log_det_definite};
use crate::linalg::exact::SmallRational;
use crate::linalg::modular::{certified_kernel_pairing, certified_kernel_pairing_words, SMALL_KERNEL};
use crate::linalg::{eigh, ExactField, SparseExact};
use crate::ring::{LowerBounds, RingMatrix};

/// Zero-eigenvalue and eigenspace-merging thresholds.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Thresholds {
    pub zero_rel: f64,
    pub zero_abs: f64,
    pub cluster_rel: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds { zero_rel: 1e-10, zero_abs: 1e-12, cluster_rel: 1e-9 }
    }
}

impl Thresholds {
    /// `max(zero_rel·κ, zero_abs)`.
    pub fn zero(&self, kappa: f64) -> f64 {
        (self.zero_rel * kappa).max(self.zero_abs)
    }

    /// `cluster_rel·(1 + κ)`.
    pub fn cluster(&self, kappa: f64) -> f64 {
        self.cluster_rel * (1.0 + kappa)
    }
}

/// Eigenvalues below this are treated as zero: `max(1e−10·κ, 1e−12)`.
pub fn zero_threshold(kappa: f64) -> f64 {
    Thresholds::default().zero(kappa)
}

/// Eigenvalues closer than this are merged into one eigenspace.
pub fn cluster_tolerance(kappa: f64) -> f64 {
    Thresholds::default().cluster(kappa)
}

/// Eigenspaces of a realization with their trace weights.
///
/// Weights are computed on whole eigenspaces, so they are independent of the
/// eigenbasis chosen inside a degenerate eigenvalue.
#[derive(Clone, Debug)]
pub struct SpectralData {
    /// Ascending; one entry per eigenspace (mean of the merged eigenvalues).
    pub eigenvalues: Vec<f64>,
    pub multiplicities: Vec<usize>,
    pub weights_standard: Vec<f64>,
    /// `weights_deloc[c][j] = norm · Σ_t Σ_{h∈cls} ⟨E_j δ_t, δ_{h·t}⟩`.
    pub weights_deloc: Vec<Vec<Complex64>>,
    pub classes: Vec<ConjugacyClassInfo>,
    pub normalization: f64,
    pub kappa: f64,
    pub tau: f64,
    pub d: usize,
}

pub fn spectral_data(h: &FiniteRealization, tracked: &[ConjugacyClassInfo]) -> Result<SpectralData> {
    spectral_data_with(h, tracked, &Thresholds::default())
}

/// [`spectral_data`] with explicit thresholds.
pub fn spectral_data_with(
    h: &FiniteRealization,
    tracked: &[ConjugacyClassInfo],
    thresholds: &Thresholds,
) -> Result<SpectralData> {
    let eig = eigh(&h.matrix)?;
    let partners: Vec<Vec<(usize, Vec<usize>)>> =
        tracked.iter().map(|c| h.class_partners(c)).collect::<Result<_>>()?;
    let traces = h.trace_vectors();
    let kappa = h.source_kappa.max(eig.values.last().copied().unwrap_or(0.0).abs());
    let tol = thresholds.cluster(kappa);
    let norm = h.normalization();

    let mut eigenvalues = Vec::new();
    let mut multiplicities = Vec::new();
    let mut weights_standard = Vec::new();
    let mut weights_deloc: Vec<Vec<Complex64>> = vec![Vec::new(); tracked.len()];
    let n = eig.dim();
    let mut j = 0;
    while j < n {
        let mut end = j + 1;
        while end < n && eig.values[end] - eig.values[end - 1] <= tol {
            end += 1;
        }
        let mut std = 0.0;
        let mut raw = vec![Complex64::new(0.0, 0.0); tracked.len()];
        for col in j..end {
            for &t in &traces {
                std += eig.component(t, col).norm_sqr();
            }
            for (c, ps) in partners.iter().enumerate() {
                for (t, hs) in ps {
                    let vt = eig.component(*t, col).conj();
                    for &s in hs {
                        raw[c] += eig.component(s, col) * vt;
                    }
                }
            }
        }
        let mean = eig.values[j..end].iter().sum::<f64>() / (end - j) as f64;
        eigenvalues.push(mean);
        multiplicities.push(end - j);
        weights_standard.push(std * norm);
        for (c, r) in raw.into_iter().enumerate() {
            weights_deloc[c].push(r * norm);
        }
        j = end;
    }
    Ok(SpectralData {
        eigenvalues,
        multiplicities,
        weights_standard,
        weights_deloc,
        classes: tracked.to_vec(),
        normalization: norm,
        kappa,
        tau: thresholds.zero(h.source_kappa),
        d: h.d,
    })
}

/// Which spectral density; deviated kinds refer to a tracked class by index.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DensityKind {
    Standard,
    DelocRe(usize),
    DelocIm(usize),
    /// Raw delocalized density `Σ_{h∈cls}`; [`density`] returns its real part.
    DelocRaw(usize),
}

impl SpectralData {
    pub fn class_size(&self, c: usize) -> Result<usize> {
        Ok(self.classes.get(c).ok_or(Error::UnknownKind(c))?.finite_members()?.len())
    }

    fn check_kind(&self, kind: DensityKind) -> Result<()> {
        match kind {
            DensityKind::Standard => Ok(()),
            DensityKind::DelocRe(c) | DensityKind::DelocIm(c) | DensityKind::DelocRaw(c) => {
                if c < self.classes.len() {
                    Ok(())
                } else {
                    Err(Error::UnknownKind(c))
                }
            }
        }
    }

    /// Weight of eigenspace `j` for the given kind.
    pub fn weight(&self, kind: DensityKind, j: usize) -> Result<Complex64> {
        self.check_kind(kind)?;
        let std = self.weights_standard[j];
        Ok(match kind {
            DensityKind::Standard => Complex64::new(std, 0.0),
            DensityKind::DelocRe(c) => {
                Complex64::new(std + self.weights_deloc[c][j].re / self.class_size(c)? as f64, 0.0)
            }
            DensityKind::DelocIm(c) => {
                Complex64::new(std + self.weights_deloc[c][j].im / self.class_size(c)? as f64, 0.0)
            }
            DensityKind::DelocRaw(c) => self.weights_deloc[c][j],
        })
    }

    /// Total weight of the given kind over all eigenspaces.
    pub fn total(&self, kind: DensityKind) -> Result<Complex64> {
        (0..self.eigenvalues.len()).map(|j| self.weight(kind, j)).sum()
    }
}

/// Cumulative weight over eigenvalues `≤ λ + τ` (real part for raw kinds).
pub fn density(sd: &SpectralData, kind: DensityKind, lambda: f64) -> Result<f64> {
    Ok(raw_density(sd, kind, lambda)?.re)
}

pub fn raw_density(sd: &SpectralData, kind: DensityKind, lambda: f64) -> Result<Complex64> {
    sd.check_kind(kind)?;
    if lambda < 0.0 {
        return Err(Error::OutOfRange(format!("density evaluated at negative λ = {lambda}")));
    }
    let mut acc = Complex64::new(0.0, 0.0);
    for (j, &ev) in sd.eigenvalues.iter().enumerate() {
        if ev > lambda + sd.tau {
            break;
        }
        acc += sd.weight(kind, j)?;
    }
    Ok(acc)
}

/// Right-continuous step function: value `values[j]` on `[jumps[j], jumps[j+1])`,
/// `0` below the first jump. Evaluation applies the zero threshold `τ` like
/// [`density`].
#[derive(Clone, Debug, PartialEq)]
pub struct DensityFunction {
    pub kind: DensityKind,
    pub jumps: Vec<f64>,
    pub values: Vec<f64>,
    pub tau: f64,
}

impl DensityFunction {
    pub fn new(sd: &SpectralData, kind: DensityKind) -> Result<Self> {
        let mut jumps = Vec::with_capacity(sd.eigenvalues.len());
        let mut values = Vec::with_capacity(sd.eigenvalues.len());
        let mut acc = 0.0;
        for (j, &ev) in sd.eigenvalues.iter().enumerate() {
            acc += sd.weight(kind, j)?.re;
            jumps.push(ev.max(0.0));
            values.push(acc);
        }
        Ok(DensityFunction { kind, jumps, values, tau: sd.tau })
    }

    pub fn at(&self, lambda: f64) -> f64 {
        match self.jumps.partition_point(|&x| x <= lambda + self.tau) {
            0 => 0.0,
            k => self.values[k - 1],
        }
    }
}

/// `Σ_{λ_j > τ} w_j ln λ_j`; `−∞` for the standard kind when no mass lies
/// above `τ`.
pub fn fuglede_kadison(sd: &SpectralData, kind: DensityKind) -> Result<f64> {
    sd.check_kind(kind)?;
    let mut sum = 0.0;
    let mut mass = 0.0;
    for (j, &ev) in sd.eigenvalues.iter().enumerate() {
        if ev > sd.tau {
            let w = sd.weight(kind, j)?.re;
            sum += w * libm::log(ev);
            mass += sd.weights_standard[j];
        }
    }
    if mass == 0.0 && kind == DensityKind::Standard {
        return Ok(f64::NEG_INFINITY);
    }
    Ok(sum)
}

/// `(1/|cls|)·` raw delocalized mass at eigenvalues `≤ τ`.
pub fn kernel_fourier_coefficient(sd: &SpectralData, class: usize) -> Result<Complex64> {
    let size = sd.class_size(class)? as f64;
    Ok(raw_density(sd, DensityKind::DelocRaw(class), 0.0)? / size)
}

fn equivariant_scale(h: &FiniteRealization) -> u64 {
    h.bases as u64 * h.group.order().expect("stage groups are finite") as u64
}

/// Normalized nullity from exact elimination: nullity divided by `|Gᵢ|`
/// (limit stages) or `|Xᵢ|·|U|` (compressions).
pub fn kernel_dim_exact(h: &FiniteRealization) -> Result<BigRational> {
    let rank = match h.exact.as_ref().ok_or(Error::NotExact)? {
        ExactMatrix::Rational(m) => match m.map(SmallRational::from_big).map(|s| s.try_rank()) {
            Some(Ok(r)) => r,
            _ => m.rank(),
        },
        ExactMatrix::Integer { den, rows } => {
            let small = SparseExact {
                n_rows: rows.len(),
                n_cols: rows.len(),
                rows: rows
                    .iter()
                    .map(|row| row.iter().map(|&(c, v)| (c, SmallRational::Value(Ratio::new(v, *den)))).collect())
                    .collect(),
            };
            match small.try_rank() {
                Ok(r) => r,
                Err(_) => h.exact.as_ref().unwrap().to_rational().unwrap().rank(),
            }
        }
        ExactMatrix::Cyclotomic(m) => m.rank(),
    };
    let nullity = (h.dim() - rank) as i64;
    Ok(BigRational::new(BigInt::from(nullity), BigInt::from(equivariant_scale(h))))
}

/// Floating normalized nullity: eigenvalues `≤ τ` counted by inertia.
pub fn kernel_dim_float(h: &FiniteRealization) -> Result<f64> {
    standard_density_by_inertia(h, 0.0)
}

/// `F(λ)` for the standard density, from an `LDLᵀ` inertia count of
/// `H − (λ+τ)I`; no eigenvectors are formed.
pub fn standard_density_by_inertia(h: &FiniteRealization, lambda: f64) -> Result<f64> {
    let tau = zero_threshold(h.source_kappa);
    let below = count_eigenvalues_below(&h.matrix, lambda + tau)?;
    Ok(below as f64 / equivariant_scale(h) as f64)
}

/// `lndet` of a positive definite realization from an `LDLᵀ` factorization.
pub fn lndet_definite(h: &FiniteRealization) -> Result<f64> {
    Ok(log_det_definite(&h.matrix)? / equivariant_scale(h) as f64)
}

/// Exact kernel Fourier data: for each trace vector `t` the kernel
/// projection `x = δ_t − H y` with `H² y = H δ_t`, then
/// `(norm·Σ x[t], norm·Σ_t Σ_{h∈cls} x[h·t])`.
pub fn kernel_coefficients_exact(h: &FiniteRealization, cls: &ConjugacyClassInfo) -> Result<(Cyclotomic, Cyclotomic)> {
    let partners = h.class_partners(cls)?;
    let scale = Cyclotomic::from_fraction(1, h.normalization_den as i64);
    let (std, raw) = match h.exact.as_ref().ok_or(Error::NotExact)? {
        ExactMatrix::Rational(m) => {
            let pair = certified_kernel_pairing(m, &partners).or_else(|| small_kernel_pairing(m, &partners));
            let (s, r) = match pair {
                Some(pair) => pair,
                None => exact_kernel_pairing(m, &partners)?,
            };
            (Cyclotomic::rational(s), Cyclotomic::rational(r))
        }
        ExactMatrix::Integer { den, rows } => {
            let (s, r) = match certified_kernel_pairing_words(rows, *den, &partners) {
                Some(pair) => pair,
                None => {
                    let m = h.exact.as_ref().unwrap().to_rational().unwrap();
                    match small_kernel_pairing(&m, &partners) {
                        Some(pair) => pair,
                        None => exact_kernel_pairing(&m, &partners)?,
                    }
                }
            };
            (Cyclotomic::rational(s), Cyclotomic::rational(r))
        }
        ExactMatrix::Cyclotomic(m) => exact_kernel_pairing(m, &partners)?,
    };
    Ok((&std * &scale, &raw * &scale))
}

/// `(1/|cls|)·` exact raw kernel mass, the exact counterpart of
/// [`kernel_fourier_coefficient`].
pub fn kernel_fourier_coefficient_exact(h: &FiniteRealization, cls: &ConjugacyClassInfo) -> Result<Cyclotomic> {
    let size = cls.finite_members()?.len() as i64;
    let (_, raw) = kernel_coefficients_exact(h, cls)?;
    Ok(&raw * &Cyclotomic::from_fraction(1, size))
}

/// Machine-word attempt; `None` when the entries do not fit or exactness
/// was lost along the way.
fn small_kernel_pairing(
    m: &SparseExact<BigRational>,
    partners: &[(usize, Vec<usize>)],
) -> Option<(BigRational, BigRational)> {
    let small = m.map(SmallRational::from_big)?;
    let (s, r) = exact_kernel_pairing(&small, partners).ok()?;
    Some((s.to_big()?, r.to_big()?))
}

/// `x = N (N*N)⁻¹ N* δ_t` for an exact kernel basis `N` of a Hermitian matrix.
fn pairing_with_basis<T: ExactField>(basis: &[(usize, Vec<T>)], partners: &[(usize, Vec<usize>)]) -> Result<(T, T)> {
    let k = basis.len();
    let mut std = T::zero();
    let mut raw = T::zero();
    if k == 0 {
        return Ok((std, raw));
    }
    let mut gram = Vec::with_capacity(k * k);
    for (a, (_, va)) in basis.iter().enumerate() {
        for (b, (_, vb)) in basis.iter().enumerate() {
            let s = va.iter().zip(vb).fold(T::zero(), |s, (x, y)| if x.is_zero() || y.is_zero() { s } else { s.add(&x.conj().mul(y)) });
            gram.push((a, b, s));
        }
    }
    let gram = SparseExact::from_triplets(k, k, gram);
    let rhs: Vec<Vec<T>> = partners.iter().map(|(t, _)| basis.iter().map(|(_, v)| v[*t].conj()).collect()).collect();
    let coeffs = gram.solve_consistent(&rhs)?;
    for ((t, hs), c) in partners.iter().zip(coeffs) {
        let x = |s: usize| basis.iter().zip(&c).fold(T::zero(), |acc, ((_, v), ca)| acc.add(&v[s].mul(ca)));
        std = std.add(&x(*t));
        for &s in hs {
            raw = raw.add(&x(s));
        }
    }
    Ok((std, raw))
}

fn exact_kernel_pairing<T: ExactField>(m: &SparseExact<T>, partners: &[(usize, Vec<usize>)]) -> Result<(T, T)> {
    if let Some(basis) = m.kernel_basis(SMALL_KERNEL)? {
        return pairing_with_basis(&basis, partners);
    }
    let n = m.n_cols;
    let squared = m.matmul(m);
    let rhs: Vec<Vec<T>> = partners
        .iter()
        .map(|(t, _)| {
            let mut e = vec![T::zero(); n];
            e[*t] = T::one();
            m.matvec(&e)
        })
        .collect();
    let ys = squared.solve_consistent(&rhs)?;
    let mut std = T::zero();
    let mut raw = T::zero();
    for ((t, hs), y) in partners.iter().zip(ys) {
        let hy = m.matvec(&y);
        let x = |i: usize| {
            let delta = if i == *t { T::one() } else { T::zero() };
            delta.sub(&hy[i])
        };
        std = std.add(&x(*t));
        for &s in hs {
            raw = raw.add(&x(s));
        }
    }
    Ok((std, raw))
}

/// Kernel dimension, exact when the realization carries an exact copy.
#[derive(Clone, Debug, PartialEq)]
pub enum KernelDim {
    Exact(BigRational),
    Float(f64),
}

#[derive(Clone, Debug)]
pub struct DeterminantReport {
    pub lndet: f64,
    pub lndet_dev_re: Vec<f64>,
    pub lndet_dev_im: Vec<f64>,
    pub lower_bounds: Option<LowerBounds>,
    pub kernel_dim: KernelDim,
}

impl DeterminantReport {
    /// `lndet ≥ B₀` and every deviated determinant `≥ B₁`, up to `slack`.
    pub fn respects_bounds(&self, slack: f64) -> Option<bool> {
        let b = self.lower_bounds.as_ref()?;
        let ok0 = self.lndet >= b.b0 - slack;
        let ok1 = self.lndet_dev_re.iter().chain(&self.lndet_dev_im).all(|&v| v >= b.b1 - slack);
        Some(ok0 && ok1)
    }
}

/// Determinants from spectral data; bounds are computed for exact sources.
pub fn determinant_report(h: &FiniteRealization, sd: &SpectralData, source: &RingMatrix) -> Result<DeterminantReport> {
    let lndet = fuglede_kadison(sd, DensityKind::Standard)?;
    let lndet_dev_re = (0..sd.classes.len())
        .map(|c| fuglede_kadison(sd, DensityKind::DelocRe(c)))
        .collect::<Result<_>>()?;
    let lndet_dev_im = (0..sd.classes.len())
        .map(|c| fuglede_kadison(sd, DensityKind::DelocIm(c)))
        .collect::<Result<_>>()?;
    let lower_bounds = if source.is_exact() { Some(source.determinant_lower_bound_rhs()?) } else { None };
    let kernel_dim = if h.exact.is_some() {
        KernelDim::Exact(kernel_dim_exact(h)?)
    } else {
        KernelDim::Float(density(sd, DensityKind::Standard, 0.0)?)
    };
    Ok(DeterminantReport { lndet, lndet_dev_re, lndet_dev_im, lower_bounds, kernel_dim })
}

/// Both sides of the partial integration identity for `lndet`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PartialIntegration {
    /// `Σ_{λ_j > τ} w_j ln λ_j`.
    pub direct: f64,
    /// `ln κ·(F(κ) − F(0)) − ∫_{0⁺}^{κ} (F(λ) − F(0))/λ dλ` on the step function.
    pub integrated: f64,
    pub residual: f64,
}

pub fn partial_integration_check(sd: &SpectralData, kind: DensityKind) -> Result<PartialIntegration> {
    sd.check_kind(kind)?;
    let positive: Vec<(f64, f64)> = sd
        .eigenvalues
        .iter()
        .enumerate()
        .filter(|(_, &ev)| ev > sd.tau)
        .map(|(j, &ev)| Ok((ev, sd.weight(kind, j)?.re)))
        .collect::<Result<_>>()?;
    let direct: f64 = positive.iter().map(|(ev, w)| w * libm::log(*ev)).sum();
    let kappa = positive.last().map_or(sd.kappa, |p| p.0.max(sd.kappa));
    let jump_total: f64 = positive.iter().map(|p| p.1).sum();
    // F − F(0) is the running mass on [λ_j, λ_{j+1}); the last piece runs to κ
    let mut integral = 0.0;
    let mut cum = 0.0;
    for (j, (ev, w)) in positive.iter().enumerate() {
        cum += w;
        let next = positive.get(j + 1).map_or(kappa, |p| p.0);
        integral += cum * (libm::log(next) - libm::log(*ev));
    }
    let integrated = if positive.is_empty() { 0.0 } else { libm::log(kappa) * jump_total - integral };
    Ok(PartialIntegration { direct, integrated, residual: (direct - integrated).abs() })
}

/// Quintic smoothstep going from 1 at `t ≤ 0` to 0 at `t ≥ 1`.
fn smooth_drop(t: f64) -> f64 {
    if t <= 0.0 {
        1.0
    } else if t >= 1.0 {
        0.0
    } else {
        1.0 - t * t * t * (t * (t * 6.0 - 15.0) + 10.0)
    }
}

/// A polynomial on `[0, κ]` with `χ_{[0,λ]} ≤ P ≤ χ_{[0,λ+1/n]} + 1/n`,
/// stored in the Chebyshev basis of `[0, κ]`.
#[derive(Clone, Debug)]
pub struct SandwichPolynomial {
    pub lambda: f64,
    pub n: u32,
    pub kappa: f64,
    pub coeffs: Vec<f64>,
    /// Largest deviation from the target `1/(2n) + S(n(x−λ))` over the
    /// certification grid; below `1/(2n)`.
    pub certified_error: f64,
    pub grid_points: usize,
}

impl SandwichPolynomial {
    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    fn to_unit(&self, x: f64) -> f64 {
        2.0 * x / self.kappa - 1.0
    }

    pub fn eval(&self, x: f64) -> f64 {
        chebyshev_eval(&self.coeffs, self.to_unit(x))
    }

    /// `Tr_i(P(H))`, by Clenshaw's recurrence with sparse products applied to
    /// each trace vector.
    pub fn stage_trace(&self, h: &FiniteRealization) -> f64 {
        let n = h.dim();
        // y = 2H/κ − I acting on vectors
        let apply = |v: &[Complex64]| -> Vec<Complex64> {
            let hv = h.matrix.matvec(v);
            hv.iter().zip(v).map(|(a, b)| a * (2.0 / self.kappa) - b).collect()
        };
        let mut total = 0.0;
        for t in h.trace_vectors() {
            let mut e = vec![Complex64::new(0.0, 0.0); n];
            e[t] = Complex64::new(1.0, 0.0);
            let mut b1 = vec![Complex64::new(0.0, 0.0); n];
            let mut b2 = vec![Complex64::new(0.0, 0.0); n];
            for &c in self.coeffs[1..].iter().rev() {
                let yb1 = apply(&b1);
                let b0: Vec<Complex64> = (0..n).map(|i| yb1[i] * 2.0 - b2[i] + e[i] * c).collect();
                b2 = b1;
                b1 = b0;
            }
            let yb1 = apply(&b1);
            let p_t = e[t] * self.coeffs[0] + yb1[t] - b2[t];
            total += p_t.re;
        }
        total * h.normalization()
    }
}

fn chebyshev_eval(c: &[f64], y: f64) -> f64 {
    let (mut b1, mut b2) = (0.0, 0.0);
    for &ck in c[1..].iter().rev() {
        let b0 = ck + 2.0 * y * b1 - b2;
        b2 = b1;
        b1 = b0;
    }
    c[0] + y * b1 - b2
}

fn chebyshev_interpolant(f: impl Fn(f64) -> f64, degree: usize) -> Vec<f64> {
    let m = degree + 1;
    let pi = core::f64::consts::PI;
    let samples: Vec<f64> = (0..m).map(|j| f(libm::cos(pi * (j as f64 + 0.5) / m as f64))).collect();
    (0..m)
        .map(|k| {
            let s: f64 = samples
                .iter()
                .enumerate()
                .map(|(j, v)| v * libm::cos(pi * k as f64 * (j as f64 + 0.5) / m as f64))
                .sum();
            s * if k == 0 { 1.0 } else { 2.0 } / m as f64
        })
        .collect()
}

/// Upper limit on the Chebyshev degree tried before giving up.
pub const MAX_SANDWICH_DEGREE: usize = 1 << 15;

/// Chebyshev interpolant of `1/(2n) + S(n(x−λ))` on `[0, κ]`, starting at
/// degree `⌈nκ/max(λ,1)⌉` and doubling until the error on a `10·degree`
/// grid is below `1/(2n)`.
pub fn sandwich_polynomial(kappa: f64, lambda: f64, n: u32) -> Result<SandwichPolynomial> {
    if n == 0 {
        return Err(Error::OutOfRange("sandwich index n must be ≥ 1".to_string()));
    }
    if !(kappa > 0.0) || !(0.0..=kappa).contains(&lambda) {
        return Err(Error::OutOfRange(format!("λ = {lambda} outside [0, κ = {kappa}]")));
    }
    let nf = n as f64;
    let target = |x: f64| 0.5 / nf + smooth_drop(nf * (x - lambda));
    let mut degree = libm::ceil(nf * kappa / lambda.max(1.0)).max(1.0) as usize;
    loop {
        let coeffs = chebyshev_interpolant(|y| target((y + 1.0) * kappa / 2.0), degree);
        let grid = 10 * degree;
        let mut err: f64 = 0.0;
        for i in 0..=grid {
            let x = kappa * i as f64 / grid as f64;
            let y = 2.0 * x / kappa - 1.0;
            err = err.max((chebyshev_eval(&coeffs, y) - target(x)).abs());
        }
        if err < 0.5 / nf {
            return Ok(SandwichPolynomial { lambda, n, kappa, coeffs, certified_error: err, grid_points: grid + 1 });
        }
        if degree >= MAX_SANDWICH_DEGREE {
            return Err(Error::Degenerate(format!(
                "no certified sandwich polynomial up to degree {MAX_SANDWICH_DEGREE}"
            )));
        }
        degree *= 2;
    }
}

/// One stage of the sandwich chain `F(λ) ≤ Tr_i(P(A[i])) ≤ F(λ+1/n) + 2d/n`.
#[derive(Clone, Debug, PartialEq)]
pub struct SandwichStage {
    pub index: usize,
    pub lower: f64,
    pub trace: f64,
    pub upper_density: f64,
    pub slack: f64,
    pub pass: bool,
}

pub fn sandwich_stage(h: &FiniteRealization, poly: &SandwichPolynomial) -> Result<SandwichStage> {
    let lower = standard_density_by_inertia(h, poly.lambda)?;
    let upper_density = standard_density_by_inertia(h, poly.lambda + 1.0 / poly.n as f64)?;
    let trace = poly.stage_trace(h);
    let slack = 2.0 * h.d as f64 / poly.n as f64;
    let eps = 1e-9;
    let pass = lower <= trace + eps && trace <= upper_density + slack + eps;
    Ok(SandwichStage { index: h.index, lower, trace, upper_density, slack, pass })
}

/// The sandwich chain at every stage.
pub fn sandwich_diagnostic(stages: &[FiniteRealization], lambda: f64, n: u32) -> Result<Vec<SandwichStage>> {
    let kappa = stages.iter().map(|s| s.source_kappa).fold(0.0, f64::max);
    if !(0.0..=kappa).contains(&lambda) {
        return Err(Error::OutOfRange(format!("λ = {lambda} outside [0, κ = {kappa}]")));
    }
    let poly = sandwich_polynomial(kappa, lambda, n)?;
    stages.iter().map(|h| sandwich_stage(h, &poly)).collect()
}

/// Largest eigenvalue magnitude bound check `ρ(H) ≤ κ + 1e−9`.
pub fn within_norm_bound(sd: &SpectralData, source_kappa: f64) -> bool {
    sd.eigenvalues.iter().all(|ev| ev.abs() <= source_kappa + 1e-9)
}

/// Eigenvalues only, ascending.
pub fn stage_eigenvalues(h: &FiniteRealization) -> Result<Vec<f64>> {
    crate::linalg::eigvalsh(&h.matrix)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::approximation::{build_folner_compression, build_inverse_limit_stage, reduction_map, FolnerSet};
    use crate::group::Group;
    use crate::parse::parse_element;
    use num_traits::ToPrimitive;

    fn z() -> Group {
        Group::free_abelian(&["u"]).unwrap()
    }

    fn z2z() -> Group {
        Group::direct_product(vec![Group::cyclic(2, "t").unwrap(), z()]).unwrap()
    }

    fn stage(g: &Group, s: &str, n: u32) -> FiniteRealization {
        let a = RingMatrix::from_element(parse_element(g, s).unwrap());
        build_inverse_limit_stage(&a, &reduction_map(g, n).unwrap(), n as usize).unwrap()
    }

    fn class_of(h: &FiniteRealization, name: &str) -> ConjugacyClassInfo {
        let g = if name == "e" { h.group.identity() } else { h.group.generator(name).unwrap() };
        h.group.conjugacy_class(&g, 1 << 12).unwrap()
    }

    fn rat(q: &BigRational) -> f64 {
        q.to_f64().unwrap()
    }

    #[test]
    fn identity_and_two_by_two() {
        let h = stage(&z(), "1", 5);
        let e = class_of(&h, "e");
        let u = class_of(&h, "u");
        let sd = spectral_data(&h, &[e, u]).unwrap();
        assert_eq!(sd.eigenvalues.len(), 1);
        assert!((sd.eigenvalues[0] - 1.0).abs() < 1e-14);
        assert!((sd.total(DensityKind::Standard).unwrap().re - 1.0).abs() < 1e-12);
        assert!(sd.total(DensityKind::DelocRaw(1)).unwrap().norm() < 1e-12);
        assert!((sd.total(DensityKind::DelocRaw(0)).unwrap().re - 1.0).abs() < 1e-12);
        assert_eq!(fuglede_kadison(&sd, DensityKind::Standard).unwrap(), 0.0);
        assert_eq!(rat(&kernel_dim_exact(&h).unwrap()), 0.0);

        let c2 = Group::cyclic(2, "t").unwrap();
        let a = RingMatrix::from_element(parse_element(&c2, "1 + t").unwrap());
        let h = crate::approximation::realize_over_finite(&a, 0, a.kappa().kappa).unwrap();
        let t = class_of(&h, "t");
        let sd = spectral_data(&h, &[t]).unwrap();
        assert_eq!(sd.eigenvalues.len(), 2);
        for (j, (std, dl)) in [(0.5, -0.5), (0.5, 0.5)].iter().enumerate() {
            assert!((sd.weights_standard[j] - std).abs() < 1e-14);
            assert!((sd.weights_deloc[0][j].re - dl).abs() < 1e-14);
        }
        assert_eq!(rat(&kernel_dim_exact(&h).unwrap()), 0.5);
    }

    #[test]
    fn laplacian_density_and_kernel() {
        for n in [4u32, 7, 16] {
            let h = stage(&z(), "2 - u - u^-1", n);
            let sd = spectral_data(&h, &[class_of(&h, "e"), class_of(&h, "u")]).unwrap();
            let f0 = density(&sd, DensityKind::Standard, 0.0).unwrap();
            assert!((f0 - 1.0 / n as f64).abs() < 1e-12);
            assert!((density(&sd, DensityKind::Standard, 4.0).unwrap() - 1.0).abs() < 1e-12);
            assert_eq!(kernel_dim_exact(&h).unwrap(), BigRational::new(1.into(), (n as i64).into()));
            assert!((kernel_dim_float(&h).unwrap() - f0).abs() < 1e-12);
            let kc = kernel_fourier_coefficient(&sd, 1).unwrap();
            assert!((kc.re - 1.0 / n as f64).abs() < 1e-12);
            let exact = kernel_fourier_coefficient_exact(&h, &class_of(&h, "u")).unwrap();
            assert_eq!(exact, Cyclotomic::from_fraction(1, n as i64));
            assert!(within_norm_bound(&sd, 4.0));
        }
        let zero = stage(&z(), "0", 3);
        let sd = spectral_data(&zero, &[]).unwrap();
        assert_eq!(density(&sd, DensityKind::Standard, 0.0).unwrap(), 1.0);
        assert_eq!(fuglede_kadison(&sd, DensityKind::Standard).unwrap(), f64::NEG_INFINITY);
        assert!(matches!(density(&sd, DensityKind::DelocRe(0), 0.0), Err(Error::UnknownKind(0))));
    }

    #[test]
    fn product_family_kernel_coefficients() {
        for n in [3u32, 8, 12] {
            let h = stage(&z2z(), "(1 - t)(2 - u - u^-1)", n);
            let e = class_of(&h, "e");
            let t = class_of(&h, "t");
            let sd = spectral_data(&h, &[e.clone(), t.clone()]).unwrap();
            let nf = n as f64;
            assert!((kernel_fourier_coefficient(&sd, 1).unwrap().re - (0.5 - 0.5 / nf)).abs() < 1e-10);
            assert!((kernel_fourier_coefficient(&sd, 0).unwrap().re - (0.5 + 0.5 / nf)).abs() < 1e-10);
            let n = n as i64;
            assert_eq!(kernel_fourier_coefficient_exact(&h, &t).unwrap(), Cyclotomic::from_fraction(n - 1, 2 * n));
            assert_eq!(kernel_fourier_coefficient_exact(&h, &e).unwrap(), Cyclotomic::from_fraction(n + 1, 2 * n));
            assert_eq!(kernel_dim_exact(&h).unwrap(), BigRational::new((n + 1).into(), (2 * n).into()));
        }
    }

    #[test]
    fn compression_kernel_coefficients() {
        let a = RingMatrix::from_element(parse_element(&z2z(), "(1 - t)(2 - u - u^-1)").unwrap());
        let h = build_folner_compression(&a, &FolnerSet::box_set(6, 1, 6).unwrap()).unwrap();
        let t = h.group.conjugacy_class(&h.group.generator("t").unwrap(), 8).unwrap();
        let e = h.group.conjugacy_class(&h.group.identity(), 8).unwrap();
        let sd = spectral_data(&h, &[e.clone(), t.clone()]).unwrap();
        let exact_t = kernel_fourier_coefficient_exact(&h, &t).unwrap().to_complex().re;
        let float_t = kernel_fourier_coefficient(&sd, 1).unwrap().re;
        assert!((exact_t - float_t).abs() < 1e-10);
        assert!((exact_t - 0.5).abs() <= 5.0 / 6.0);
        let kd = rat(&kernel_dim_exact(&h).unwrap());
        assert!((kd - density(&sd, DensityKind::Standard, 0.0).unwrap()).abs() < 1e-10);
        assert!((sd.total(DensityKind::Standard).unwrap().re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn determinant_values() {
        let h = stage(&z(), "3 + u + u^-1", 512);
        let sd = spectral_data(&h, &[]).unwrap();
        let target = libm::log((3.0 + libm::sqrt(5.0)) / 2.0);
        assert!((fuglede_kadison(&sd, DensityKind::Standard).unwrap() - target).abs() < 1e-3);
        assert!((lndet_definite(&h).unwrap() - target).abs() < 1e-3);
        let pi = partial_integration_check(&sd, DensityKind::Standard).unwrap();
        assert!(pi.residual <= 1e-8 * (1.0 + pi.direct.abs()));

        let h = stage(&z(), "2 - u - u^-1", 8);
        let sd = spectral_data(&h, &[class_of(&h, "u")]).unwrap();
        for kind in [DensityKind::Standard, DensityKind::DelocRe(0), DensityKind::DelocIm(0)] {
            assert!(partial_integration_check(&sd, kind).unwrap().residual <= 1e-10);
        }
        let id = stage(&z(), "1", 4);
        let sd = spectral_data(&id, &[]).unwrap();
        let pi = partial_integration_check(&sd, DensityKind::Standard).unwrap();
        assert_eq!((pi.direct, pi.integrated), (0.0, 0.0));
    }

    #[test]
    fn density_function_steps() {
        let h = stage(&z(), "2 - u - u^-1", 6);
        let sd = spectral_data(&h, &[]).unwrap();
        let f = DensityFunction::new(&sd, DensityKind::Standard).unwrap();
        assert!(f.values.windows(2).all(|w| w[0] <= w[1]));
        assert!((f.at(0.0) - 1.0 / 6.0).abs() < 1e-12);
        assert!((f.at(1.0) - 3.0 / 6.0).abs() < 1e-12);
        assert!((f.at(4.0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sandwich_chain() {
        let id = stage(&z(), "1", 4);
        for n in [1u32, 4, 16] {
            let st = sandwich_diagnostic(core::slice::from_ref(&id), 0.5, n).unwrap();
            assert!(st[0].pass, "{:?}", st[0]);
        }
        for n in [4u32, 16] {
            let stages: Vec<_> = [5u32, 8, 33].iter().map(|&m| stage(&z(), "2 - u - u^-1", m)).collect();
            for lambda in [0.0, 0.5, 1.0] {
                let poly = sandwich_polynomial(4.0, lambda, n).unwrap();
                assert!(poly.certified_error < 0.5 / n as f64);
                for x in [0.0, lambda, lambda + 1.0 / n as f64, 4.0] {
                    let p = poly.eval(x);
                    let lo = if x <= lambda { 1.0 } else { 0.0 };
                    let hi = if x <= lambda + 1.0 / n as f64 { 1.0 } else { 0.0 } + 1.0 / n as f64;
                    assert!(lo <= p && p <= hi, "x={x} p={p}");
                }
                for st in sandwich_diagnostic(&stages, lambda, n).unwrap() {
                    assert!(st.pass, "{st:?}");
                }
            }
        }
    }
}
