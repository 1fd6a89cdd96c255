//! Fourier ground truth for `G = U × ℤᵐ` with `U` finite: `A` becomes a
//! matrix-valued trigonometric polynomial `Â(θ)` of size `|U|·d`, and traces
//! become averages over a uniform grid on the torus.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::approximation::AmenableSplit;
use crate::error::{Error, Result};
use crate::group::GroupElement;
use crate::ring::RingMatrix;
use crate::spectral::zero_threshold;

/// `Â(θ) = Σ_z B_z e^{−i⟨z,θ⟩}` with `(B_z)_{(u,k),(v,l)}` the coefficient of
/// `(u·v⁻¹, z)` in `Aₖₗ`.
#[derive(Clone, Debug)]
pub struct Symbol {
    split: AmenableSplit,
    u_elements: Vec<GroupElement>,
    d: usize,
    blocks: Vec<(Vec<i64>, Vec<Complex64>)>,
    kappa: f64,
}

impl Symbol {
    pub fn new(a: &RingMatrix) -> Result<Self> {
        if !a.is_hermitian() {
            return Err(Error::NotHermitian { deviation: a.hermitian_deviation() });
        }
        let split = AmenableSplit::new(a.group())?;
        let u_elements = split.u.elements()?;
        let order = u_elements.len();
        let d = a.dim();
        let m = order * d;
        let mut blocks: Vec<(Vec<i64>, Vec<Complex64>)> = Vec::new();
        for k in 0..d {
            for l in 0..d {
                for (s, c) in a.get(k, l).terms() {
                    let (su, z) = split.decompose(s)?;
                    let pos = match blocks.iter().position(|(w, _)| *w == z) {
                        Some(p) => p,
                        None => {
                            blocks.push((z, vec![Complex64::new(0.0, 0.0); m * m]));
                            blocks.len() - 1
                        }
                    };
                    let su_inv = split.u.inv(&su)?;
                    for (ui, u) in u_elements.iter().enumerate() {
                        // u·v⁻¹ = su  ⇔  v = su⁻¹·u
                        let vi = split.u.index_of(&split.u.mul(&su_inv, u)?)?;
                        blocks[pos].1[(ui * d + k) * m + vi * d + l] += c.to_complex();
                    }
                }
            }
        }
        blocks.sort_by(|a, b| a.0.cmp(&b.0));
        Ok(Symbol { split, u_elements, d, blocks, kappa: a.kappa().kappa })
    }

    /// `|U|·d`.
    pub fn base_dim(&self) -> usize {
        self.u_elements.len() * self.d
    }

    pub fn rank(&self) -> usize {
        self.split.rank
    }

    pub fn u_order(&self) -> usize {
        self.u_elements.len()
    }

    pub fn frequencies(&self) -> impl Iterator<Item = &[i64]> {
        self.blocks.iter().map(|b| b.0.as_slice())
    }

    pub fn eval(&self, theta: &[f64]) -> DMatrix<Complex64> {
        let m = self.base_dim();
        let mut out = DMatrix::from_element(m, m, Complex64::new(0.0, 0.0));
        for (z, b) in &self.blocks {
            let phase: f64 = z.iter().zip(theta).map(|(zi, t)| *zi as f64 * t).sum();
            let w = Complex64::new(libm::cos(phase), -libm::sin(phase));
            for r in 0..m {
                for c in 0..m {
                    out[(r, c)] += b[r * m + c] * w;
                }
            }
        }
        out
    }

    pub fn eigenvalues_at(&self, theta: &[f64]) -> Vec<f64> {
        let mut v: Vec<f64> = self.eval(theta).symmetric_eigenvalues().iter().copied().collect();
        v.sort_by(f64::total_cmp);
        v
    }

    /// Grid `θ = 2π j / N`, `j ∈ {0..N−1}ᵐ`, in lexicographic order.
    pub fn grid(&self, n: usize) -> impl Iterator<Item = Vec<f64>> + '_ {
        let rank = self.rank();
        let total = n.pow(rank as u32);
        (0..total).map(move |mut i| {
            let mut t = vec![0.0; rank];
            for c in (0..rank).rev() {
                t[c] = 2.0 * core::f64::consts::PI * (i % n) as f64 / n as f64;
                i /= n;
            }
            t
        })
    }

    fn grid_size(&self, n: usize) -> usize {
        n.pow(self.rank() as u32)
    }

    /// `(1/(|U|·Nᵐ)) Σ_θ Σ_{eig} f(eig)`, the trace of `f(A)`.
    pub fn spectral_mean(&self, n: usize, mut f: impl FnMut(f64) -> f64) -> f64 {
        let mut sum = 0.0;
        for t in self.grid(n) {
            for ev in self.eigenvalues_at(&t) {
                sum += f(ev);
            }
        }
        sum / (self.u_order() * self.grid_size(n)) as f64
    }

    /// Smallest eigenvalue above `τ` over the grid.
    pub fn min_positive_eigenvalue(&self, n: usize) -> Option<f64> {
        let tau = zero_threshold(self.kappa);
        self.grid(n).flat_map(|t| self.eigenvalues_at(&t)).filter(|&v| v > tau).reduce(f64::min)
    }
}

/// An oracle value with its refinement data.
#[derive(Clone, Debug, PartialEq)]
pub struct OracleEstimate {
    /// Reported value (Richardson extrapolation for densities and kernel
    /// coefficients, the `N`-grid value for determinants).
    pub value: f64,
    pub grid_value: f64,
    pub refined_value: f64,
    /// `|value(2N) − value(N)|`.
    pub error: f64,
    /// Set when the smallest positive eigenvalue keeps shrinking under
    /// refinement: the kernel is not separated from the rest of the spectrum
    /// and the estimate carries the error bar above.
    pub flagged: bool,
    /// Grid measure of eigenvalues at or below `τ` (determinants only).
    pub excluded_measure: f64,
}

fn unseparated(sym: &Symbol, n: usize) -> bool {
    if sym.rank() == 0 {
        return false;
    }
    match (sym.min_positive_eigenvalue(n), sym.min_positive_eigenvalue(2 * n)) {
        (Some(a), Some(b)) => b < 0.5 * a,
        _ => false,
    }
}

fn check_grid(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::OutOfRange("grid resolution must be positive".into()));
    }
    Ok(())
}

fn richardson(sym: &Symbol, n: usize, f: impl Fn(usize) -> f64) -> (f64, f64, f64) {
    let coarse = f(n);
    if sym.rank() == 0 {
        return (coarse, coarse, coarse);
    }
    let fine = f(2 * n);
    (2.0 * fine - coarse, coarse, fine)
}

/// `(1/(|U|·Nᵐ)) Σ_θ #{eig Â(θ) ≤ λ + τ}`, Richardson-extrapolated with `2N`.
pub fn oracle_density(a: &RingMatrix, lambda: f64, n: usize) -> Result<OracleEstimate> {
    check_grid(n)?;
    let sym = Symbol::new(a)?;
    let tau = zero_threshold(sym.kappa);
    let count = |n: usize| sym.spectral_mean(n, |ev| if ev <= lambda + tau { 1.0 } else { 0.0 });
    let (value, grid_value, refined_value) = richardson(&sym, n, count);
    Ok(OracleEstimate {
        value,
        grid_value,
        refined_value,
        error: (refined_value - grid_value).abs(),
        flagged: false,
        excluded_measure: 0.0,
    })
}

fn kernel_coefficient_on_grid(sym: &Symbol, members: &[(usize, Vec<i64>)], n: usize) -> Complex64 {
    let tau = zero_threshold(sym.kappa);
    let d = sym.d;
    let e = 0; // identity is the first element of U in enumeration order
    let mut acc = Complex64::new(0.0, 0.0);
    for t in sym.grid(n) {
        let eig = sym.eval(&t).symmetric_eigen();
        for (j, &ev) in eig.eigenvalues.iter().enumerate() {
            if ev > tau {
                continue;
            }
            let v = eig.eigenvectors.column(j);
            for (hu, hz) in members {
                let phase: f64 = hz.iter().zip(&t).map(|(zi, ti)| *zi as f64 * ti).sum();
                let w = Complex64::new(libm::cos(phase), libm::sin(phase));
                for k in 0..d {
                    acc += v[hu * d + k] * v[e * d + k].conj() * w;
                }
            }
        }
    }
    acc / sym.grid_size(n) as f64
}

/// `(1/|⟨g⟩|)` times the delocalized trace of the kernel projection,
/// `Σ_{h∈⟨g⟩} Σ_k mean_θ e^{i⟨h_z,θ⟩} P̂(θ)[(h_U,k),(e,k)]`.
pub fn oracle_kernel_coefficient(a: &RingMatrix, g: &GroupElement, n: usize) -> Result<(Complex64, OracleEstimate)> {
    check_grid(n)?;
    let sym = Symbol::new(a)?;
    if sym.split.u.index_of(&sym.split.u.identity())? != 0 {
        return Err(Error::Unsupported("identity of U must come first in its enumeration".into()));
    }
    let (gu, gz) = sym.split.decompose(g)?;
    let cls = sym.split.u.conjugacy_class(&gu, 1 << 16)?;
    let members: Vec<(usize, Vec<i64>)> = cls
        .finite_members()?
        .iter()
        .map(|h| Ok((sym.split.u.index_of(h)?, gz.clone())))
        .collect::<Result<_>>()?;
    let size = members.len() as f64;
    let coarse = kernel_coefficient_on_grid(&sym, &members, n) / size;
    let (value, fine) = if sym.rank() == 0 {
        (coarse, coarse)
    } else {
        let fine = kernel_coefficient_on_grid(&sym, &members, 2 * n) / size;
        (fine * 2.0 - coarse, fine)
    };
    let est = OracleEstimate {
        value: value.re,
        grid_value: coarse.re,
        refined_value: fine.re,
        error: (fine - coarse).norm(),
        flagged: unseparated(&sym, n),
        excluded_measure: 0.0,
    };
    Ok((value, est))
}

/// `(1/(|U|·Nᵐ)) Σ_θ Σ_{eig > τ} ln eig`, compared against `2N`.
pub fn oracle_lndet(a: &RingMatrix, n: usize) -> Result<OracleEstimate> {
    check_grid(n)?;
    let sym = Symbol::new(a)?;
    let tau = zero_threshold(sym.kappa);
    let integral = |n: usize| sym.spectral_mean(n, |ev| if ev > tau { libm::log(ev) } else { 0.0 });
    let excluded = |n: usize| sym.spectral_mean(n, |ev| if ev > tau { 0.0 } else { 1.0 });
    let grid_value = integral(n);
    let refined_value = if sym.rank() == 0 { grid_value } else { integral(2 * n) };
    let excluded_measure = excluded(n);
    if let Some(neg) = sym.grid(n).flat_map(|t| sym.eigenvalues_at(&t)).find(|&v| v < -tau) {
        return Err(Error::NegativeSpectrum(neg));
    }
    Ok(OracleEstimate {
        value: grid_value,
        grid_value,
        refined_value,
        error: (refined_value - grid_value).abs(),
        flagged: excluded_measure > 0.0 && unseparated(&sym, n),
        excluded_measure,
    })
}

/// `tr(f(A))` for a spectral function `f`, on the `N`-grid.
pub fn oracle_trace(a: &RingMatrix, n: usize, f: impl FnMut(f64) -> f64) -> Result<f64> {
    check_grid(n)?;
    Ok(Symbol::new(a)?.spectral_mean(n, f))
}

/// Eigenvalues of `Â` at every grid point, flattened and sorted.
pub fn grid_spectrum(a: &RingMatrix, n: usize) -> Result<Vec<f64>> {
    check_grid(n)?;
    let sym = Symbol::new(a)?;
    let mut all: Vec<f64> = sym.grid(n).flat_map(|t| sym.eigenvalues_at(&t)).collect();
    all.sort_by(f64::total_cmp);
    if all.iter().any(|v| !v.is_finite()) {
        return Err(Error::Degenerate(format!("non-finite symbol eigenvalue on the {n}-grid")));
    }
    Ok(all)
}
