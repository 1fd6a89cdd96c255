//! Finite approximations `A[i]` of a group-ring matrix: images in finite
//! quotients, lifts through a direct system of finite groups, and
//! compressions to Følner sets of `G/U` for `G = U × ℤᵐ`.
//!
//! Every construction ends in a [`FiniteRealization`]: a concrete Hermitian
//! matrix acting on `ℓ²` of a finite labeled basis, together with the trace
//! vectors and normalization that define the stage trace `trᵢ`.

use alloc::collections::{BTreeMap, BTreeSet, VecDeque};
use alloc::format;
use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;
use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive};
use rand_core::RngCore;

use crate::cyclotomic::Cyclotomic;
use crate::error::{Error, Result};
use crate::group::{ConjugacyClassInfo, Group, GroupElement, GroupKind, QuotientMap};
use crate::linalg::{ExactField, SparseExact, SparseMatrix};
use crate::ring::{Coefficient, Part, RingMatrix};

/// Label of a basis vector of a realization.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum BasisLabel {
    /// `(g, k)`: group element of the finite stage group and block index.
    Limit { g: GroupElement, k: usize },
    /// `(x, u, k)`: Følner point of `G/U`, element of `U` and block index.
    Compression { x: Vec<i64>, u: GroupElement, k: usize },
}

/// Exact copy of a realization matrix.
#[derive(Clone, Debug, PartialEq)]
pub enum ExactMatrix {
    /// Entries `rows[r][c] / den`, for rational matrices whose scaled
    /// entries fit machine words.
    Integer { den: i64, rows: Vec<Vec<(usize, i64)>> },
    Rational(SparseExact<BigRational>),
    Cyclotomic(SparseExact<Cyclotomic>),
}

impl ExactMatrix {
    /// The matrix over ℚ, or `None` for cyclotomic entries.
    pub fn to_rational(&self) -> Option<SparseExact<BigRational>> {
        match self {
            ExactMatrix::Integer { den, rows } => {
                let n = rows.len();
                let den = BigInt::from(*den);
                let rows = rows
                    .iter()
                    .map(|row| row.iter().map(|(c, v)| (*c, BigRational::new(BigInt::from(*v), den.clone()))).collect())
                    .collect();
                Some(SparseExact { n_rows: n, n_cols: n, rows })
            }
            ExactMatrix::Rational(m) => Some(m.clone()),
            ExactMatrix::Cyclotomic(_) => None,
        }
    }
}

/// A finite matrix realizing `A[i]`.
///
/// Basis vectors are ordered `(base, u, k)` lexicographically, where `base`
/// runs over the Følner points (a single dummy base for limit stages), `u`
/// over [`FiniteRealization::group`] in enumeration order, and `k` over the
/// `d` blocks.
#[derive(Clone, Debug)]
pub struct FiniteRealization {
    pub index: usize,
    /// `Gᵢ` for limit stages, `U` for compressions.
    pub group: Group,
    pub d: usize,
    /// Number of Følner points (1 for limit stages).
    pub bases: usize,
    pub labels: Vec<BasisLabel>,
    pub matrix: SparseMatrix,
    pub exact: Option<ExactMatrix>,
    /// `trᵢ = (1/normalization_den) · Σ_t ⟨· δ_t, δ_t⟩` over the trace vectors.
    pub normalization_den: u64,
    /// κ of the matrix being approximated.
    pub source_kappa: f64,
    /// Lift choices made for a direct-limit stage, `(element of G, lift)`.
    pub lifts: Vec<(GroupElement, GroupElement)>,
}

impl FiniteRealization {
    pub fn dim(&self) -> usize {
        self.matrix.n
    }

    pub fn normalization(&self) -> f64 {
        1.0 / self.normalization_den as f64
    }

    fn order(&self) -> usize {
        self.group.order().expect("stage groups are finite")
    }

    /// Position of `(base, group index, k)`.
    pub fn position(&self, base: usize, group_index: usize, k: usize) -> usize {
        (base * self.order() + group_index) * self.d + k
    }

    /// Trace vectors `(base, e, k)` in basis order.
    pub fn trace_vectors(&self) -> Vec<usize> {
        let e = self.group.index_of(&self.group.identity()).expect("finite group");
        let mut out = Vec::with_capacity(self.bases * self.d);
        for b in 0..self.bases {
            for k in 0..self.d {
                out.push(self.position(b, e, k));
            }
        }
        out
    }

    /// For each trace vector `t = (base, e, k)`, the positions `(base, h, k)`
    /// for `h` in the class. The pairing `⟨P δ_t, δ_{h·t}⟩` summed over these
    /// gives delocalized traces.
    pub fn class_partners(&self, cls: &ConjugacyClassInfo) -> Result<Vec<(usize, Vec<usize>)>> {
        let members = cls.finite_members()?;
        let idx: Vec<usize> = members.iter().map(|h| self.group.index_of(h)).collect::<Result<_>>()?;
        let mut out = Vec::with_capacity(self.bases * self.d);
        for t in self.trace_vectors() {
            let k = t % self.d;
            let base = t / self.d / self.order();
            out.push((t, idx.iter().map(|&h| self.position(base, h, k)).collect()));
        }
        Ok(out)
    }

    /// Stage trace `trᵢ(Bⁿ)` and raw delocalized trace `Σ_{h∈cls}` of `Bⁿ`
    /// for the realization matrix `B`, in floating point.
    pub fn power_traces(&self, n: u32, cls: &ConjugacyClassInfo) -> Result<(f64, Complex64)> {
        let partners = self.class_partners(cls)?;
        let mut std = 0.0;
        let mut raw = Complex64::new(0.0, 0.0);
        for (t, hs) in partners {
            let mut v = vec![Complex64::new(0.0, 0.0); self.dim()];
            v[t] = Complex64::new(1.0, 0.0);
            for _ in 0..n {
                v = self.matrix.matvec(&v);
            }
            std += v[t].re;
            for s in hs {
                raw += v[s];
            }
        }
        let c = self.normalization();
        Ok((std * c, raw * c))
    }

    /// [`FiniteRealization::power_traces`] in exact arithmetic.
    pub fn power_traces_exact(&self, n: u32, cls: &ConjugacyClassInfo) -> Result<(Cyclotomic, Cyclotomic)> {
        let partners = self.class_partners(cls)?;
        let scale = Cyclotomic::from_fraction(1, self.normalization_den as i64);
        let (std, raw) = match self.exact.as_ref().ok_or(Error::NotExact)? {
            ExactMatrix::Cyclotomic(m) => exact_power_traces(m, n, &partners),
            other => {
                let m = other.to_rational().expect("rational variant");
                let (s, r) = exact_power_traces(&m, n, &partners);
                (Cyclotomic::rational(s), Cyclotomic::rational(r))
            }
        };
        Ok((&std * &scale, &raw * &scale))
    }

    /// Deviated stage trace `trᵢ(Bⁿ) + Re/Im(raw)/|cls|`.
    pub fn deviated_power_trace(&self, n: u32, cls: &ConjugacyClassInfo, part: Part) -> Result<f64> {
        let (std, raw) = self.power_traces(n, cls)?;
        let size = cls.finite_members()?.len() as f64;
        Ok(std + match part {
            Part::Re => raw.re,
            Part::Im => raw.im,
        } / size)
    }
}

fn exact_power_traces<T: ExactField>(m: &SparseExact<T>, n: u32, partners: &[(usize, Vec<usize>)]) -> (T, T) {
    let mut std = T::zero();
    let mut raw = T::zero();
    for (t, hs) in partners {
        let mut v = vec![T::zero(); m.n_cols];
        v[*t] = T::one();
        for _ in 0..n {
            v = m.matvec(&v);
        }
        std = std.add(&v[*t]);
        for &s in hs {
            raw = raw.add(&v[s]);
        }
    }
    (std, raw)
}

/// Float and exact copies of the matrix with entries `table[t]` at
/// `(row, col, t)`; repeated positions are summed.
/// Common denominator and scaled numerators of a rational coefficient table,
/// when everything fits machine words.
fn scaled_table(table: &[Coefficient]) -> Option<(i64, Vec<i64>)> {
    let mut den = BigInt::from(1);
    for c in table {
        let q = c.as_exact()?.as_rational()?;
        if !q.denom().is_one() {
            den = den.lcm(q.denom());
        }
    }
    let nums = table
        .iter()
        .map(|c| {
            let q = c.as_exact().unwrap().as_rational().unwrap();
            (q.numer() * (&den / q.denom())).to_i64()
        })
        .collect::<Option<Vec<_>>>()?;
    Some((den.to_i64()?, nums))
}

fn assemble(triplets: Vec<(usize, usize, u32)>, table: &[Coefficient], n: usize) -> (SparseMatrix, Option<ExactMatrix>) {
    // bucket by row, then sort each short row by column
    let mut start = vec![0usize; n + 1];
    for &(r, _, _) in &triplets {
        start[r + 1] += 1;
    }
    for r in 0..n {
        start[r + 1] += start[r];
    }
    let mut fill = start.clone();
    let mut by_row = vec![(0usize, 0u32); triplets.len()];
    for (r, c, t) in triplets {
        by_row[fill[r]] = (c, t);
        fill[r] += 1;
    }
    let floats: Vec<Complex64> = table.iter().map(Coefficient::to_complex).collect();
    let exact_kind = if table.iter().any(|c| c.as_exact().is_none()) {
        None
    } else {
        Some(table.iter().all(|c| c.as_exact().unwrap().as_rational().is_some()))
    };
    let scaled = if exact_kind == Some(true) { scaled_table(table) } else { None };
    let mut integer: Option<Vec<Vec<(usize, i64)>>> = scaled.as_ref().map(|_| vec![Vec::new(); n]);
    let mut float = SparseMatrix::zeros(n);
    let mut rational = SparseExact::<BigRational>::zeros(n, n);
    let mut cyclotomic = SparseExact::<Cyclotomic>::zeros(n, n);
    for r in 0..n {
        let row = &mut by_row[start[r]..start[r + 1]];
        row.sort_unstable();
        let mut i = 0;
        while i < row.len() {
            let (c, t) = row[i];
            let mut j = i + 1;
            while j < row.len() && row[j].0 == c {
                j += 1;
            }
            let single = j == i + 1;
            let merged;
            let v = if single {
                &table[t as usize]
            } else {
                merged = row[i + 1..j].iter().fold(table[t as usize].clone(), |acc, e| acc.add(&table[e.1 as usize]));
                &merged
            };
            i = j;
            if v.is_zero() {
                continue;
            }
            float.rows[r].push((c, if single { floats[t as usize] } else { v.to_complex() }));
            if let (Some((den, nums)), Some(int_rows)) = (&scaled, integer.as_mut()) {
                let num = if single {
                    Some(nums[t as usize])
                } else {
                    let q = v.as_exact().unwrap().as_rational().unwrap() * BigRational::from_integer(BigInt::from(*den));
                    q.to_integer().to_i64()
                };
                if let Some(x) = num {
                    int_rows[r].push((c, x));
                    continue;
                }
                // overflowed: move what was built so far over to ℚ
                let d = BigInt::from(*den);
                for (dst, src) in rational.rows.iter_mut().zip(int_rows.iter()) {
                    dst.extend(src.iter().map(|&(c, x)| (c, BigRational::new(BigInt::from(x), d.clone()))));
                }
                integer = None;
            }
            match exact_kind {
                Some(true) => rational.rows[r].push((c, v.as_exact().unwrap().as_rational().unwrap().clone())),
                Some(false) => cyclotomic.rows[r].push((c, v.as_exact().unwrap().clone())),
                None => {}
            }
        }
    }
    let exact = match exact_kind {
        Some(true) => Some(match (integer, scaled) {
            (Some(rows), Some((den, _))) => ExactMatrix::Integer { den, rows },
            _ => ExactMatrix::Rational(rational),
        }),
        Some(false) => Some(ExactMatrix::Cyclotomic(cyclotomic)),
        None => None,
    };
    (float, exact)
}

/// Left regular realization of a matrix over a finite group: the
/// `((g,k),(h,l))` entry is the coefficient of `g·h⁻¹` in `Bₖₗ`.
pub fn realize_over_finite(b: &RingMatrix, index: usize, source_kappa: f64) -> Result<FiniteRealization> {
    let group = b.group().clone();
    let elements = group.elements()?;
    let order = elements.len();
    let d = b.dim();
    let n = order * d;
    let mut triplets = Vec::new();
    let mut table = Vec::new();
    for k in 0..d {
        for l in 0..d {
            for (s, c) in b.get(k, l).terms() {
                let t = table.len() as u32;
                table.push(c.clone());
                let s_inv = group.inv(s)?;
                for (gi, g) in elements.iter().enumerate() {
                    let h = group.mul(&s_inv, g)?;
                    let hi = group.index_of(&h)?;
                    triplets.push((gi * d + k, hi * d + l, t));
                }
            }
        }
    }
    let (matrix, exact) = assemble(triplets, &table, n);
    let labels = elements
        .iter()
        .flat_map(|g| (0..d).map(move |k| BasisLabel::Limit { g: g.clone(), k }))
        .collect();
    Ok(FiniteRealization {
        index,
        group,
        d,
        bases: 1,
        labels,
        matrix,
        exact,
        normalization_den: 1,
        source_kappa,
        lifts: Vec::new(),
    })
}

/// `A[i] = pᵢ(A)`, realized on `ℓ²(Gᵢ)ᵈ`.
pub fn build_inverse_limit_stage(a: &RingMatrix, p: &QuotientMap, index: usize) -> Result<FiniteRealization> {
    let pushed = a.pushforward(p)?;
    realize_over_finite(&pushed, index, a.kappa().kappa)
}

/// The reduction `G → G_n` that replaces every free abelian factor `ℤʳ` of
/// `G` by `(ℤ/n)ʳ` and keeps finite factors, generator names preserved.
pub fn reduction_map(g: &Group, n: u32) -> Result<QuotientMap> {
    let mut factors = Vec::new();
    let push_factor = |f: &Group, factors: &mut Vec<Group>| -> Result<()> {
        match f.kind() {
            GroupKind::FreeAbelian { .. } => {
                for gen in f.generators() {
                    factors.push(Group::cyclic(n, &gen.name)?);
                }
                Ok(())
            }
            _ if f.is_finite() => {
                factors.push(f.clone());
                Ok(())
            }
            _ => Err(Error::Unsupported(format!("cannot reduce factor {}", f.describe()))),
        }
    };
    match g.kind() {
        GroupKind::DirectProduct(fs) => {
            for f in fs {
                push_factor(f, &mut factors)?;
            }
        }
        _ => push_factor(g, &mut factors)?,
    }
    let target = if factors.len() == 1 { factors.pop().unwrap() } else { Group::direct_product(factors)? };
    let names: Vec<(&str, &str)> = g.generators().iter().map(|s| (s.name.as_str(), s.name.as_str())).collect();
    QuotientMap::from_words(g.clone(), target, &names)
}

/// A direct system `G₀ → G₁ → …` of finite groups with compatible maps
/// `ψᵢ : Gᵢ → G` into the group the matrix lives on.
#[derive(Clone, Debug)]
pub struct DirectSystem {
    pub target: Group,
    pub stages: Vec<Group>,
    pub to_target: Vec<QuotientMap>,
    pub connecting: Vec<QuotientMap>,
}

impl DirectSystem {
    pub fn new(target: Group, to_target: Vec<QuotientMap>, connecting: Vec<QuotientMap>) -> Result<Self> {
        if to_target.is_empty() {
            return Err(Error::Infeasible("direct system without stages".to_string()));
        }
        if connecting.len() + 1 != to_target.len() {
            return Err(Error::Infeasible("need one connecting map between consecutive stages".to_string()));
        }
        let stages: Vec<Group> = to_target.iter().map(|p| p.source().clone()).collect();
        for p in &to_target {
            if *p.target() != target {
                return Err(Error::DescriptorMismatch);
            }
        }
        for (i, phi) in connecting.iter().enumerate() {
            if *phi.source() != stages[i] || *phi.target() != stages[i + 1] {
                return Err(Error::DescriptorMismatch);
            }
            for gen in stages[i].generators() {
                let lhs = to_target[i + 1].apply(&phi.apply(&gen.element)?)?;
                if lhs != to_target[i].apply(&gen.element)? {
                    return Err(Error::NotHomomorphism(format!(
                        "maps into the limit are not compatible at stage {i}, generator `{}`",
                        gen.name
                    )));
                }
            }
        }
        Ok(DirectSystem { target, stages, to_target, connecting })
    }

    /// `ℤ/2ᵏ` inside the window `ℤ/2ᴷ`, `k = 1..=K`, with `1 ↦ 2` between
    /// stages: a finite window onto the Prüfer 2-group.
    pub fn prufer(window_exponent: u32) -> Result<Self> {
        if !(1..=30).contains(&window_exponent) {
            return Err(Error::OutOfRange("window exponent must lie in 1..=30".to_string()));
        }
        let target = Group::cyclic(1 << window_exponent, "u")?;
        let stages: Vec<Group> =
            (1..=window_exponent).map(|k| Group::cyclic(1 << k, "u")).collect::<Result<_>>()?;
        let to_target = stages
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let k = i as u32 + 1;
                QuotientMap::new(s.clone(), target.clone(), vec![GroupElement::Table(1 << (window_exponent - k))])
            })
            .collect::<Result<_>>()?;
        let connecting = stages
            .windows(2)
            .map(|w| QuotientMap::new(w[0].clone(), w[1].clone(), vec![GroupElement::Table(2)]))
            .collect::<Result<_>>()?;
        Self::new(target, to_target, connecting)
    }

    /// `G × ℤ/2` for the first `depth` stages, then `G`; the extra factor
    /// is killed by the first connecting map into `G` and ignored by `ψ`.
    /// Lifts through the extra factor are genuine choices.
    pub fn collapsing(g: &Group, depth: usize) -> Result<Self> {
        if !g.is_finite() {
            return Err(Error::NotFinite);
        }
        let extra = Group::cyclic(2, "c_extra")?;
        let doubled = Group::direct_product(vec![g.clone(), extra])?;
        let mut to_target = Vec::new();
        let mut connecting = Vec::new();
        let id_names: Vec<(&str, &str)> = g.generators().iter().map(|s| (s.name.as_str(), s.name.as_str())).collect();
        let mut proj = id_names.clone();
        proj.push(("c_extra", "e"));
        for i in 0..depth {
            to_target.push(QuotientMap::from_words(doubled.clone(), g.clone(), &proj)?);
            if i + 1 < depth {
                connecting.push(QuotientMap::from_words(doubled.clone(), doubled.clone(), &{
                    let mut m = id_names.clone();
                    m.push(("c_extra", "c_extra"));
                    m
                })?);
            } else {
                connecting.push(QuotientMap::from_words(doubled.clone(), g.clone(), &proj)?);
            }
        }
        to_target.push(QuotientMap::from_words(g.clone(), g.clone(), &id_names)?);
        Self::new(g.clone(), to_target, connecting)
    }

    /// Image of `x ∈ Gᵢ` in `Gⱼ`, `j ≥ i`.
    pub fn carry(&self, x: &GroupElement, from: usize, to: usize) -> Result<GroupElement> {
        let mut y = x.clone();
        for phi in &self.connecting[from..to] {
            y = phi.apply(&y)?;
        }
        Ok(y)
    }
}

/// Recorded preimages chosen at the first stage `j₀` covering the requested
/// elements.
#[derive(Clone, Debug, PartialEq)]
pub struct LiftChoice {
    pub stage: usize,
    pub lifts: BTreeMap<GroupElement, GroupElement>,
}

/// Chooses, uniformly at random from `rng`, one preimage in `G_{j₀}` for each
/// element, `j₀` the first stage whose image contains all of them.
pub fn choose_lifts<R: RngCore>(sys: &DirectSystem, elements: &[GroupElement], rng: &mut R) -> Result<LiftChoice> {
    for (j, psi) in sys.to_target.iter().enumerate() {
        let mut fibres: BTreeMap<GroupElement, Vec<GroupElement>> = BTreeMap::new();
        for x in sys.stages[j].elements()? {
            fibres.entry(psi.apply(&x)?).or_default().push(x);
        }
        if elements.iter().all(|g| fibres.contains_key(g)) {
            let mut lifts = BTreeMap::new();
            for g in elements {
                let f = &fibres[g];
                let pick = (rng.next_u64() % f.len() as u64) as usize;
                lifts.insert(g.clone(), f[pick].clone());
            }
            return Ok(LiftChoice { stage: j, lifts });
        }
    }
    Err(Error::Infeasible("no stage of the direct system covers the support".to_string()))
}

/// `A[i]`: `A` lifted to `G_{j₀}` by the recorded choices, then carried to
/// `Gᵢ` along the connecting maps.
pub fn build_direct_limit_stage(
    a: &RingMatrix,
    sys: &DirectSystem,
    choice: &LiftChoice,
    index: usize,
) -> Result<FiniteRealization> {
    if index < choice.stage || index >= sys.stages.len() {
        return Err(Error::Infeasible(format!(
            "stage {index} lies outside {}..{}",
            choice.stage,
            sys.stages.len()
        )));
    }
    if *a.group() != sys.target {
        return Err(Error::DescriptorMismatch);
    }
    let stage_group = &sys.stages[index];
    let lifted = a.map_support(stage_group, |g| {
        let x = choice
            .lifts
            .get(g)
            .ok_or_else(|| Error::Infeasible(format!("no lift recorded for {}", a.group().format_element(g))))?;
        sys.carry(x, choice.stage, index)
    })?;
    let mut real = realize_over_finite(&lifted, index, a.kappa().kappa)?;
    real.lifts = choice.lifts.iter().map(|(g, x)| (g.clone(), x.clone())).collect();
    Ok(real)
}

/// Image of a tracked element at a direct-limit stage.
pub fn direct_limit_element(sys: &DirectSystem, choice: &LiftChoice, g: &GroupElement, index: usize) -> Result<GroupElement> {
    let x = choice.lifts.get(g).ok_or_else(|| Error::Infeasible("tracked element has no lift".to_string()))?;
    sys.carry(x, choice.stage, index)
}

/// Splitting `G = U × ℤᵐ` with `U` the product of the finite factors.
#[derive(Clone, Debug)]
pub struct AmenableSplit {
    pub group: Group,
    pub u: Group,
    pub rank: usize,
    // per factor of G: Some(position among finite factors) or None for ℤʳ
    layout: Vec<Option<usize>>,
    finite_count: usize,
}

impl AmenableSplit {
    pub fn new(g: &Group) -> Result<Self> {
        let factors: Vec<Group> = match g.kind() {
            GroupKind::DirectProduct(fs) => fs.clone(),
            _ => vec![g.clone()],
        };
        let mut layout = Vec::new();
        let mut finite = Vec::new();
        let mut rank = 0;
        for f in &factors {
            match f.kind() {
                GroupKind::FreeAbelian { rank: r } => {
                    rank += r;
                    layout.push(None);
                }
                _ if f.is_finite() => {
                    layout.push(Some(finite.len()));
                    finite.push(f.clone());
                }
                _ => {
                    return Err(Error::Unsupported(format!(
                        "factor {} is neither finite nor free abelian",
                        f.describe()
                    )))
                }
            }
        }
        let finite_count = finite.len();
        let u = match finite.len() {
            0 => Group::trivial(),
            1 => finite.pop().unwrap(),
            _ => Group::direct_product(finite)?,
        };
        Ok(AmenableSplit { group: g.clone(), u, rank, layout, finite_count })
    }

    /// `x ↦ (u, z)`.
    pub fn decompose(&self, x: &GroupElement) -> Result<(GroupElement, Vec<i64>)> {
        self.group.check(x)?;
        let comps: Vec<GroupElement> = match x {
            GroupElement::Product(cs) if matches!(self.group.kind(), GroupKind::DirectProduct(_)) => cs.clone(),
            other => vec![other.clone()],
        };
        let mut finite = Vec::new();
        let mut z = Vec::new();
        for (c, slot) in comps.into_iter().zip(&self.layout) {
            match (slot, c) {
                (None, GroupElement::Abelian(v)) => z.extend(v),
                (Some(_), c) => finite.push(c),
                _ => return Err(Error::DescriptorMismatch),
            }
        }
        let u = match self.finite_count {
            0 => self.u.identity(),
            1 => finite.pop().unwrap(),
            _ => GroupElement::Product(finite),
        };
        Ok((u, z))
    }
}

/// A finite subset `Xᵢ` of `G/U ≅ ℤᵐ`, stored sorted.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FolnerSet {
    pub index: usize,
    points: Vec<Vec<i64>>,
}

impl FolnerSet {
    pub fn new(index: usize, points: impl IntoIterator<Item = Vec<i64>>) -> Result<Self> {
        let set: BTreeSet<Vec<i64>> = points.into_iter().collect();
        let points: Vec<Vec<i64>> = set.into_iter().collect();
        if points.is_empty() {
            return Err(Error::Infeasible("empty Følner set".to_string()));
        }
        let m = points[0].len();
        if points.iter().any(|p| p.len() != m) {
            return Err(Error::DimensionMismatch("Følner points of different ranks".to_string()));
        }
        Ok(FolnerSet { index, points })
    }

    /// The box `{0, …, n−1}ᵐ`.
    pub fn box_set(index: usize, rank: usize, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Infeasible("empty Følner set".to_string()));
        }
        let total = n.checked_pow(rank as u32).ok_or_else(|| Error::OutOfRange("box too large".to_string()))?;
        let points = (0..total).map(|mut i| {
            let mut p = vec![0i64; rank];
            for c in (0..rank).rev() {
                p[c] = (i % n) as i64;
                i /= n;
            }
            p
        });
        Self::new(index, points)
    }

    /// `[lo, hi]` in `ℤ`.
    pub fn interval(index: usize, lo: i64, hi: i64) -> Result<Self> {
        Self::new(index, (lo..=hi).map(|x| vec![x]))
    }

    pub fn points(&self) -> &[Vec<i64>] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn rank(&self) -> usize {
        self.points[0].len()
    }

    pub fn contains(&self, p: &[i64]) -> bool {
        self.points.binary_search_by(|q| q.as_slice().cmp(p)).is_ok()
    }

    pub fn position(&self, p: &[i64]) -> Option<usize> {
        self.points.binary_search_by(|q| q.as_slice().cmp(p)).ok()
    }

    pub fn is_subset_of(&self, other: &FolnerSet) -> bool {
        self.points.iter().all(|p| other.contains(p))
    }
}

fn grid_neighbours(p: &[i64]) -> impl Iterator<Item = Vec<i64>> + '_ {
    (0..p.len()).flat_map(move |c| {
        [-1i64, 1].into_iter().map(move |s| {
            let mut q = p.to_vec();
            q[c] += s;
            q
        })
    })
}

/// `N_K(X) = {x : d(x, X) ≤ K and d(x, complement) ≤ K}` for the ℓ¹ word
/// metric on `ℤᵐ`. Points of `X` are at distance ≥ 1 from the complement and
/// vice versa, so `N_0(X) = ∅`.
pub fn neighborhood(fs: &FolnerSet, k: usize) -> Vec<Vec<i64>> {
    if k == 0 {
        return Vec::new();
    }
    // outside: distance to X by BFS outward, up to K
    let mut out_dist: BTreeMap<Vec<i64>, usize> = BTreeMap::new();
    let mut queue: VecDeque<(Vec<i64>, usize)> = VecDeque::new();
    let mut frontier: BTreeSet<Vec<i64>> = BTreeSet::new();
    for p in fs.points() {
        for q in grid_neighbours(p) {
            if !fs.contains(&q) && !out_dist.contains_key(&q) {
                out_dist.insert(q.clone(), 1);
                frontier.insert(q.clone());
                queue.push_back((q, 1));
            }
        }
    }
    while let Some((p, dist)) = queue.pop_front() {
        if dist == k {
            continue;
        }
        for q in grid_neighbours(&p) {
            if !fs.contains(&q) && !out_dist.contains_key(&q) {
                out_dist.insert(q.clone(), dist + 1);
                queue.push_back((q, dist + 1));
            }
        }
    }
    // inside: distance to the complement by BFS inward from the frontier
    let mut in_dist: BTreeMap<Vec<i64>, usize> = BTreeMap::new();
    let mut queue: VecDeque<(Vec<i64>, usize)> = VecDeque::new();
    for p in &frontier {
        for q in grid_neighbours(p) {
            if fs.contains(&q) && !in_dist.contains_key(&q) {
                in_dist.insert(q.clone(), 1);
                queue.push_back((q, 1));
            }
        }
    }
    while let Some((p, dist)) = queue.pop_front() {
        if dist == k {
            continue;
        }
        for q in grid_neighbours(&p) {
            if fs.contains(&q) && !in_dist.contains_key(&q) {
                in_dist.insert(q.clone(), dist + 1);
                queue.push_back((q, dist + 1));
            }
        }
    }
    let mut all: Vec<Vec<i64>> = out_dist.into_keys().chain(in_dist.into_keys()).collect();
    all.sort();
    all
}

/// `|N_K(X)| / |X|`.
pub fn defect(fs: &FolnerSet, k: usize) -> f64 {
    neighborhood(fs, k).len() as f64 / fs.len() as f64
}

/// `A[i] = Pᵢ A Pᵢ` on `ℓ²(π⁻¹(Xᵢ))ᵈ`; the `((x,u,k),(y,v,l))` entry is the
/// coefficient of `(u·v⁻¹, x − y)` in `Aₖₗ`. Normalization `1/|Xᵢ|`.
pub fn build_folner_compression(a: &RingMatrix, fs: &FolnerSet) -> Result<FiniteRealization> {
    let split = AmenableSplit::new(a.group())?;
    if fs.rank() != split.rank {
        return Err(Error::DimensionMismatch(format!(
            "Følner points have rank {} but G/U has rank {}",
            fs.rank(),
            split.rank
        )));
    }
    let u_elems = split.u.elements()?;
    let order = u_elems.len();
    let d = a.dim();
    let n = fs.len() * order * d;
    let pos = |xi: usize, ui: usize, k: usize| (xi * order + ui) * d + k;
    let mut triplets = Vec::new();
    let mut table = Vec::new();
    for k in 0..d {
        for l in 0..d {
            for (s, c) in a.get(k, l).terms() {
                let t = table.len() as u32;
                table.push(c.clone());
                let (su, sz) = split.decompose(s)?;
                let su_inv = split.u.inv(&su)?;
                for (xi, x) in fs.points().iter().enumerate() {
                    let y: Vec<i64> = x.iter().zip(&sz).map(|(p, q)| p - q).collect();
                    let Some(yi) = fs.position(&y) else { continue };
                    for (ui, u) in u_elems.iter().enumerate() {
                        let v = split.u.mul(&su_inv, u)?;
                        let vi = split.u.index_of(&v)?;
                        triplets.push((pos(xi, ui, k), pos(yi, vi, l), t));
                    }
                }
            }
        }
    }
    let (matrix, exact) = assemble(triplets, &table, n);
    let mut labels = Vec::with_capacity(n);
    for x in fs.points() {
        for u in &u_elems {
            for k in 0..d {
                labels.push(BasisLabel::Compression { x: x.clone(), u: u.clone(), k });
            }
        }
    }
    Ok(FiniteRealization {
        index: fs.index,
        group: split.u.clone(),
        d,
        bases: fs.len(),
        labels,
        matrix,
        exact,
        normalization_den: fs.len() as u64,
        source_kappa: a.kappa().kappa,
        lifts: Vec::new(),
    })
}

/// The `U`-component of a tracked element for a compression. Only classes
/// inside `U` are approximated by compressions.
pub fn compression_element(split: &AmenableSplit, g: &GroupElement) -> Result<GroupElement> {
    let (u, z) = split.decompose(g)?;
    if z.iter().any(|&c| c != 0) {
        return Err(Error::Infeasible(format!(
            "`{}` does not lie in the finite subgroup U; Følner compressions only approximate classes of U",
            split.group.format_element(g)
        )));
    }
    Ok(u)
}

/// Conjugacy classes of the stage images of tracked elements.
pub fn stage_classes(group: &Group, elements: &[GroupElement], budget: usize) -> Result<Vec<ConjugacyClassInfo>> {
    elements
        .iter()
        .map(|g| {
            let c = group.conjugacy_class(g, budget)?;
            c.finite_members()?;
            Ok(c)
        })
        .collect()
}

/// Outcome of the telescope estimate for one power `n` and one stage.
#[derive(Clone, Debug, PartialEq)]
pub struct TelescopeCheck {
    pub power: u32,
    pub radius: u64,
    pub defect: f64,
    pub c_n: f64,
    pub stage_value: f64,
    pub limit_value: f64,
    pub bound: f64,
    pub pass: bool,
}

/// Compares `Tr^{⟨g⟩,re}` of `A[i]ⁿ` and of `Aⁿ` against
/// `c_n · |N_R(Xᵢ)| / |Xᵢ|`, `c_n = 2n κ(A)ⁿ`, where `R` is the largest
/// support radius of `Aʲ`, `j ≤ n`.
pub fn telescope_check(a: &RingMatrix, fs: &FolnerSet, g: &GroupElement, n: u32) -> Result<TelescopeCheck> {
    let split = AmenableSplit::new(a.group())?;
    let u = compression_element(&split, g)?;
    let cls_g = a.group().conjugacy_class(g, 1 << 16)?;
    let cls_u = split.u.conjugacy_class(&u, 1 << 16)?;
    let mut radius = 0;
    let mut power = RingMatrix::identity(a.group(), a.dim());
    for _ in 0..n {
        power = power.mul(a)?;
        radius = radius.max(power.support_radius()?);
    }
    let limit_value = power.trace_deviated(&cls_g, Part::Re)?.to_complex().re;
    let real = build_folner_compression(a, fs)?;
    let stage_value = real.deviated_power_trace(n, &cls_u, Part::Re)?;
    let kappa = a.kappa().kappa;
    let c_n = 2.0 * n as f64 * libm::pow(kappa, n as f64);
    let defect = defect(fs, radius as usize);
    let bound = c_n * defect;
    let diff = (stage_value - limit_value).abs();
    Ok(TelescopeCheck {
        power: n,
        radius,
        defect,
        c_n,
        stage_value,
        limit_value,
        bound,
        pass: diff <= bound + 1e-9 * (1.0 + limit_value.abs()),
    })
}

/// For limit stages past support stabilization, `trᵢ(A[i]ⁿ) = tr(Aⁿ)`;
/// returns both sides, exactly when the realization has an exact copy.
pub fn limit_trace_pair(a: &RingMatrix, real: &FiniteRealization, n: u32) -> Result<(Coefficient, Coefficient)> {
    let limit = a.pow(n)?.trace_standard();
    let e = real.group.identity();
    let cls = real.group.conjugacy_class(&e, 1)?;
    let stage = if real.exact.is_some() {
        Coefficient::Exact(real.power_traces_exact(n, &cls)?.0)
    } else {
        Coefficient::real(real.power_traces(n, &cls)?.0)
    };
    Ok((stage, limit))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::eigvalsh;
    use crate::parse::parse_element;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn z() -> Group {
        Group::free_abelian(&["u"]).unwrap()
    }

    fn z2z() -> Group {
        Group::direct_product(vec![Group::cyclic(2, "t").unwrap(), z()]).unwrap()
    }

    fn elem(g: &Group, s: &str) -> RingMatrix {
        RingMatrix::from_element(parse_element(g, s).unwrap())
    }

    #[test]
    fn inverse_limit_circulant() {
        let a = elem(&z(), "2 - u - u^-1");
        let p = reduction_map(&z(), 6).unwrap();
        let r = build_inverse_limit_stage(&a, &p, 6).unwrap();
        let row: Vec<f64> = (0..6).map(|j| r.matrix.get(0, j).re).collect();
        assert_eq!(row, vec![2.0, -1.0, 0.0, 0.0, 0.0, -1.0]);
        let ev = eigvalsh(&r.matrix).unwrap();
        let mut expected: Vec<f64> =
            (0..6).map(|k| 2.0 - 2.0 * libm::cos(2.0 * core::f64::consts::PI * k as f64 / 6.0)).collect();
        expected.sort_by(f64::total_cmp);
        for (x, y) in ev.iter().zip(&expected) {
            assert!((x - y).abs() < 1e-12);
        }
        assert!(matches!(r.exact, Some(ExactMatrix::Integer { .. })));
    }

    #[test]
    fn inverse_limit_identity_and_collisions() {
        let id = RingMatrix::identity(&z(), 2);
        let r = build_inverse_limit_stage(&id, &reduction_map(&z(), 5).unwrap(), 5).unwrap();
        assert_eq!(r.matrix, SparseMatrix::identity(10));
        let a = elem(&z(), "1 + u + u^2 + u^3");
        let r = build_inverse_limit_stage(&a, &reduction_map(&z(), 2).unwrap(), 2).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert_eq!(r.matrix.get(i, j).re, 2.0);
            }
        }
    }

    #[test]
    fn compression_examples() {
        let id = RingMatrix::identity(&z2z(), 1);
        let fs = FolnerSet::box_set(3, 1, 3).unwrap();
        let r = build_folner_compression(&id, &fs).unwrap();
        assert_eq!(r.matrix, SparseMatrix::identity(6));
        // normalized trace over the trace vectors (x, e_U, k) equals d
        let e_u = r.group.identity();
        let (std, _) = r.power_traces(1, &r.group.conjugacy_class(&e_u, 1).unwrap()).unwrap();
        assert_eq!(std, 1.0);

        let lap = elem(&z(), "2 - u - u^-1");
        let fs = FolnerSet::box_set(5, 1, 5).unwrap();
        let r = build_folner_compression(&lap, &fs).unwrap();
        let ev = eigvalsh(&r.matrix).unwrap();
        for (k, x) in ev.iter().enumerate() {
            let expected = 2.0 - 2.0 * libm::cos(core::f64::consts::PI * (k + 1) as f64 / 6.0);
            assert!((x - expected).abs() < 1e-12);
        }
        assert_eq!(r.matrix.get(0, 4).re, 0.0);
    }

    #[test]
    fn compression_of_product_family_has_growing_kernel() {
        let a = elem(&z2z(), "(1 - t)(2 - u - u^-1)");
        for n in [4usize, 8, 16] {
            let r = build_folner_compression(&a, &FolnerSet::box_set(n, 1, n).unwrap()).unwrap();
            let ev = eigvalsh(&r.matrix).unwrap();
            assert_eq!(ev.iter().filter(|x| x.abs() < 1e-9).count(), n);
        }
    }

    #[test]
    fn neighbourhood_examples() {
        let n = 4;
        let fs = FolnerSet::interval(0, -n, n).unwrap();
        assert_eq!(neighborhood(&fs, 1), vec![vec![-n - 1], vec![-n], vec![n], vec![n + 1]]);
        assert!(neighborhood(&fs, 0).is_empty());
        for n in [5usize, 10, 20] {
            let sq = FolnerSet::box_set(0, 2, n).unwrap();
            let size = neighborhood(&sq, 1).len();
            // 4n inside + 4n outside, corners of the outside ring excluded
            assert_eq!(size, 8 * n - 4);
        }
        let mut last = f64::INFINITY;
        for n in [4usize, 8, 16, 32] {
            let dft = defect(&FolnerSet::box_set(0, 1, n).unwrap(), 2);
            assert!(dft < last);
            last = dft;
        }
    }

    #[test]
    fn direct_limit_prufer_stabilizes() {
        let sys = DirectSystem::prufer(5).unwrap();
        let g = &sys.target;
        // 2 − x − x⁻¹ with x = 8 ∈ ℤ/32, the image of the generator of ℤ/4
        let x = GroupElement::Table(8);
        let a = RingMatrix::from_element(
            crate::ring::RingElement::from_terms(
                g,
                [
                    (g.identity(), Coefficient::from(2)),
                    (x.clone(), Coefficient::from(-1)),
                    (g.inv(&x).unwrap(), Coefficient::from(-1)),
                ],
            )
            .unwrap(),
        );
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let support = a.support();
        let choice = choose_lifts(&sys, &support, &mut rng).unwrap();
        assert_eq!(choice.stage, 1);
        for i in choice.stage..sys.stages.len() {
            let r = build_direct_limit_stage(&a, &sys, &choice, i).unwrap();
            for n in 1..5 {
                let (s, l) = limit_trace_pair(&a, &r, n).unwrap();
                assert_eq!(s, l);
            }
        }
    }

    #[test]
    fn direct_limit_choices_are_recorded_and_traces_agree_after_collapse() {
        let c3 = Group::cyclic(3, "s").unwrap();
        let sys = DirectSystem::collapsing(&c3, 2).unwrap();
        let a = elem(&c3, "3 + s + s^-1");
        let support = a.support();
        let mut values = Vec::new();
        for seed in 0..8 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let choice = choose_lifts(&sys, &support, &mut rng).unwrap();
            assert_eq!(choice.stage, 0);
            let last = sys.stages.len() - 1;
            let r = build_direct_limit_stage(&a, &sys, &choice, last).unwrap();
            assert_eq!(r.lifts.len(), support.len());
            let traces: Vec<Coefficient> = (1..6).map(|n| limit_trace_pair(&a, &r, n).unwrap().0).collect();
            values.push(traces);
        }
        assert!(values.windows(2).all(|w| w[0] == w[1]));
    }

    #[test]
    fn telescope_bound_small() {
        let a = elem(&z2z(), "(1 - t)(2 - u - u^-1)");
        let t = z2z().generator("t").unwrap();
        for n in 1..=3 {
            for size in [4usize, 16] {
                let fs = FolnerSet::box_set(size, 1, size).unwrap();
                let c = telescope_check(&a, &fs, &t, n).unwrap();
                assert!(c.pass, "{c:?}");
            }
        }
        let u = z2z().generator("u").unwrap();
        let fs = FolnerSet::box_set(4, 1, 4).unwrap();
        assert!(matches!(telescope_check(&a, &fs, &u, 1), Err(Error::Infeasible(_))));
    }
}
