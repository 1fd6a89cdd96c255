//! Elements and square matrices of the group ring K[G], with K either an
//! exact cyclotomic field or complex doubles.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use num_complex::Complex64;
use num_integer::Integer;

use crate::cyclotomic::Cyclotomic;
use crate::error::{Error, Result};
use crate::group::{ConjugacyClassInfo, Group, GroupElement, QuotientMap};

/// A scalar of the coefficient field.
#[derive(Clone, Debug)]
pub enum Coefficient {
    Exact(Cyclotomic),
    Float(Complex64),
}

impl PartialEq for Coefficient {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Coefficient::Exact(a), Coefficient::Exact(b)) => a == b,
            _ => self.to_complex() == other.to_complex(),
        }
    }
}

impl From<Cyclotomic> for Coefficient {
    fn from(c: Cyclotomic) -> Self {
        Coefficient::Exact(c)
    }
}

impl From<i64> for Coefficient {
    fn from(k: i64) -> Self {
        Coefficient::Exact(Cyclotomic::from_integer(k))
    }
}

impl From<Complex64> for Coefficient {
    fn from(z: Complex64) -> Self {
        Coefficient::Float(z)
    }
}

impl fmt::Display for Coefficient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Coefficient::Exact(c) => write!(f, "{c}"),
            Coefficient::Float(z) if z.im == 0.0 => write!(f, "{}", z.re),
            Coefficient::Float(z) => write!(f, "{}{:+}i", z.re, z.im),
        }
    }
}

impl Coefficient {
    pub fn zero() -> Self {
        Coefficient::Exact(Cyclotomic::zero())
    }

    pub fn one() -> Self {
        Coefficient::Exact(Cyclotomic::one())
    }

    pub fn real(x: f64) -> Self {
        Coefficient::Float(Complex64::new(x, 0.0))
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, Coefficient::Exact(_))
    }

    /// Exact zero test; float values are never rounded to zero.
    pub fn is_zero(&self) -> bool {
        match self {
            Coefficient::Exact(c) => c.is_zero(),
            Coefficient::Float(z) => z.re == 0.0 && z.im == 0.0,
        }
    }

    pub fn to_complex(&self) -> Complex64 {
        match self {
            Coefficient::Exact(c) => c.to_complex(),
            Coefficient::Float(z) => *z,
        }
    }

    pub fn abs(&self) -> f64 {
        self.to_complex().norm()
    }

    pub fn as_exact(&self) -> Option<&Cyclotomic> {
        match self {
            Coefficient::Exact(c) => Some(c),
            Coefficient::Float(_) => None,
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        match (self, other) {
            (Coefficient::Exact(a), Coefficient::Exact(b)) => Coefficient::Exact(a + b),
            _ => Coefficient::Float(self.to_complex() + other.to_complex()),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        match (self, other) {
            (Coefficient::Exact(a), Coefficient::Exact(b)) => Coefficient::Exact(a - b),
            _ => Coefficient::Float(self.to_complex() - other.to_complex()),
        }
    }

    pub fn mul(&self, other: &Self) -> Self {
        match (self, other) {
            (Coefficient::Exact(a), Coefficient::Exact(b)) => Coefficient::Exact(a * b),
            _ => Coefficient::Float(self.to_complex() * other.to_complex()),
        }
    }

    pub fn neg(&self) -> Self {
        match self {
            Coefficient::Exact(a) => Coefficient::Exact(-a),
            Coefficient::Float(z) => Coefficient::Float(-z),
        }
    }

    pub fn conj(&self) -> Self {
        match self {
            Coefficient::Exact(a) => Coefficient::Exact(a.conj()),
            Coefficient::Float(z) => Coefficient::Float(z.conj()),
        }
    }

    pub fn to_float(&self) -> Self {
        Coefficient::Float(self.to_complex())
    }

    pub fn galois(&self, j: i64) -> Result<Self> {
        match self {
            Coefficient::Exact(a) => Ok(Coefficient::Exact(a.galois(j)?)),
            Coefficient::Float(_) => Err(Error::NotExact),
        }
    }

    /// Parses an exact cyclotomic expression (`p/q`, `p/q*z^k@n`, sums of
    /// these) or, failing that, a decimal real number.
    pub fn parse(s: &str) -> Result<Self> {
        match Cyclotomic::parse(s) {
            Ok(c) => Ok(Coefficient::Exact(c)),
            Err(e) => s.trim().parse::<f64>().map(Coefficient::real).map_err(|_| e),
        }
    }
}

/// A finitely supported function `G → K`.
#[derive(Clone, Debug, PartialEq)]
pub struct RingElement {
    group: Group,
    terms: BTreeMap<GroupElement, Coefficient>,
}

impl RingElement {
    pub fn zero(group: &Group) -> Self {
        RingElement { group: group.clone(), terms: BTreeMap::new() }
    }

    pub fn one(group: &Group) -> Self {
        Self::monomial(group, group.identity(), Coefficient::one())
    }

    pub fn scalar(group: &Group, c: Coefficient) -> Self {
        Self::monomial(group, group.identity(), c)
    }

    pub fn monomial(group: &Group, g: GroupElement, c: Coefficient) -> Self {
        let mut x = Self::zero(group);
        x.add_term(g, c);
        x
    }

    /// Sums the given terms; repeated elements accumulate.
    pub fn from_terms(
        group: &Group,
        terms: impl IntoIterator<Item = (GroupElement, Coefficient)>,
    ) -> Result<Self> {
        let mut x = Self::zero(group);
        for (g, c) in terms {
            group.check(&g)?;
            x.add_term(g, c);
        }
        Ok(x)
    }

    /// `(word, coefficient)` string pairs.
    pub fn parse_terms(group: &Group, terms: &[(&str, &str)]) -> Result<Self> {
        let mut x = Self::zero(group);
        for (w, c) in terms {
            x.add_term(group.parse_word(w)?, Coefficient::parse(c)?);
        }
        Ok(x)
    }

    pub fn add_term(&mut self, g: GroupElement, c: Coefficient) {
        if c.is_zero() {
            return;
        }
        match self.terms.remove(&g) {
            Some(old) => {
                let s = old.add(&c);
                if !s.is_zero() {
                    self.terms.insert(g, s);
                }
            }
            None => {
                self.terms.insert(g, c);
            }
        }
    }

    pub fn group(&self) -> &Group {
        &self.group
    }

    pub fn terms(&self) -> &BTreeMap<GroupElement, Coefficient> {
        &self.terms
    }

    pub fn support(&self) -> impl Iterator<Item = &GroupElement> {
        self.terms.keys()
    }

    pub fn support_size(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coefficient(&self, g: &GroupElement) -> Coefficient {
        self.terms.get(g).cloned().unwrap_or_else(Coefficient::zero)
    }

    pub fn is_exact(&self) -> bool {
        self.terms.values().all(|c| c.is_exact())
    }

    fn same_group(&self, other: &Self) -> Result<()> {
        if self.group == other.group {
            Ok(())
        } else {
            Err(Error::DescriptorMismatch)
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.same_group(other)?;
        let mut x = self.clone();
        for (g, c) in &other.terms {
            x.add_term(g.clone(), c.clone());
        }
        Ok(x)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> Self {
        self.scale(&Coefficient::from(-1))
    }

    pub fn scale(&self, c: &Coefficient) -> Self {
        let mut x = Self::zero(&self.group);
        for (g, a) in &self.terms {
            x.add_term(g.clone(), a.mul(c));
        }
        x
    }

    /// `(a·b)(g) = Σₕ a(h) b(h⁻¹g)`.
    pub fn convolve(&self, other: &Self) -> Result<Self> {
        self.same_group(other)?;
        let mut x = Self::zero(&self.group);
        for (g, a) in &self.terms {
            for (h, b) in &other.terms {
                x.add_term(self.group.mul(g, h)?, a.mul(b));
            }
        }
        Ok(x)
    }

    /// `a*(g) = conj(a(g⁻¹))`.
    pub fn adjoint(&self) -> Self {
        let mut x = Self::zero(&self.group);
        for (g, a) in &self.terms {
            x.add_term(self.group.inv(g).expect("support lies in the group"), a.conj());
        }
        x
    }

    /// Image under a homomorphism; colliding coefficients are summed.
    pub fn pushforward(&self, p: &QuotientMap) -> Result<Self> {
        if *p.source() != self.group {
            return Err(Error::DescriptorMismatch);
        }
        let mut x = Self::zero(p.target());
        for (g, a) in &self.terms {
            x.add_term(p.apply(g)?, a.clone());
        }
        Ok(x)
    }

    /// Relabels the support with `f`, which must land in `target`.
    pub fn map_support(
        &self,
        target: &Group,
        mut f: impl FnMut(&GroupElement) -> Result<GroupElement>,
    ) -> Result<Self> {
        let mut x = Self::zero(target);
        for (g, a) in &self.terms {
            let h = f(g)?;
            target.check(&h)?;
            x.add_term(h, a.clone());
        }
        Ok(x)
    }

    pub fn galois(&self, j: i64) -> Result<Self> {
        let mut x = Self::zero(&self.group);
        for (g, a) in &self.terms {
            x.add_term(g.clone(), a.galois(j)?);
        }
        Ok(x)
    }

    pub fn to_float(&self) -> Self {
        let mut x = Self::zero(&self.group);
        for (g, a) in &self.terms {
            x.add_term(g.clone(), a.to_float());
        }
        x
    }

    pub fn sup_norm(&self) -> f64 {
        self.terms.values().map(|c| c.abs()).fold(0.0, f64::max)
    }

    /// Largest word length over the support.
    pub fn support_radius(&self) -> Result<u64> {
        self.terms.keys().try_fold(0, |r, g| Ok(r.max(self.group.word_length(g)?)))
    }

    /// Sum of the coefficients at the members of a finite class.
    pub fn class_sum(&self, cls: &ConjugacyClassInfo) -> Result<Coefficient> {
        let members = cls.finite_members()?;
        let mut acc = Coefficient::zero();
        for h in members {
            if let Some(c) = self.terms.get(h) {
                acc = acc.add(c);
            }
        }
        Ok(acc)
    }
}

impl fmt::Display for RingElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let parts: Vec<String> = self
            .terms
            .iter()
            .map(|(g, c)| format!("({c})*{}", self.group.format_element(g)))
            .collect();
        write!(f, "{}", parts.join(" + "))
    }
}

/// Which part of the delocalized trace a deviated trace keeps.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Part {
    Re,
    Im,
}

/// Combinatorial norm bound `κ(A) = √(S(A)·S(A*))·|A|∞`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KappaReport {
    pub s_a: usize,
    pub s_astar: usize,
    pub sup_norm: f64,
    pub kappa: f64,
}

/// Right-hand sides of the determinant lower bounds built from the Galois
/// conjugates `σⱼ(A)`, `j ≠ 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct LowerBounds {
    /// `(j, κ(σⱼ(A)))` for every nontrivial Galois index.
    pub conjugate_kappas: Vec<(i64, f64)>,
    /// `−d Σ ln κ(σⱼ(A))`, bound for the standard determinant.
    pub b0: f64,
    /// `−2d |Σ ln κ(σⱼ(A))|`, bound for the deviated determinants.
    pub b1: f64,
}

/// A `d × d` matrix over K[G], stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct RingMatrix {
    group: Group,
    d: usize,
    entries: Vec<RingElement>,
}

impl RingMatrix {
    pub fn zero(group: &Group, d: usize) -> Self {
        RingMatrix { group: group.clone(), d, entries: (0..d * d).map(|_| RingElement::zero(group)).collect() }
    }

    pub fn identity(group: &Group, d: usize) -> Self {
        let mut m = Self::zero(group, d);
        for k in 0..d {
            m.entries[k * d + k] = RingElement::one(group);
        }
        m
    }

    /// A `1 × 1` matrix.
    pub fn from_element(a: RingElement) -> Self {
        RingMatrix { group: a.group.clone(), d: 1, entries: Vec::from([a]) }
    }

    pub fn from_rows(group: &Group, rows: Vec<Vec<RingElement>>) -> Result<Self> {
        let d = rows.len();
        if d == 0 {
            return Err(Error::DimensionMismatch("empty matrix".to_string()));
        }
        let mut entries = Vec::with_capacity(d * d);
        for row in rows {
            if row.len() != d {
                return Err(Error::DimensionMismatch(format!("row of length {} in a {d}×{d} matrix", row.len())));
            }
            for a in row {
                if a.group != *group {
                    return Err(Error::DescriptorMismatch);
                }
                entries.push(a);
            }
        }
        Ok(RingMatrix { group: group.clone(), d, entries })
    }

    pub fn group(&self) -> &Group {
        &self.group
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn get(&self, k: usize, l: usize) -> &RingElement {
        &self.entries[k * self.d + l]
    }

    pub fn set(&mut self, k: usize, l: usize, a: RingElement) -> Result<()> {
        if a.group != self.group {
            return Err(Error::DescriptorMismatch);
        }
        self.entries[k * self.d + l] = a;
        Ok(())
    }

    pub fn entries(&self) -> &[RingElement] {
        &self.entries
    }

    fn compatible(&self, other: &Self) -> Result<()> {
        if self.group != other.group {
            return Err(Error::DescriptorMismatch);
        }
        if self.d != other.d {
            return Err(Error::DimensionMismatch(format!("{}×{} vs {}×{}", self.d, self.d, other.d, other.d)));
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.compatible(other)?;
        let entries = self.entries.iter().zip(&other.entries).map(|(a, b)| a.add(b)).collect::<Result<_>>()?;
        Ok(RingMatrix { group: self.group.clone(), d: self.d, entries })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scale(&Coefficient::from(-1)))
    }

    pub fn scale(&self, c: &Coefficient) -> Self {
        RingMatrix {
            group: self.group.clone(),
            d: self.d,
            entries: self.entries.iter().map(|a| a.scale(c)).collect(),
        }
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.compatible(other)?;
        let d = self.d;
        let mut entries = Vec::with_capacity(d * d);
        for k in 0..d {
            for l in 0..d {
                let mut acc = RingElement::zero(&self.group);
                for m in 0..d {
                    let (a, b) = (self.get(k, m), other.get(m, l));
                    if !a.is_zero() && !b.is_zero() {
                        acc = acc.add(&a.convolve(b)?)?;
                    }
                }
                entries.push(acc);
            }
        }
        Ok(RingMatrix { group: self.group.clone(), d, entries })
    }

    pub fn pow(&self, n: u32) -> Result<Self> {
        let mut acc = Self::identity(&self.group, self.d);
        for _ in 0..n {
            acc = acc.mul(self)?;
        }
        Ok(acc)
    }

    /// `(A*)ₖₗ = (Aₗₖ)*`.
    pub fn adjoint(&self) -> Self {
        let d = self.d;
        let mut entries = Vec::with_capacity(d * d);
        for k in 0..d {
            for l in 0..d {
                entries.push(self.get(l, k).adjoint());
            }
        }
        RingMatrix { group: self.group.clone(), d, entries }
    }

    pub fn is_exact(&self) -> bool {
        self.entries.iter().all(|a| a.is_exact())
    }

    /// Largest coefficient distance between `A` and `A*`.
    pub fn hermitian_deviation(&self) -> f64 {
        let adj = self.adjoint();
        let mut dev: f64 = 0.0;
        for (a, b) in self.entries.iter().zip(&adj.entries) {
            for g in a.support().chain(b.support()) {
                dev = dev.max(a.coefficient(g).sub(&b.coefficient(g)).abs());
            }
        }
        dev
    }

    pub fn is_hermitian(&self) -> bool {
        if self.is_exact() {
            *self == self.adjoint()
        } else {
            self.hermitian_deviation() <= 1e-12
        }
    }

    /// `Σₖ` coefficient of `e` in `Aₖₖ`.
    pub fn trace_standard(&self) -> Coefficient {
        let e = self.group.identity();
        (0..self.d).fold(Coefficient::zero(), |acc, k| acc.add(&self.get(k, k).coefficient(&e)))
    }

    /// `Σₖ Σ_{h ∈ cls}` coefficient of `h` in `Aₖₖ`.
    pub fn trace_delocalized(&self, cls: &ConjugacyClassInfo) -> Result<Coefficient> {
        let mut acc = Coefficient::zero();
        for k in 0..self.d {
            acc = acc.add(&self.get(k, k).class_sum(cls)?);
        }
        Ok(acc)
    }

    /// `tr(A) + (1/2|⟨g⟩|)(tr^⟨g⟩ + tr^⟨g⁻¹⟩)(A)` for [`Part::Re`] and
    /// `tr(A) + (1/2i|⟨g⟩|)(tr^⟨g⟩ − tr^⟨g⁻¹⟩)(A)` for [`Part::Im`].
    /// Both are real when `A` is Hermitian.
    pub fn trace_deviated(&self, cls: &ConjugacyClassInfo, part: Part) -> Result<Coefficient> {
        let inverse_class = inverse_class(&self.group, cls)?;
        let size = cls.finite_members()?.len() as i64;
        let t = self.trace_delocalized(cls)?;
        let t_inv = self.trace_delocalized(&inverse_class)?;
        let (sum, factor) = match part {
            Part::Re => (t.add(&t_inv), Cyclotomic::from_fraction(1, 2 * size)),
            // 1/(2i) = −i/2
            Part::Im => (t.sub(&t_inv), &Cyclotomic::zeta(4, 1) * &Cyclotomic::from_fraction(-1, 2 * size)),
        };
        Ok(self.trace_standard().add(&sum.mul(&Coefficient::Exact(factor))))
    }

    /// κ(A) with `S(A) = maxₖ Σₗ |supp Aₖₗ|` and `S(A*)` the column analogue.
    pub fn kappa(&self) -> KappaReport {
        let d = self.d;
        let s_a = (0..d).map(|k| (0..d).map(|l| self.get(k, l).support_size()).sum()).max().unwrap_or(0);
        let s_astar = (0..d).map(|l| (0..d).map(|k| self.get(k, l).support_size()).sum()).max().unwrap_or(0);
        let sup_norm = self.entries.iter().map(|a| a.sup_norm()).fold(0.0, f64::max);
        let kappa = libm::sqrt((s_a * s_astar) as f64) * sup_norm;
        KappaReport { s_a, s_astar, sup_norm, kappa }
    }

    /// Lcm of the coefficient conductors; `None` if any coefficient is a float.
    pub fn conductor(&self) -> Option<u32> {
        let mut n = 1u32;
        for a in &self.entries {
            for c in a.terms.values() {
                n = n.lcm(&c.as_exact()?.conductor());
            }
        }
        Some(n)
    }

    /// Applies `ζ ↦ ζʲ` to every coefficient.
    pub fn galois_conjugate(&self, j: i64) -> Result<Self> {
        let n = self.conductor().ok_or(Error::NotExact)?;
        if (j.rem_euclid(n as i64) as u32).gcd(&n) != 1 {
            return Err(Error::GaloisIndexNotUnit { j, n });
        }
        let entries = self.entries.iter().map(|a| a.galois(j)).collect::<Result<_>>()?;
        Ok(RingMatrix { group: self.group.clone(), d: self.d, entries })
    }

    /// `B₀ = −d Σ_{j≠1} ln κ(σⱼ(A))` and `B₁ = −2d |Σ_{j≠1} ln κ(σⱼ(A))|`,
    /// the sum running over the Galois group of ℚ(ζₙ), `n` the conductor.
    pub fn determinant_lower_bound_rhs(&self) -> Result<LowerBounds> {
        let n = self.conductor().ok_or(Error::NotExact)?;
        let mut conjugate_kappas = Vec::new();
        let mut sum = 0.0;
        for j in Cyclotomic::galois_indices(n).into_iter().skip(1) {
            let k = self.galois_conjugate(j)?.kappa().kappa;
            sum += libm::log(k);
            conjugate_kappas.push((j, k));
        }
        let d = self.d as f64;
        Ok(LowerBounds { conjugate_kappas, b0: -d * sum, b1: -2.0 * d * libm::fabs(sum) })
    }

    pub fn pushforward(&self, p: &QuotientMap) -> Result<Self> {
        let entries = self.entries.iter().map(|a| a.pushforward(p)).collect::<Result<_>>()?;
        Ok(RingMatrix { group: p.target().clone(), d: self.d, entries })
    }

    pub fn map_support(
        &self,
        target: &Group,
        mut f: impl FnMut(&GroupElement) -> Result<GroupElement>,
    ) -> Result<Self> {
        let entries = self.entries.iter().map(|a| a.map_support(target, &mut f)).collect::<Result<_>>()?;
        Ok(RingMatrix { group: target.clone(), d: self.d, entries })
    }

    pub fn to_float(&self) -> Self {
        RingMatrix {
            group: self.group.clone(),
            d: self.d,
            entries: self.entries.iter().map(|a| a.to_float()).collect(),
        }
    }

    /// Union of the entry supports, sorted.
    pub fn support(&self) -> Vec<GroupElement> {
        let mut s: Vec<GroupElement> = self.entries.iter().flat_map(|a| a.support().cloned()).collect();
        s.sort();
        s.dedup();
        s
    }

    pub fn support_radius(&self) -> Result<u64> {
        self.entries.iter().try_fold(0, |r, a| Ok(r.max(a.support_radius()?)))
    }
}

/// The class `{h⁻¹ : h ∈ cls}` of `g⁻¹`.
pub fn inverse_class(group: &Group, cls: &ConjugacyClassInfo) -> Result<ConjugacyClassInfo> {
    use crate::group::ClassStatus;
    let representative = group.inv(&cls.representative)?;
    let status = match &cls.status {
        ClassStatus::Finite { members, conjugators } => {
            let mut pairs: Vec<(GroupElement, GroupElement)> = members
                .iter()
                .zip(conjugators)
                .map(|(m, h)| Ok((group.inv(m)?, h.clone())))
                .collect::<Result<_>>()?;
            pairs.sort();
            let (members, conjugators) = pairs.into_iter().unzip();
            ClassStatus::Finite { members, conjugators }
        }
        other => other.clone(),
    };
    Ok(ConjugacyClassInfo { representative, status })
}
