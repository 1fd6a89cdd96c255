//! Finitely described groups: finite multiplication tables, free abelian
//! groups, free groups and direct products of these.
//!
//! Elements carry canonical normal forms, so structural equality of
//! [`GroupElement`] values is equality in the group. Word metrics are taken
//! with respect to the ordered generator list `S ∪ S⁻¹` of each descriptor.

use alloc::collections::{BTreeMap, VecDeque};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};

/// Canonical normal form of a group element.
///
/// * `Table(i)`: index into a finite multiplication table,
/// * `Abelian(v)`: exponent vector in ℤʳ,
/// * `Free(w)`: freely reduced word, letter `±(j + 1)` for generator `j`,
/// * `Product(xs)`: one component per direct factor.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum GroupElement {
    Table(u32),
    Abelian(Vec<i64>),
    Free(Vec<i32>),
    Product(Vec<GroupElement>),
}

/// A word in the generators: `(generator index, exponent)` pairs read left
/// to right.
pub type Word = Vec<(usize, i64)>;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExplicitTable {
    order: u32,
    table: Vec<u32>,
    identity: u32,
    inverses: Vec<u32>,
    abelian: bool,
    distance: Vec<u32>,
    // x = parent · letter, letter = (generator index, inverted?)
    parent: Vec<(u32, u32, bool)>,
}

/// A finite group given by its multiplication table. Cyclic groups keep the
/// table implicit (`i · j = i + j mod n`) so large quotients stay cheap.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum FiniteTable {
    Cyclic { order: u32 },
    Explicit(ExplicitTable),
}

impl FiniteTable {
    pub fn order(&self) -> u32 {
        match self {
            FiniteTable::Cyclic { order } => *order,
            FiniteTable::Explicit(t) => t.order,
        }
    }

    fn identity(&self) -> u32 {
        match self {
            FiniteTable::Cyclic { .. } => 0,
            FiniteTable::Explicit(t) => t.identity,
        }
    }

    fn mul(&self, a: u32, b: u32) -> u32 {
        match self {
            FiniteTable::Cyclic { order } => ((a as u64 + b as u64) % *order as u64) as u32,
            FiniteTable::Explicit(t) => t.table[(a * t.order + b) as usize],
        }
    }

    fn inv(&self, a: u32) -> u32 {
        match self {
            FiniteTable::Cyclic { order } => (order - a) % order,
            FiniteTable::Explicit(t) => t.inverses[a as usize],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum GroupKind {
    FiniteTable(FiniteTable),
    FreeAbelian { rank: usize },
    FreeGroup { rank: usize },
    DirectProduct(Vec<Group>),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Generator {
    pub name: String,
    pub element: GroupElement,
}

#[derive(Debug, PartialEq, Eq)]
struct Inner {
    kind: GroupKind,
    generators: Vec<Generator>,
}

/// Shared, immutable group descriptor.
#[derive(Clone)]
pub struct Group(Arc<Inner>);

impl PartialEq for Group {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0) || *self.0 == *other.0
    }
}

impl Eq for Group {}

impl fmt::Debug for Group {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Group({})", self.describe())
    }
}

fn valid_name(name: &str) -> bool {
    let mut chars = name.chars();
    match chars.next() {
        Some(c) if c.is_alphabetic() => {}
        _ => return false,
    }
    name != "e" && chars.all(|c| c.is_alphanumeric() || c == '_')
}

impl Group {
    fn from_parts(kind: GroupKind, generators: Vec<Generator>) -> Result<Self> {
        if generators.is_empty() {
            return Err(Error::NoGenerators);
        }
        for (i, g) in generators.iter().enumerate() {
            if !valid_name(&g.name) {
                return Err(Error::Parse {
                    input: g.name.clone(),
                    offset: 0,
                    reason: "generator names start with a letter, use [A-Za-z0-9_] and are not `e`"
                        .to_string(),
                });
            }
            if generators[..i].iter().any(|h| h.name == g.name) {
                return Err(Error::DuplicateGenerator(g.name.clone()));
            }
        }
        Ok(Group(Arc::new(Inner { kind, generators })))
    }

    /// ℤ/n with a single generator named `name` (element 1).
    pub fn cyclic(order: u32, name: &str) -> Result<Self> {
        if order == 0 {
            return Err(Error::InvalidTable("cyclic group of order 0".to_string()));
        }
        Self::from_parts(
            GroupKind::FiniteTable(FiniteTable::Cyclic { order }),
            vec![Generator {
                name: name.to_string(),
                element: GroupElement::Table(1 % order),
            }],
        )
    }

    /// The trivial group, presented as ℤ/1.
    pub fn trivial() -> Self {
        Self::cyclic(1, "triv").expect("ℤ/1 is valid")
    }

    /// A finite group from an explicit multiplication table `rows[a][b] = a·b`
    /// and named generator elements. The table is checked exhaustively for
    /// closure, associativity, identity and inverses, and the generators must
    /// generate the whole group.
    pub fn finite_table(rows: Vec<Vec<u32>>, generators: Vec<(String, u32)>) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::InvalidTable("empty table".to_string()));
        }
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidTable("table is not square".to_string()));
        }
        if rows.iter().flatten().any(|&x| x as usize >= n) {
            return Err(Error::InvalidTable("table is not closed".to_string()));
        }
        let table: Vec<u32> = rows.iter().flatten().copied().collect();
        let at = |a: usize, b: usize| table[a * n + b] as usize;
        let identity = (0..n)
            .find(|&e| (0..n).all(|x| at(e, x) == x && at(x, e) == x))
            .ok_or_else(|| Error::InvalidTable("no identity element".to_string()))?;
        let mut inverses = vec![0u32; n];
        for x in 0..n {
            let y = (0..n)
                .find(|&y| at(x, y) == identity && at(y, x) == identity)
                .ok_or_else(|| Error::InvalidTable(format!("element {x} has no inverse")))?;
            inverses[x] = y as u32;
        }
        for a in 0..n {
            for b in 0..n {
                let ab = at(a, b);
                for c in 0..n {
                    if at(ab, c) != at(a, at(b, c)) {
                        return Err(Error::InvalidTable(format!(
                            "associativity fails at ({a}, {b}, {c})"
                        )));
                    }
                }
            }
        }
        let abelian = (0..n).all(|a| (0..n).all(|b| at(a, b) == at(b, a)));
        if generators.iter().any(|(_, g)| *g as usize >= n) {
            return Err(Error::InvalidTable("generator index out of range".to_string()));
        }
        // breadth-first search over S ∪ S⁻¹
        let mut distance = vec![u32::MAX; n];
        let mut parent = vec![(identity as u32, 0u32, false); n];
        distance[identity] = 0;
        let mut queue = VecDeque::from([identity]);
        while let Some(p) = queue.pop_front() {
            for (gi, (_, g)) in generators.iter().enumerate() {
                for inverted in [false, true] {
                    let letter = if inverted { inverses[*g as usize] as usize } else { *g as usize };
                    let y = at(p, letter);
                    if distance[y] == u32::MAX {
                        distance[y] = distance[p] + 1;
                        parent[y] = (p as u32, gi as u32, inverted);
                        queue.push_back(y);
                    }
                }
            }
        }
        if distance.iter().any(|&d| d == u32::MAX) {
            return Err(Error::InvalidTable("generators do not generate the group".to_string()));
        }
        let gens = generators
            .into_iter()
            .map(|(name, g)| Generator { name, element: GroupElement::Table(g) })
            .collect();
        Self::from_parts(
            GroupKind::FiniteTable(FiniteTable::Explicit(ExplicitTable {
                order: n as u32,
                table,
                identity: identity as u32,
                inverses,
                abelian,
                distance,
                parent,
            })),
            gens,
        )
    }

    /// ℤʳ with standard basis generators named by `names`.
    pub fn free_abelian(names: &[&str]) -> Result<Self> {
        let rank = names.len();
        let gens = names
            .iter()
            .enumerate()
            .map(|(i, n)| {
                let mut v = vec![0i64; rank];
                v[i] = 1;
                Generator { name: n.to_string(), element: GroupElement::Abelian(v) }
            })
            .collect();
        Self::from_parts(GroupKind::FreeAbelian { rank }, gens)
    }

    /// The free group on `names`.
    pub fn free(names: &[&str]) -> Result<Self> {
        let gens = names
            .iter()
            .enumerate()
            .map(|(i, n)| Generator {
                name: n.to_string(),
                element: GroupElement::Free(vec![i as i32 + 1]),
            })
            .collect();
        Self::from_parts(GroupKind::FreeGroup { rank: names.len() }, gens)
    }

    /// Direct product; the generator list is the concatenation of the factor
    /// generators, each embedded with identity components elsewhere.
    pub fn direct_product(factors: Vec<Group>) -> Result<Self> {
        if factors.is_empty() {
            return Err(Error::NoGenerators);
        }
        let ids: Vec<GroupElement> = factors.iter().map(|f| f.identity()).collect();
        let mut gens = Vec::new();
        for (i, f) in factors.iter().enumerate() {
            for g in f.generators() {
                let mut comps = ids.clone();
                comps[i] = g.element.clone();
                gens.push(Generator { name: g.name.clone(), element: GroupElement::Product(comps) });
            }
        }
        Self::from_parts(GroupKind::DirectProduct(factors), gens)
    }

    pub fn kind(&self) -> &GroupKind {
        &self.0.kind
    }

    pub fn generators(&self) -> &[Generator] {
        &self.0.generators
    }

    pub fn generator_index(&self, name: &str) -> Option<usize> {
        self.0.generators.iter().position(|g| g.name == name)
    }

    pub fn generator(&self, name: &str) -> Result<GroupElement> {
        self.generator_index(name)
            .map(|i| self.0.generators[i].element.clone())
            .ok_or_else(|| Error::UnknownGenerator(name.to_string()))
    }

    /// Short human-readable description, e.g. `Z/2 x Z^1`.
    pub fn describe(&self) -> String {
        match self.kind() {
            GroupKind::FiniteTable(FiniteTable::Cyclic { order }) => format!("Z/{order}"),
            GroupKind::FiniteTable(FiniteTable::Explicit(t)) => format!("Table[{}]", t.order),
            GroupKind::FreeAbelian { rank } => format!("Z^{rank}"),
            GroupKind::FreeGroup { rank } => format!("F{rank}"),
            GroupKind::DirectProduct(fs) => {
                let parts: Vec<String> = fs.iter().map(|f| f.describe()).collect();
                parts.join(" x ")
            }
        }
    }

    pub fn identity(&self) -> GroupElement {
        match self.kind() {
            GroupKind::FiniteTable(t) => GroupElement::Table(t.identity()),
            GroupKind::FreeAbelian { rank } => GroupElement::Abelian(vec![0; *rank]),
            GroupKind::FreeGroup { .. } => GroupElement::Free(Vec::new()),
            GroupKind::DirectProduct(fs) => {
                GroupElement::Product(fs.iter().map(|f| f.identity()).collect())
            }
        }
    }

    pub fn is_identity(&self, x: &GroupElement) -> bool {
        *x == self.identity()
    }

    /// Whether `x` is a well-formed normal form for this descriptor.
    pub fn contains(&self, x: &GroupElement) -> bool {
        match (self.kind(), x) {
            (GroupKind::FiniteTable(t), GroupElement::Table(i)) => *i < t.order(),
            (GroupKind::FreeAbelian { rank }, GroupElement::Abelian(v)) => v.len() == *rank,
            (GroupKind::FreeGroup { rank }, GroupElement::Free(w)) => {
                w.iter().all(|&l| l != 0 && l.unsigned_abs() as usize <= *rank)
                    && w.windows(2).all(|p| p[0] != -p[1])
            }
            (GroupKind::DirectProduct(fs), GroupElement::Product(xs)) => {
                fs.len() == xs.len() && fs.iter().zip(xs).all(|(f, x)| f.contains(x))
            }
            _ => false,
        }
    }

    pub fn check(&self, x: &GroupElement) -> Result<()> {
        if self.contains(x) {
            Ok(())
        } else {
            Err(Error::ElementNotInGroup(format!("{x:?}")))
        }
    }

    pub fn mul(&self, x: &GroupElement, y: &GroupElement) -> Result<GroupElement> {
        match (self.kind(), x, y) {
            (GroupKind::FiniteTable(t), GroupElement::Table(a), GroupElement::Table(b))
                if *a < t.order() && *b < t.order() =>
            {
                Ok(GroupElement::Table(t.mul(*a, *b)))
            }
            (GroupKind::FreeAbelian { rank }, GroupElement::Abelian(a), GroupElement::Abelian(b))
                if a.len() == *rank && b.len() == *rank =>
            {
                Ok(GroupElement::Abelian(a.iter().zip(b).map(|(p, q)| p + q).collect()))
            }
            (GroupKind::FreeGroup { .. }, GroupElement::Free(a), GroupElement::Free(b)) => {
                let mut w = a.clone();
                for &l in b {
                    if w.last() == Some(&-l) {
                        w.pop();
                    } else {
                        w.push(l);
                    }
                }
                Ok(GroupElement::Free(w))
            }
            (GroupKind::DirectProduct(fs), GroupElement::Product(a), GroupElement::Product(b))
                if a.len() == fs.len() && b.len() == fs.len() =>
            {
                let comps = fs
                    .iter()
                    .zip(a.iter().zip(b))
                    .map(|(f, (p, q))| f.mul(p, q))
                    .collect::<Result<Vec<_>>>()?;
                Ok(GroupElement::Product(comps))
            }
            _ => Err(Error::DescriptorMismatch),
        }
    }

    pub fn inv(&self, x: &GroupElement) -> Result<GroupElement> {
        match (self.kind(), x) {
            (GroupKind::FiniteTable(t), GroupElement::Table(a)) if *a < t.order() => {
                Ok(GroupElement::Table(t.inv(*a)))
            }
            (GroupKind::FreeAbelian { rank }, GroupElement::Abelian(a)) if a.len() == *rank => {
                Ok(GroupElement::Abelian(a.iter().map(|p| -p).collect()))
            }
            (GroupKind::FreeGroup { .. }, GroupElement::Free(a)) => {
                Ok(GroupElement::Free(a.iter().rev().map(|l| -l).collect()))
            }
            (GroupKind::DirectProduct(fs), GroupElement::Product(a)) if a.len() == fs.len() => {
                let comps =
                    fs.iter().zip(a).map(|(f, p)| f.inv(p)).collect::<Result<Vec<_>>>()?;
                Ok(GroupElement::Product(comps))
            }
            _ => Err(Error::DescriptorMismatch),
        }
    }

    /// `x^k` by repeated squaring; negative `k` inverts first.
    pub fn pow(&self, x: &GroupElement, k: i64) -> Result<GroupElement> {
        let mut base = if k < 0 { self.inv(x)? } else { x.clone() };
        let mut e = k.unsigned_abs();
        let mut acc = self.identity();
        while e > 0 {
            if e & 1 == 1 {
                acc = self.mul(&acc, &base)?;
            }
            e >>= 1;
            if e > 0 {
                base = self.mul(&base, &base)?;
            }
        }
        Ok(acc)
    }

    /// `h g h⁻¹`.
    pub fn conjugate(&self, g: &GroupElement, h: &GroupElement) -> Result<GroupElement> {
        let hg = self.mul(h, g)?;
        self.mul(&hg, &self.inv(h)?)
    }

    pub fn is_finite(&self) -> bool {
        match self.kind() {
            GroupKind::FiniteTable(_) => true,
            GroupKind::FreeAbelian { rank } => *rank == 0,
            GroupKind::FreeGroup { rank } => *rank == 0,
            GroupKind::DirectProduct(fs) => fs.iter().all(|f| f.is_finite()),
        }
    }

    pub fn is_abelian(&self) -> bool {
        match self.kind() {
            GroupKind::FiniteTable(FiniteTable::Cyclic { .. }) => true,
            GroupKind::FiniteTable(FiniteTable::Explicit(t)) => t.abelian,
            GroupKind::FreeAbelian { .. } => true,
            GroupKind::FreeGroup { rank } => *rank <= 1,
            GroupKind::DirectProduct(fs) => fs.iter().all(|f| f.is_abelian()),
        }
    }

    /// Order of a finite group, `None` if infinite.
    pub fn order(&self) -> Option<usize> {
        match self.kind() {
            GroupKind::FiniteTable(t) => Some(t.order() as usize),
            GroupKind::DirectProduct(fs) => {
                fs.iter().try_fold(1usize, |acc, f| f.order().map(|o| acc * o))
            }
            _ if self.is_finite() => Some(1),
            _ => None,
        }
    }

    /// Enumerates a finite group: table indices in order, products in
    /// mixed-radix order with the first factor most significant.
    pub fn elements(&self) -> Result<Vec<GroupElement>> {
        let n = self.order().ok_or(Error::NotFinite)?;
        (0..n).map(|i| self.element_at(i)).collect()
    }

    /// Inverse of [`Group::index_of`].
    pub fn element_at(&self, mut i: usize) -> Result<GroupElement> {
        match self.kind() {
            GroupKind::FiniteTable(t) if i < t.order() as usize => Ok(GroupElement::Table(i as u32)),
            GroupKind::DirectProduct(fs) => {
                let orders = fs.iter().map(|f| f.order().ok_or(Error::NotFinite)).collect::<Result<Vec<_>>>()?;
                let mut comps = vec![GroupElement::Table(0); fs.len()];
                for k in (0..fs.len()).rev() {
                    comps[k] = fs[k].element_at(i % orders[k])?;
                    i /= orders[k];
                }
                if i != 0 {
                    return Err(Error::OutOfRange(format!("element index in {}", self.describe())));
                }
                Ok(GroupElement::Product(comps))
            }
            GroupKind::FreeAbelian { rank: 0 } if i == 0 => Ok(GroupElement::Abelian(Vec::new())),
            GroupKind::FreeGroup { rank: 0 } if i == 0 => Ok(GroupElement::Free(Vec::new())),
            _ if !self.is_finite() => Err(Error::NotFinite),
            _ => Err(Error::OutOfRange(format!("element index in {}", self.describe()))),
        }
    }

    /// Position of `x` in [`Group::elements`].
    pub fn index_of(&self, x: &GroupElement) -> Result<usize> {
        match (self.kind(), x) {
            (GroupKind::FiniteTable(t), GroupElement::Table(a)) if *a < t.order() => Ok(*a as usize),
            (GroupKind::DirectProduct(fs), GroupElement::Product(xs)) if xs.len() == fs.len() => {
                let mut idx = 0usize;
                for (f, c) in fs.iter().zip(xs) {
                    let o = f.order().ok_or(Error::NotFinite)?;
                    idx = idx * o + f.index_of(c)?;
                }
                Ok(idx)
            }
            (GroupKind::FreeAbelian { rank: 0 }, GroupElement::Abelian(_))
            | (GroupKind::FreeGroup { rank: 0 }, GroupElement::Free(_)) => Ok(0),
            _ if !self.is_finite() => Err(Error::NotFinite),
            _ => Err(Error::DescriptorMismatch),
        }
    }

    /// A word in the generators representing `x` (shortest for every kind).
    pub fn word_of(&self, x: &GroupElement) -> Result<Word> {
        self.check(x)?;
        let mut word: Word = Vec::new();
        let push = |w: &mut Word, g: usize, e: i64| {
            if e == 0 {
                return;
            }
            match w.last_mut() {
                Some((h, f)) if *h == g => {
                    *f += e;
                    if *f == 0 {
                        w.pop();
                    }
                }
                _ => w.push((g, e)),
            }
        };
        match (self.kind(), x) {
            (GroupKind::FiniteTable(FiniteTable::Cyclic { order }), GroupElement::Table(a)) => {
                let a = *a as i64;
                let n = *order as i64;
                let k = if 2 * a <= n { a } else { a - n };
                push(&mut word, 0, k);
            }
            (GroupKind::FiniteTable(FiniteTable::Explicit(t)), GroupElement::Table(a)) => {
                let mut letters = Vec::new();
                let mut cur = *a;
                while cur != t.identity {
                    let (p, g, inverted) = t.parent[cur as usize];
                    letters.push((g as usize, if inverted { -1 } else { 1 }));
                    cur = p;
                }
                for (g, e) in letters.into_iter().rev() {
                    push(&mut word, g, e);
                }
            }
            (GroupKind::FreeAbelian { .. }, GroupElement::Abelian(v)) => {
                for (i, &e) in v.iter().enumerate() {
                    push(&mut word, i, e);
                }
            }
            (GroupKind::FreeGroup { .. }, GroupElement::Free(w)) => {
                for &l in w {
                    push(&mut word, l.unsigned_abs() as usize - 1, l.signum() as i64);
                }
            }
            (GroupKind::DirectProduct(fs), GroupElement::Product(xs)) => {
                let mut offset = 0;
                for (f, c) in fs.iter().zip(xs) {
                    for (g, e) in f.word_of(c)? {
                        push(&mut word, offset + g, e);
                    }
                    offset += f.generators().len();
                }
            }
            _ => return Err(Error::DescriptorMismatch),
        }
        Ok(word)
    }

    /// Evaluates a word in the generators.
    pub fn eval_word(&self, word: &[(usize, i64)]) -> Result<GroupElement> {
        let mut acc = self.identity();
        for &(g, e) in word {
            let gen = self
                .0
                .generators
                .get(g)
                .ok_or_else(|| Error::UnknownGenerator(format!("#{g}")))?;
            acc = self.mul(&acc, &self.pow(&gen.element, e)?)?;
        }
        Ok(acc)
    }

    /// Distance from the identity in the word metric over `S ∪ S⁻¹`.
    pub fn word_length(&self, x: &GroupElement) -> Result<u64> {
        match (self.kind(), x) {
            (GroupKind::FiniteTable(FiniteTable::Cyclic { order }), GroupElement::Table(a))
                if a < order =>
            {
                Ok((*a).min(order - a) as u64)
            }
            (GroupKind::FiniteTable(FiniteTable::Explicit(t)), GroupElement::Table(a))
                if *a < t.order =>
            {
                Ok(t.distance[*a as usize] as u64)
            }
            (GroupKind::FreeAbelian { rank }, GroupElement::Abelian(v)) if v.len() == *rank => {
                Ok(v.iter().map(|e| e.unsigned_abs()).sum())
            }
            (GroupKind::FreeGroup { .. }, GroupElement::Free(w)) if self.contains(x) => {
                Ok(w.len() as u64)
            }
            (GroupKind::DirectProduct(fs), GroupElement::Product(xs)) if xs.len() == fs.len() => {
                fs.iter().zip(xs).map(|(f, c)| f.word_length(c)).sum()
            }
            _ => Err(Error::DescriptorMismatch),
        }
    }

    /// Left-invariant word metric `d(x, y) = |x⁻¹y|`.
    pub fn word_distance(&self, x: &GroupElement, y: &GroupElement) -> Result<u64> {
        let d = self.mul(&self.inv(x)?, y)?;
        self.word_length(&d)
    }

    /// Conjugacy class of `g`. `budget` caps the number of group elements the
    /// enumeration may visit; past it the class is reported as undecided.
    pub fn conjugacy_class(&self, g: &GroupElement, budget: usize) -> Result<ConjugacyClassInfo> {
        self.check(g)?;
        let single = |g: &GroupElement| ConjugacyClassInfo {
            representative: g.clone(),
            status: ClassStatus::Finite {
                members: vec![g.clone()],
                conjugators: vec![self.identity()],
            },
        };
        if self.is_identity(g) {
            return Ok(single(g));
        }
        match self.kind() {
            GroupKind::FreeAbelian { .. } => Ok(single(g)),
            GroupKind::FreeGroup { rank } if *rank <= 1 => Ok(single(g)),
            // nontrivial elements of a free group of rank ≥ 2 have infinite classes
            GroupKind::FreeGroup { .. } => Ok(ConjugacyClassInfo {
                representative: g.clone(),
                status: ClassStatus::Infinite,
            }),
            GroupKind::FiniteTable(FiniteTable::Cyclic { .. }) => Ok(single(g)),
            GroupKind::FiniteTable(FiniteTable::Explicit(t)) => {
                if t.abelian {
                    return Ok(single(g));
                }
                if t.order as usize > budget {
                    return Ok(ConjugacyClassInfo {
                        representative: g.clone(),
                        status: ClassStatus::Undecided,
                    });
                }
                let mut found: BTreeMap<GroupElement, GroupElement> = BTreeMap::new();
                for h in 0..t.order {
                    let h = GroupElement::Table(h);
                    let c = self.conjugate(g, &h)?;
                    found.entry(c).or_insert(h);
                }
                let (members, conjugators) = found.into_iter().unzip();
                Ok(ConjugacyClassInfo {
                    representative: g.clone(),
                    status: ClassStatus::Finite { members, conjugators },
                })
            }
            GroupKind::DirectProduct(fs) => {
                let GroupElement::Product(xs) = g else {
                    return Err(Error::DescriptorMismatch);
                };
                let mut parts = Vec::with_capacity(fs.len());
                let mut undecided = false;
                for (f, x) in fs.iter().zip(xs) {
                    let c = f.conjugacy_class(x, budget)?;
                    match c.status {
                        ClassStatus::Infinite => {
                            return Ok(ConjugacyClassInfo {
                                representative: g.clone(),
                                status: ClassStatus::Infinite,
                            })
                        }
                        ClassStatus::Undecided => undecided = true,
                        ClassStatus::Finite { members, conjugators } => {
                            parts.push((members, conjugators))
                        }
                    }
                }
                let size = parts.iter().try_fold(1usize, |acc, (m, _)| acc.checked_mul(m.len()));
                if undecided || size.map_or(true, |s| s > budget) {
                    return Ok(ConjugacyClassInfo {
                        representative: g.clone(),
                        status: ClassStatus::Undecided,
                    });
                }
                let mut members = vec![Vec::new()];
                let mut conjugators = vec![Vec::new()];
                for (ms, cs) in parts {
                    let mut nm = Vec::new();
                    let mut nc = Vec::new();
                    for (pm, pc) in members.iter().zip(&conjugators) {
                        for (m, c) in ms.iter().zip(&cs) {
                            let mut a: Vec<GroupElement> = pm.clone();
                            a.push(m.clone());
                            let mut b: Vec<GroupElement> = pc.clone();
                            b.push(c.clone());
                            nm.push(a);
                            nc.push(b);
                        }
                    }
                    members = nm;
                    conjugators = nc;
                }
                let mut pairs: Vec<(GroupElement, GroupElement)> = members
                    .into_iter()
                    .map(GroupElement::Product)
                    .zip(conjugators.into_iter().map(GroupElement::Product))
                    .collect();
                pairs.sort();
                let (members, conjugators) = pairs.into_iter().unzip();
                Ok(ConjugacyClassInfo {
                    representative: g.clone(),
                    status: ClassStatus::Finite { members, conjugators },
                })
            }
        }
    }

    /// Parses a word such as `t u^-1`, `ab`, `a*b^2` or `e`. Generator names
    /// are matched greedily (longest first); whitespace, `*` and `·` separate
    /// factors; `^k`, `^-k` and `⁻¹` are exponents.
    pub fn parse_word(&self, input: &str) -> Result<GroupElement> {
        let err = |offset: usize, reason: &str| Error::Parse {
            input: input.to_string(),
            offset,
            reason: reason.to_string(),
        };
        let mut names: Vec<(usize, &str)> = self
            .generators()
            .iter()
            .enumerate()
            .map(|(i, g)| (i, g.name.as_str()))
            .collect();
        names.sort_by(|a, b| b.1.len().cmp(&a.1.len()));
        let mut acc = self.identity();
        let mut pos = 0;
        let bytes = input.as_bytes();
        while pos < input.len() {
            let rest = &input[pos..];
            let c = rest.chars().next().unwrap();
            if c.is_whitespace() || c == '*' || c == '·' {
                pos += c.len_utf8();
                continue;
            }
            let matched = names.iter().find(|(_, n)| rest.starts_with(n));
            let (element, len) = match matched {
                Some((i, n)) => (self.0.generators[*i].element.clone(), n.len()),
                None if c == 'e' || c == '1' => (self.identity(), 1),
                None => return Err(err(pos, "expected a generator name")),
            };
            pos += len;
            let mut exponent: i64 = 1;
            if input[pos..].starts_with("⁻¹") {
                exponent = -1;
                pos += "⁻¹".len();
            } else if bytes.get(pos) == Some(&b'^') {
                pos += 1;
                let start = pos;
                if matches!(bytes.get(pos), Some(b'-') | Some(b'+')) {
                    pos += 1;
                }
                while bytes.get(pos).map_or(false, |b| b.is_ascii_digit()) {
                    pos += 1;
                }
                exponent = input[start..pos].parse().map_err(|_| err(start, "bad exponent"))?;
            }
            acc = self.mul(&acc, &self.pow(&element, exponent)?)?;
        }
        Ok(acc)
    }

    /// Renders `x` as a word, `e` for the identity.
    pub fn format_element(&self, x: &GroupElement) -> String {
        let Ok(word) = self.word_of(x) else {
            return format!("{x:?}");
        };
        if word.is_empty() {
            return "e".to_string();
        }
        let parts: Vec<String> = word
            .iter()
            .map(|&(g, e)| {
                let name = &self.0.generators[g].name;
                if e == 1 {
                    name.clone()
                } else {
                    format!("{name}^{e}")
                }
            })
            .collect();
        parts.join(" ")
    }
}

/// Finiteness status of a conjugacy class.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ClassStatus {
    /// Sorted members together with a conjugator `h` for each, `m = h·g·h⁻¹`.
    Finite {
        members: Vec<GroupElement>,
        conjugators: Vec<GroupElement>,
    },
    Infinite,
    Undecided,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConjugacyClassInfo {
    pub representative: GroupElement,
    pub status: ClassStatus,
}

impl ConjugacyClassInfo {
    pub fn is_finite(&self) -> bool {
        matches!(self.status, ClassStatus::Finite { .. })
    }

    pub fn members(&self) -> Option<&[GroupElement]> {
        match &self.status {
            ClassStatus::Finite { members, .. } => Some(members),
            _ => None,
        }
    }

    pub fn size(&self) -> Option<usize> {
        self.members().map(|m| m.len())
    }

    /// Members of a finite class, or the matching error.
    pub fn finite_members(&self) -> Result<&[GroupElement]> {
        match &self.status {
            ClassStatus::Finite { members, .. } => Ok(members),
            ClassStatus::Infinite => Err(Error::InfiniteClass(format!("{:?}", self.representative))),
            ClassStatus::Undecided => {
                Err(Error::UndecidedClass(format!("{:?}", self.representative)))
            }
        }
    }

    /// Re-checks every stored conjugator witness.
    pub fn verify(&self, group: &Group) -> bool {
        match &self.status {
            ClassStatus::Finite { members, conjugators } => members
                .iter()
                .zip(conjugators)
                .all(|(m, h)| group.conjugate(&self.representative, h).ok().as_ref() == Some(m)),
            _ => true,
        }
    }

    pub fn contains(&self, x: &GroupElement) -> bool {
        self.members().map_or(false, |m| m.binary_search(x).is_ok())
    }
}

/// A homomorphism from a finitely described group into a finite group,
/// given by the images of the source generators.
#[derive(Clone, Debug, PartialEq)]
pub struct QuotientMap {
    source: Group,
    target: Group,
    images: Vec<GroupElement>,
}

impl QuotientMap {
    pub fn new(source: Group, target: Group, images: Vec<GroupElement>) -> Result<Self> {
        if !target.is_finite() {
            return Err(Error::NotFinite);
        }
        if images.len() != source.generators().len() {
            return Err(Error::NotHomomorphism(format!(
                "{} generator images for {} generators",
                images.len(),
                source.generators().len()
            )));
        }
        for x in &images {
            target.check(x)?;
        }
        check_relations(&source, &images, &target)?;
        Ok(QuotientMap { source, target, images })
    }

    /// Builds the map from `(source generator name, target word)` pairs.
    pub fn from_words(source: Group, target: Group, assignments: &[(&str, &str)]) -> Result<Self> {
        let mut images = vec![None; source.generators().len()];
        for (name, word) in assignments {
            let i = source
                .generator_index(name)
                .ok_or_else(|| Error::UnknownGenerator(name.to_string()))?;
            images[i] = Some(target.parse_word(word)?);
        }
        let images = images
            .into_iter()
            .enumerate()
            .map(|(i, x)| {
                x.ok_or_else(|| {
                    Error::NotHomomorphism(format!(
                        "no image for generator `{}`",
                        source.generators()[i].name
                    ))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(source, target, images)
    }

    pub fn source(&self) -> &Group {
        &self.source
    }

    pub fn target(&self) -> &Group {
        &self.target
    }

    pub fn images(&self) -> &[GroupElement] {
        &self.images
    }

    pub fn apply(&self, x: &GroupElement) -> Result<GroupElement> {
        let word = self.source.word_of(x)?;
        let mut acc = self.target.identity();
        for (g, e) in word {
            acc = self.target.mul(&acc, &self.target.pow(&self.images[g], e)?)?;
        }
        Ok(acc)
    }
}

fn check_relations(source: &Group, images: &[GroupElement], target: &Group) -> Result<()> {
    let commute = |a: &GroupElement, b: &GroupElement| -> Result<bool> {
        Ok(target.mul(a, b)? == target.mul(b, a)?)
    };
    match source.kind() {
        GroupKind::FreeGroup { .. } => Ok(()),
        GroupKind::FreeAbelian { .. } => {
            for i in 0..images.len() {
                for j in i + 1..images.len() {
                    if !commute(&images[i], &images[j])? {
                        return Err(Error::NotHomomorphism(format!(
                            "images of generators {i} and {j} do not commute"
                        )));
                    }
                }
            }
            Ok(())
        }
        GroupKind::FiniteTable(FiniteTable::Cyclic { order }) => {
            if target.is_identity(&target.pow(&images[0], *order as i64)?) {
                Ok(())
            } else {
                Err(Error::NotHomomorphism(format!("image order does not divide {order}")))
            }
        }
        GroupKind::FiniteTable(FiniteTable::Explicit(t)) => {
            let image = |x: u32| -> Result<GroupElement> {
                let mut acc = target.identity();
                for (g, e) in source.word_of(&GroupElement::Table(x))? {
                    acc = target.mul(&acc, &target.pow(&images[g], e)?)?;
                }
                Ok(acc)
            };
            let all: Vec<GroupElement> = (0..t.order).map(image).collect::<Result<_>>()?;
            for a in 0..t.order {
                for b in 0..t.order {
                    let ab = t.table[(a * t.order + b) as usize] as usize;
                    if target.mul(&all[a as usize], &all[b as usize])? != all[ab] {
                        return Err(Error::NotHomomorphism(format!(
                            "table relation {a}·{b} = {ab} is not preserved"
                        )));
                    }
                }
            }
            Ok(())
        }
        GroupKind::DirectProduct(fs) => {
            let mut offset = 0;
            let mut ranges = Vec::new();
            for f in fs {
                let n = f.generators().len();
                check_relations(f, &images[offset..offset + n], target)?;
                ranges.push(offset..offset + n);
                offset += n;
            }
            for (a, ra) in ranges.iter().enumerate() {
                for rb in &ranges[a + 1..] {
                    for i in ra.clone() {
                        for j in rb.clone() {
                            if !commute(&images[i], &images[j])? {
                                return Err(Error::NotHomomorphism(format!(
                                    "images of generators {i} and {j} lie in different factors but do not commute"
                                )));
                            }
                        }
                    }
                }
            }
            Ok(())
        }
    }
}
