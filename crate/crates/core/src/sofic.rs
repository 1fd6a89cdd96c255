//! Edge-labeled graphs that look like a Cayley graph around most vertices,
//! kernels transported onto them, and `det*` with an exact integer
//! certificate.
//!
//! An edge `x → y` labeled `s` models `y = s·x`. Around a good vertex `y` the
//! map `ψ_y(g) = g·y` from the word ball `B(r)` is a label-preserving
//! isomorphism onto the `r`-ball of the graph around `y`.

use alloc::collections::{BTreeMap, VecDeque};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use num_bigint::BigInt;
use num_complex::Complex64;
use rand_core::RngCore;

use crate::approximation::reduction_map;
use crate::error::{Error, Result};
use crate::group::{Group, GroupElement, QuotientMap};
use crate::linalg::charpoly::{charpoly_integer, ln_abs, lowest_nonzero};
use crate::linalg::envelope::log_det_definite;
use crate::linalg::{eigvalsh, SparseMatrix};
use crate::ring::RingMatrix;
use crate::spectral::zero_threshold;

/// A finite directed graph with edges labeled by generator names.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabeledGraph {
    n: usize,
    labels: Vec<String>,
    out: Vec<Vec<Vec<usize>>>,
    inn: Vec<Vec<Vec<usize>>>,
}

impl LabeledGraph {
    pub fn new(n: usize, labels: Vec<String>) -> Self {
        let l = labels.len();
        LabeledGraph { n, labels, out: vec![vec![Vec::new(); l]; n], inn: vec![vec![Vec::new(); l]; n] }
    }

    pub fn add_edge(&mut self, from: usize, to: usize, label: usize) -> Result<()> {
        if from >= self.n || to >= self.n || label >= self.labels.len() {
            return Err(Error::OutOfRange(format!("edge {from} → {to} with label {label}")));
        }
        self.out[from][label].push(to);
        self.inn[to][label].push(from);
        Ok(())
    }

    pub fn remove_edge(&mut self, from: usize, to: usize, label: usize) -> bool {
        let Some(p) = self.out.get(from).and_then(|o| o.get(label)).and_then(|t| t.iter().position(|&v| v == to))
        else {
            return false;
        };
        self.out[from][label].remove(p);
        let q = self.inn[to][label].iter().position(|&v| v == from).expect("edge lists agree");
        self.inn[to][label].remove(q);
        true
    }

    pub fn vertex_count(&self) -> usize {
        self.n
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
        self.out.iter().enumerate().flat_map(|(v, per)| {
            per.iter().enumerate().flat_map(move |(l, ts)| ts.iter().map(move |&t| (v, t, l)))
        })
    }

    /// Vertices `G_n`, edges `x → p(s)·x` for each generator `s` of the
    /// source group.
    pub fn from_quotient(q: &QuotientMap) -> Result<Self> {
        let target = q.target();
        let elements = target.elements()?;
        let labels = q.source().generators().iter().map(|g| g.name.clone()).collect();
        let mut graph = LabeledGraph::new(elements.len(), labels);
        for (j, img) in q.images().iter().enumerate() {
            for (xi, x) in elements.iter().enumerate() {
                let y = target.mul(img, x)?;
                graph.add_edge(xi, target.index_of(&y)?, j)?;
            }
        }
        Ok(graph)
    }

    /// Cycle, torus or product graph: the quotient of `G` replacing each
    /// `ℤ` factor by `ℤ/n`.
    pub fn reduction(g: &Group, n: u32) -> Result<Self> {
        Self::from_quotient(&reduction_map(g, n)?)
    }

    /// The Cayley graph of a finite group.
    pub fn cayley(g: &Group) -> Result<Self> {
        let names: Vec<(&str, &str)> = g.generators().iter().map(|s| (s.name.as_str(), s.name.as_str())).collect();
        Self::from_quotient(&QuotientMap::from_words(g.clone(), g.clone(), &names)?)
    }

    /// Redirects `count` randomly chosen edges to random targets.
    pub fn corrupt<R: RngCore>(&self, count: usize, rng: &mut R) -> Self {
        let mut g = self.clone();
        let edges: Vec<(usize, usize, usize)> = self.edges().collect();
        if edges.is_empty() || self.n == 0 {
            return g;
        }
        for _ in 0..count {
            let (f, t, l) = edges[(rng.next_u64() % edges.len() as u64) as usize];
            if g.remove_edge(f, t, l) {
                let to = (rng.next_u64() % self.n as u64) as usize;
                g.add_edge(f, to, l).expect("indices in range");
            }
        }
        g
    }

    /// Text form: `vertices N`, `labels s …`, one `from to label` line per
    /// edge, and an optional `good v …` line.
    pub fn parse(text: &str) -> Result<(Self, Option<Vec<usize>>)> {
        let err = |offset: usize, reason: &str| Error::Parse {
            input: text.lines().nth(offset).unwrap_or("").to_string(),
            offset,
            reason: reason.to_string(),
        };
        let mut n = None;
        let mut labels: Option<Vec<String>> = None;
        let mut edges = Vec::new();
        let mut good = None;
        for (ln, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let mut words = line.split_whitespace();
            let head = words.next().unwrap();
            match head {
                "vertices" => {
                    n = Some(words.next().and_then(|w| w.parse::<usize>().ok()).ok_or_else(|| err(ln, "bad vertex count"))?)
                }
                "labels" => labels = Some(words.map(String::from).collect()),
                "good" => {
                    good = Some(
                        words.map(|w| w.parse::<usize>().map_err(|_| err(ln, "bad vertex"))).collect::<Result<Vec<_>>>()?,
                    )
                }
                _ => {
                    let from = head.parse::<usize>().map_err(|_| err(ln, "bad edge source"))?;
                    let to = words
                        .next()
                        .and_then(|w| w.parse::<usize>().ok())
                        .ok_or_else(|| err(ln, "bad edge target"))?;
                    let label = words.next().ok_or_else(|| err(ln, "missing edge label"))?.to_string();
                    edges.push((ln, from, to, label));
                }
            }
        }
        let n = n.ok_or_else(|| err(0, "missing `vertices` line"))?;
        let labels = labels.ok_or_else(|| err(0, "missing `labels` line"))?;
        let mut g = LabeledGraph::new(n, labels);
        for (ln, from, to, label) in edges {
            let l = g.labels.iter().position(|s| *s == label).ok_or_else(|| err(ln, "unknown label"))?;
            g.add_edge(from, to, l).map_err(|_| err(ln, "vertex out of range"))?;
        }
        if let Some(gd) = &good {
            if gd.iter().any(|&v| v >= n) {
                return Err(err(0, "good vertex out of range"));
            }
        }
        Ok((g, good))
    }

    pub fn to_text(&self, good: Option<&[usize]>) -> String {
        let mut s = format!("vertices {}\nlabels {}\n", self.n, self.labels.join(" "));
        for (f, t, l) in self.edges() {
            s.push_str(&format!("{f} {t} {}\n", self.labels[l]));
        }
        if let Some(g) = good {
            s.push_str("good");
            for v in g {
                s.push_str(&format!(" {v}"));
            }
            s.push('\n');
        }
        s
    }
}

/// The word ball `B(r)` in BFS order.
#[derive(Clone, Debug)]
struct Ball {
    elements: Vec<GroupElement>,
    // (parent index, generator, true if element = s·parent, false if s⁻¹·parent)
    parent: Vec<(usize, usize, bool)>,
    // index of s·g, when inside the ball
    next: Vec<Vec<Option<usize>>>,
    dist: Vec<usize>,
}

fn ball(group: &Group, r: usize) -> Result<Ball> {
    let gens: Vec<GroupElement> = group.generators().iter().map(|g| g.element.clone()).collect();
    let invs: Vec<GroupElement> = gens.iter().map(|g| group.inv(g)).collect::<Result<_>>()?;
    let mut index: BTreeMap<GroupElement, usize> = BTreeMap::new();
    let mut elements = vec![group.identity()];
    let mut parent = vec![(0, 0, true)];
    let mut dist = vec![0usize];
    index.insert(group.identity(), 0);
    let mut queue = VecDeque::from([0usize]);
    while let Some(i) = queue.pop_front() {
        if dist[i] == r {
            continue;
        }
        for (s, (g, gi)) in gens.iter().zip(&invs).enumerate() {
            for (fwd, m) in [(true, g), (false, gi)] {
                let h = group.mul(m, &elements[i])?;
                if !index.contains_key(&h) {
                    index.insert(h.clone(), elements.len());
                    elements.push(h);
                    parent.push((i, s, fwd));
                    dist.push(dist[i] + 1);
                    queue.push_back(elements.len() - 1);
                }
            }
        }
    }
    let next = elements
        .iter()
        .map(|x| gens.iter().map(|g| Ok(index.get(&group.mul(g, x)?).copied())).collect::<Result<Vec<_>>>())
        .collect::<Result<_>>()?;
    Ok(Ball { elements, parent, next, dist })
}

/// A labeled graph with its good set `V⁰` certified at radius `r`.
#[derive(Clone, Debug)]
pub struct CertifiedGraph {
    pub graph: LabeledGraph,
    pub group: Group,
    pub radius: usize,
    pub good: Vec<usize>,
    /// `1 − |V⁰|/|V|`.
    pub delta: f64,
    ball: Ball,
    // ψ_y as ball index → vertex, per good vertex (same order as `good`)
    psi: Vec<Vec<usize>>,
}

impl CertifiedGraph {
    /// `ψ_y(g)` for a good vertex `y`.
    pub fn psi(&self, y: usize, g: &GroupElement) -> Option<usize> {
        let yi = self.good.binary_search(&y).ok()?;
        let gi = self.ball.elements.iter().position(|x| x == g)?;
        Some(self.psi[yi][gi])
    }

    pub fn ball_size(&self) -> usize {
        self.ball.elements.len()
    }
}

/// Checks every vertex (or only the declared ones) for an `r`-ball
/// isomorphism with the Cayley graph of `group`. Declared good vertices that
/// fail are an error.
pub fn certify(graph: &LabeledGraph, group: &Group, r: usize, declared: Option<&[usize]>) -> Result<CertifiedGraph> {
    // graph label ℓ ↦ group generator index
    let mut label_of_gen = vec![usize::MAX; group.generators().len()];
    for (l, name) in graph.labels.iter().enumerate() {
        let s = group.generator_index(name).ok_or_else(|| Error::UnknownGenerator(name.clone()))?;
        label_of_gen[s] = l;
    }
    if let Some(s) = label_of_gen.iter().position(|&l| l == usize::MAX) {
        return Err(Error::UnknownGenerator(format!(
            "graph has no edges labeled `{}`",
            group.generators()[s].name
        )));
    }
    let b = ball(group, r)?;
    let candidates: Vec<usize> = match declared {
        Some(d) => {
            let mut d = d.to_vec();
            d.sort_unstable();
            d.dedup();
            d
        }
        None => (0..graph.n).collect(),
    };
    // stamp[v] = (y + 1, ball index) when v = ψ_y(g)
    let mut stamp = vec![(0usize, 0usize); graph.n];
    let mut good = Vec::new();
    let mut psis = Vec::new();
    for &y in &candidates {
        match ball_map(graph, &b, &label_of_gen, r, y, &mut stamp) {
            Some(psi) => {
                good.push(y);
                psis.push(psi);
            }
            None if declared.is_some() => {
                return Err(Error::Infeasible(format!("vertex {y} declared good fails the {r}-ball check")));
            }
            None => {}
        }
    }
    let delta = if graph.n == 0 { 0.0 } else { 1.0 - good.len() as f64 / graph.n as f64 };
    Ok(CertifiedGraph { graph: graph.clone(), group: group.clone(), radius: r, good, delta, ball: b, psi: psis })
}

fn ball_map(
    graph: &LabeledGraph,
    b: &Ball,
    label_of_gen: &[usize],
    r: usize,
    y: usize,
    stamp: &mut [(usize, usize)],
) -> Option<Vec<usize>> {
    let mut psi = vec![usize::MAX; b.elements.len()];
    psi[0] = y;
    for i in 1..b.elements.len() {
        let (p, s, fwd) = b.parent[i];
        let l = label_of_gen[s];
        let cands = if fwd { &graph.out[psi[p]][l] } else { &graph.inn[psi[p]][l] };
        if cands.len() != 1 {
            return None;
        }
        psi[i] = cands[0];
    }
    // injective
    for (i, &v) in psi.iter().enumerate() {
        if stamp[v].0 == y + 1 {
            return None;
        }
        stamp[v] = (y + 1, i);
    }
    // the image is the whole graph ball, and induced labeled edges agree in
    // both directions
    for (i, &v) in psi.iter().enumerate() {
        for (s, &l) in label_of_gen.iter().enumerate() {
            let targets = &graph.out[v][l];
            if b.dist[i] < r
                && targets.iter().chain(&graph.inn[v][l]).any(|&t| stamp[t].0 != y + 1)
            {
                return None;
            }
            if let Some(j) = b.next[i][s] {
                if !targets.contains(&psi[j]) {
                    return None;
                }
            }
            for &t in targets {
                if stamp[t].0 == y + 1 && Some(stamp[t].1) != b.next[i][s] {
                    return None;
                }
            }
        }
    }
    Some(psi)
}

/// `K_A` on `V × {1..d}`: entry `((ψ_y(g), k), (y, l))` is the coefficient of
/// `g` in `Aₖₗ` for good `y`; columns of bad vertices vanish.
#[derive(Clone, Debug)]
pub struct SoficKernel {
    pub vertices: usize,
    pub d: usize,
    pub width: u64,
    pub good: Vec<usize>,
    pub matrix: SparseMatrix,
}

pub fn sofic_kernel(a: &RingMatrix, cg: &CertifiedGraph) -> Result<SoficKernel> {
    if *a.group() != cg.group {
        return Err(Error::DescriptorMismatch);
    }
    let width = a.support_radius()?;
    if width as usize > cg.radius {
        return Err(Error::WidthExceedsRadius { width: width as usize, radius: cg.radius });
    }
    let d = a.dim();
    let index: BTreeMap<&GroupElement, usize> = cg.ball.elements.iter().enumerate().map(|(i, g)| (g, i)).collect();
    let mut triplets = Vec::new();
    for k in 0..d {
        for l in 0..d {
            for (g, c) in a.get(k, l).terms() {
                let gi = index[g];
                let c = c.to_complex();
                for (yi, &y) in cg.good.iter().enumerate() {
                    triplets.push((cg.psi[yi][gi] * d + k, y * d + l, c));
                }
            }
        }
    }
    Ok(SoficKernel {
        vertices: cg.graph.n,
        d,
        width,
        good: cg.good.clone(),
        matrix: SparseMatrix::from_triplets(cg.graph.n * d, triplets),
    })
}

impl SoficKernel {
    /// Rows and columns of good vertices; the remaining columns are zero, so
    /// this block carries every nonzero eigenvalue.
    pub fn good_block(&self) -> SparseMatrix {
        let keep: Vec<usize> = self.good.iter().flat_map(|&y| (0..self.d).map(move |k| y * self.d + k)).collect();
        self.matrix.principal_submatrix(&keep)
    }
}

/// Largest matrix for which the exact characteristic polynomial is formed.
pub const CERTIFICATE_LIMIT: usize = 512;

/// `det*`: product of the nonzero eigenvalues.
#[derive(Clone, Debug, PartialEq)]
pub struct DetStar {
    /// `ln det*` from eigenvalues (or `LDLᵀ` for large definite blocks).
    pub ln_value: f64,
    /// Number of eigenvalues above `τ`.
    pub rank: usize,
    /// `|c|` for `c` the lowest nonzero characteristic coefficient, when
    /// the block is an integer matrix of size ≤ [`CERTIFICATE_LIMIT`].
    pub certificate: Option<BigInt>,
    /// Certificate present, positive, and matching the floating value.
    pub certified: bool,
}

impl DetStar {
    pub fn value(&self) -> f64 {
        libm::exp(self.ln_value)
    }
}

pub fn det_star(k: &SoficKernel) -> Result<DetStar> {
    det_star_of(&k.good_block())
}

/// `det*` of a Hermitian positive semidefinite matrix.
pub fn det_star_of(h: &SparseMatrix) -> Result<DetStar> {
    let n = h.n;
    let scale = h.max_row_sum();
    let tau = zero_threshold(scale);
    let (ln_value, rank) = match (n > 2048).then(|| log_det_definite(h)) {
        Some(Ok(v)) => (v, n),
        _ => {
            let ev = eigvalsh(h)?;
            if let Some(&neg) = ev.iter().find(|&&v| v < -tau) {
                return Err(Error::NegativeSpectrum(neg));
            }
            let pos: Vec<f64> = ev.into_iter().filter(|&v| v > tau).collect();
            (pos.iter().map(|v| libm::log(*v)).sum(), pos.len())
        }
    };
    let certificate = if n <= CERTIFICATE_LIMIT {
        h.to_integer_dense().map(|a| {
            let poly = charpoly_integer(&a, n);
            let (_, c) = lowest_nonzero(&poly);
            if c < BigInt::from(0) {
                -c
            } else {
                c
            }
        })
    } else {
        None
    };
    let certified = certificate.as_ref().is_some_and(|c| {
        *c > BigInt::from(0) && (ln_abs(c) - ln_value).abs() <= 1e-6 * (1.0 + ln_value.abs())
    });
    Ok(DetStar { ln_value, rank, certificate, certified })
}

/// One stage of `ln det*(K_A)/|V|`.
#[derive(Clone, Debug, PartialEq)]
pub struct SoficStage {
    pub vertices: usize,
    pub delta: f64,
    pub det: DetStar,
    pub normalized: f64,
}

pub fn sofic_lndet_limit(a: &RingMatrix, stages: &[CertifiedGraph]) -> Result<Vec<SoficStage>> {
    stages
        .iter()
        .map(|cg| {
            let k = sofic_kernel(a, cg)?;
            let det = det_star(&k)?;
            Ok(SoficStage {
                vertices: cg.graph.n,
                delta: cg.delta,
                normalized: det.ln_value / cg.graph.n as f64,
                det,
            })
        })
        .collect()
}

/// `ln det*(K_{σⱼ(A)})/|V|` for every Galois conjugate `σⱼ` (identity
/// first) and their sum, which is `≥ 0` for algebraic-integer coefficients.
pub fn galois_summed_lndet(a: &RingMatrix, cg: &CertifiedGraph) -> Result<(Vec<(i64, f64)>, f64)> {
    let n = a.conductor().ok_or(Error::NotExact)?;
    let mut terms = Vec::new();
    for j in crate::cyclotomic::Cyclotomic::galois_indices(n) {
        let k = sofic_kernel(&a.galois_conjugate(j)?, cg)?;
        terms.push((j, det_star(&k)?.ln_value / cg.graph.n as f64));
    }
    let sum = terms.iter().map(|t| t.1).sum();
    Ok((terms, sum))
}

/// Complex entries of a kernel, row-major, for inspection in tests.
pub fn kernel_dense(k: &SoficKernel) -> Vec<Complex64> {
    let n = k.matrix.n;
    let mut out = vec![Complex64::new(0.0, 0.0); n * n];
    for (i, row) in k.matrix.rows.iter().enumerate() {
        for &(j, v) in row {
            out[i * n + j] = v;
        }
    }
    out
}
