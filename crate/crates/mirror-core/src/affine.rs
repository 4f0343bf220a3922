//! Triangulated integral affine tori: the chart atlas, its validation, the
//! chain poset BΣ and the pairs barycentric subdivision PBΣ.
//!
//! Charts are identified by translations. The difference `q_j - q_i` is always
//! read through its shortest lift (every coordinate in `(-1/2, 1/2]`), and
//! lifts must be additive inside each simplex.

use crate::novikov::BaseField;
use crate::rat::{dot, dot_rr, fmt_rat, lcm, shortest_mod1, Rat};
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AtlasError {
    #[error("malformed atlas: {0}")]
    Malformed(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// A chain `I = {i_0 < ... < i_d}` stored as sorted vertex indices.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Chain(pub Vec<usize>);

impl Chain {
    pub fn new(mut v: Vec<usize>) -> Self {
        v.sort_unstable();
        v.dedup();
        Chain(v)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn min(&self) -> usize {
        self.0[0]
    }

    pub fn max(&self) -> usize {
        *self.0.last().unwrap()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.0.binary_search(&i).is_ok()
    }

    pub fn is_subset(&self, o: &Chain) -> bool {
        self.0.iter().all(|i| o.contains(*i))
    }

    /// `I≥_i`: elements at least `i`.
    pub fn ge(&self, i: usize) -> Chain {
        Chain(self.0.iter().copied().filter(|&x| x >= i).collect())
    }

    /// `I≤_i`: elements at most `i`.
    pub fn le(&self, i: usize) -> Chain {
        Chain(self.0.iter().copied().filter(|&x| x <= i).collect())
    }

    pub fn without(&self, i: usize) -> Chain {
        Chain(self.0.iter().copied().filter(|&x| x != i).collect())
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().copied()
    }

    /// Pairs `(I≥_i, I≤_i)` for every `i ∈ I`, in increasing `i`.
    pub fn splits(&self) -> impl Iterator<Item = (Chain, Chain)> + '_ {
        self.0.iter().map(move |&i| (self.ge(i), self.le(i)))
    }

    /// Position of `i` in the chain, i.e. `|I≤_i| - 1`.
    pub fn position(&self, i: usize) -> Option<usize> {
        self.0.binary_search(&i).ok()
    }
}

impl fmt::Display for Chain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|i| i.to_string()).collect();
        write!(f, "{{{}}}", parts.join(","))
    }
}

/// A strictly nested sequence of chains, stored shortest first.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BarycentricChain(pub Vec<Chain>);

impl BarycentricChain {
    pub fn new(mut v: Vec<Chain>) -> Option<Self> {
        v.sort_by(|a, b| a.len().cmp(&b.len()).then(a.cmp(b)));
        v.dedup();
        for w in v.windows(2) {
            if w[0].len() == w[1].len() || !w[0].is_subset(&w[1]) {
                return None;
            }
        }
        if v.is_empty() {
            None
        } else {
            Some(BarycentricChain(v))
        }
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn first(&self) -> &Chain {
        &self.0[0]
    }

    pub fn last(&self) -> &Chain {
        self.0.last().unwrap()
    }

    pub fn contains(&self, c: &Chain) -> bool {
        self.0.contains(c)
    }

    pub fn is_subset(&self, o: &BarycentricChain) -> bool {
        self.0.iter().all(|c| o.contains(c))
    }

    /// Members containing `i` (`vK[≥]_I`).
    pub fn above(&self, i: &Chain) -> Vec<Chain> {
        self.0.iter().filter(|c| i.is_subset(c)).cloned().collect()
    }

    /// Members contained in `i` (`vK[≤]_I`).
    pub fn below(&self, i: &Chain) -> Vec<Chain> {
        self.0.iter().filter(|c| c.is_subset(i)).cloned().collect()
    }
}

impl fmt::Display for BarycentricChain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|c| c.to_string()).collect();
        write!(f, "({})", parts.join("⊂"))
    }
}

/// A cell `σ_{vI⊂vJ}` of the pairs barycentric subdivision.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PairsCell {
    pub inner: BarycentricChain,
    pub outer: BarycentricChain,
}

impl PairsCell {
    pub fn new(inner: BarycentricChain, outer: BarycentricChain) -> Option<Self> {
        if inner.is_subset(&outer) {
            Some(PairsCell { inner, outer })
        } else {
            None
        }
    }

    pub fn dim(&self) -> usize {
        self.outer.len() - self.inner.len()
    }

    /// `other` is a face of `self`: `vI ⊆ vI' ⊆ vJ' ⊆ vJ`.
    pub fn has_face(&self, other: &PairsCell) -> bool {
        self.inner.is_subset(&other.inner) && other.outer.is_subset(&self.outer)
    }
}

impl fmt::Display for PairsCell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}⊂{}", self.inner, self.outer)
    }
}

/// Affine function `f_ij`, stored by its gradient and its value at `q_j`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Section {
    pub gradient: Vec<Rat>,
    pub value: Rat,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vertex {
    pub id: i64,
    pub basepoint: Vec<Rat>,
    /// Polytope vertices in absolute (lifted) coordinates near the basepoint.
    pub polytope: Vec<Vec<Rat>>,
}

#[derive(Clone, Debug)]
pub struct Atlas {
    pub dimension: usize,
    pub field: BaseField,
    pub lattice_denominator: i64,
    /// Sorted by id; everything else refers to vertices by index.
    pub vertices: Vec<Vertex>,
    pub simplices: Vec<Chain>,
    pub sections: BTreeMap<(usize, usize), Section>,
    pub sign_cocycle: BTreeMap<(usize, usize, usize), u8>,
    facets: Vec<Vec<(Vec<Rat>, Rat)>>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub kind: String,
    pub cell: String,
    pub detail: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    pub notes: Vec<String>,
}

impl ValidationReport {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(&mut self, kind: &str, cell: String, detail: String) {
        self.violations.push(Violation { kind: kind.to_string(), cell, detail });
    }

    pub fn has(&self, kind: &str) -> bool {
        self.violations.iter().any(|v| v.kind == kind)
    }
}

// ---------- JSON schema ----------

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct PolytopeJson {
    pub vertices: Vec<Vec<String>>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct VertexJson {
    pub id: i64,
    pub basepoint: Vec<String>,
    pub polytope: PolytopeJson,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct SectionJson {
    pub edge: [i64; 2],
    pub gradient: Vec<String>,
    pub value_at_target: String,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct SignJson {
    pub triple: [i64; 3],
    pub value: u8,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct AtlasJson {
    pub dimension: usize,
    #[serde(default = "default_field")]
    pub field: String,
    #[serde(default = "default_den")]
    pub lattice_denominator: i64,
    pub vertices: Vec<VertexJson>,
    pub simplices: Vec<Vec<i64>>,
    #[serde(default)]
    pub sections: Vec<SectionJson>,
    #[serde(default)]
    pub sign_cocycle: Vec<SignJson>,
}

fn default_field() -> String {
    "Q".into()
}

fn default_den() -> i64 {
    1
}

fn parse_vec(v: &[String], what: &str) -> Result<Vec<Rat>, AtlasError> {
    v.iter()
        .map(|s| crate::rat::parse_rat(s).map_err(|e| AtlasError::Malformed(format!("{what}: {e}"))))
        .collect()
}

fn fmt_vec(v: &[Rat]) -> Vec<String> {
    v.iter().map(fmt_rat).collect()
}

// ---------- exact linear algebra over Q ----------

/// Basis of the kernel of `rows` (each of length `ncols`).
pub(crate) fn nullspace(rows: &[Vec<Rat>], ncols: usize) -> Vec<Vec<Rat>> {
    let mut m: Vec<Vec<Rat>> = rows.to_vec();
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..ncols {
        let Some(p) = (r..m.len()).find(|&k| !m[k][c].is_zero()) else { continue };
        m.swap(r, p);
        let inv = m[r][c].recip();
        for x in m[r].iter_mut() {
            *x *= inv;
        }
        for k in 0..m.len() {
            if k != r && !m[k][c].is_zero() {
                let f = m[k][c];
                for cc in 0..ncols {
                    let d = f * m[r][cc];
                    m[k][cc] -= d;
                }
            }
        }
        pivots.push(c);
        r += 1;
        if r == m.len() {
            break;
        }
    }
    let free: Vec<usize> = (0..ncols).filter(|c| !pivots.contains(c)).collect();
    free.iter()
        .map(|&f| {
            let mut v = vec![Rat::zero(); ncols];
            v[f] = Rat::one();
            for (row, &pc) in pivots.iter().enumerate() {
                v[pc] = -m[row][f];
            }
            v
        })
        .collect()
}

/// Facet inequalities `a·x ≤ b` of the convex hull of `pts` in dimension `n`.
/// Returns `None` when the hull is not full-dimensional.
fn facets_of(pts: &[Vec<Rat>], n: usize) -> Option<Vec<(Vec<Rat>, Rat)>> {
    if n == 0 {
        return Some(Vec::new());
    }
    if pts.is_empty() {
        return None;
    }
    if n == 1 {
        let lo = pts.iter().map(|p| p[0]).min().unwrap();
        let hi = pts.iter().map(|p| p[0]).max().unwrap();
        if lo == hi {
            return None;
        }
        return Some(vec![(vec![Rat::one()], hi), (vec![-Rat::one()], -lo)]);
    }
    let mut out: Vec<(Vec<Rat>, Rat)> = Vec::new();
    let idx: Vec<usize> = (0..pts.len()).collect();
    for subset in combinations(&idx, n) {
        let base = &pts[subset[0]];
        let rows: Vec<Vec<Rat>> = subset[1..]
            .iter()
            .map(|&k| pts[k].iter().zip(base).map(|(a, b)| a - b).collect())
            .collect();
        let ns = nullspace(&rows, n);
        if ns.len() != 1 {
            continue;
        }
        let mut a = ns[0].clone();
        let mut b = dot_rr(&a, base);
        let side: Vec<Rat> = pts.iter().map(|p| dot_rr(&a, p) - b).collect();
        let pos = side.iter().any(|s| s.is_positive());
        let neg = side.iter().any(|s| s.is_negative());
        if pos && neg {
            continue;
        }
        if !pos && !neg {
            return None;
        }
        if pos {
            a = a.iter().map(|x| -x).collect();
            b = -b;
        }
        // normalize by first nonzero magnitude
        let lead = a.iter().find(|x| !x.is_zero()).map(|x| x.abs()).unwrap();
        let a: Vec<Rat> = a.iter().map(|x| x / lead).collect();
        let b = b / lead;
        if !out.iter().any(|(aa, bb)| aa == &a && *bb == b) {
            out.push((a, b));
        }
    }
    if out.len() < n + 1 {
        return None;
    }
    Some(out)
}

pub(crate) fn combinations<T: Clone>(items: &[T], k: usize) -> Vec<Vec<T>> {
    let mut out = Vec::new();
    let mut cur = Vec::new();
    fn rec<T: Clone>(items: &[T], k: usize, start: usize, cur: &mut Vec<T>, out: &mut Vec<Vec<T>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..items.len() {
            cur.push(items[i].clone());
            rec(items, k, i + 1, cur, out);
            cur.pop();
        }
    }
    rec(items, k, 0, &mut cur, &mut out);
    out
}

fn inside(facets: &[(Vec<Rat>, Rat)], p: &[Rat]) -> bool {
    facets.iter().all(|(a, b)| dot_rr(a, p) <= *b)
}

impl Atlas {
    /// Builds an atlas from raw parts; malformed structure is an error,
    /// geometric invariants are left to [`Atlas::validate`].
    pub fn new(
        dimension: usize,
        field: BaseField,
        lattice_denominator: i64,
        mut vertices: Vec<Vertex>,
        simplices: Vec<Vec<i64>>,
        sections: Vec<((i64, i64), Section)>,
        signs: Vec<((i64, i64, i64), u8)>,
    ) -> Result<Self, AtlasError> {
        let bad = |m: String| Err(AtlasError::Malformed(m));
        if lattice_denominator < 1 {
            return bad("lattice_denominator must be positive".into());
        }
        vertices.sort_by_key(|v| v.id);
        for w in vertices.windows(2) {
            if w[0].id == w[1].id {
                return bad(format!("duplicate vertex id {}", w[0].id));
            }
        }
        for v in &vertices {
            if v.basepoint.len() != dimension {
                return bad(format!("vertex {}: basepoint has wrong dimension", v.id));
            }
            if v.polytope.iter().any(|p| p.len() != dimension) {
                return bad(format!("vertex {}: polytope vertex has wrong dimension", v.id));
            }
        }
        let index: BTreeMap<i64, usize> =
            vertices.iter().enumerate().map(|(k, v)| (v.id, k)).collect();
        let look = |id: i64| -> Result<usize, AtlasError> {
            index
                .get(&id)
                .copied()
                .ok_or_else(|| AtlasError::Malformed(format!("unknown vertex id {id}")))
        };
        let mut simp = Vec::new();
        for s in simplices {
            let ids: Result<Vec<usize>, _> = s.iter().map(|&i| look(i)).collect();
            let c = Chain::new(ids?);
            if c.len() != s.len() || c.is_empty() {
                return bad(format!("simplex {s:?} has repeated or no vertices"));
            }
            simp.push(c);
        }
        let mut secs = BTreeMap::new();
        for ((i, j), s) in sections {
            let (a, b) = (look(i)?, look(j)?);
            if a >= b {
                return bad(format!("section edge [{i},{j}] must be increasing"));
            }
            if s.gradient.len() != dimension {
                return bad(format!("section [{i},{j}] gradient has wrong dimension"));
            }
            secs.insert((a, b), s);
        }
        let mut sg = BTreeMap::new();
        for ((i, j, k), v) in signs {
            let (a, b, c) = (look(i)?, look(j)?, look(k)?);
            if !(a < b && b < c) {
                return bad(format!("sign triple [{i},{j},{k}] must be increasing"));
            }
            if v > 1 {
                return bad(format!("sign value {v} not in {{0,1}}"));
            }
            sg.insert((a, b, c), v);
        }
        let facets = vertices
            .iter()
            .map(|v| facets_of(&v.polytope, dimension).unwrap_or_default())
            .collect();
        Ok(Atlas {
            dimension,
            field,
            lattice_denominator,
            vertices,
            simplices: simp,
            sections: secs,
            sign_cocycle: sg,
            facets,
        })
    }

    pub fn from_json(j: &AtlasJson) -> Result<Self, AtlasError> {
        let field = BaseField::parse(&j.field).map_err(|e| AtlasError::Malformed(e.to_string()))?;
        let mut verts = Vec::new();
        for v in &j.vertices {
            verts.push(Vertex {
                id: v.id,
                basepoint: parse_vec(&v.basepoint, "basepoint")?,
                polytope: v
                    .polytope
                    .vertices
                    .iter()
                    .map(|p| parse_vec(p, "polytope"))
                    .collect::<Result<_, _>>()?,
            });
        }
        let mut secs = Vec::new();
        for s in &j.sections {
            secs.push((
                (s.edge[0], s.edge[1]),
                Section {
                    gradient: parse_vec(&s.gradient, "gradient")?,
                    value: crate::rat::parse_rat(&s.value_at_target)
                        .map_err(|e| AtlasError::Malformed(e.to_string()))?,
                },
            ));
        }
        let signs = j
            .sign_cocycle
            .iter()
            .map(|s| ((s.triple[0], s.triple[1], s.triple[2]), s.value))
            .collect();
        Atlas::new(j.dimension, field, j.lattice_denominator, verts, j.simplices.clone(), secs, signs)
    }

    pub fn from_json_str(s: &str) -> Result<Self, AtlasError> {
        let j: AtlasJson = serde_json::from_str(s)?;
        Atlas::from_json(&j)
    }

    pub fn to_json(&self) -> AtlasJson {
        AtlasJson {
            dimension: self.dimension,
            field: match self.field {
                BaseField::Rationals => "Q".into(),
                BaseField::Prime(p) => format!("F_{p}"),
            },
            lattice_denominator: self.lattice_denominator,
            vertices: self
                .vertices
                .iter()
                .map(|v| VertexJson {
                    id: v.id,
                    basepoint: fmt_vec(&v.basepoint),
                    polytope: PolytopeJson { vertices: v.polytope.iter().map(|p| fmt_vec(p)).collect() },
                })
                .collect(),
            simplices: self.simplices.iter().map(|c| c.iter().map(|i| self.vertices[i].id).collect()).collect(),
            sections: self
                .sections
                .iter()
                .map(|(&(i, j), s)| SectionJson {
                    edge: [self.vertices[i].id, self.vertices[j].id],
                    gradient: fmt_vec(&s.gradient),
                    value_at_target: fmt_rat(&s.value),
                })
                .collect(),
            sign_cocycle: self
                .sign_cocycle
                .iter()
                .filter(|(_, &v)| v != 0)
                .map(|(&(i, j, k), &v)| SignJson {
                    triple: [self.vertices[i].id, self.vertices[j].id, self.vertices[k].id],
                    value: v,
                })
                .collect(),
        }
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn id(&self, i: usize) -> i64 {
        self.vertices[i].id
    }

    pub fn index_of(&self, id: i64) -> Option<usize> {
        self.vertices.iter().position(|v| v.id == id)
    }

    /// Chain label using vertex ids.
    pub fn label(&self, c: &Chain) -> String {
        let parts: Vec<String> = c.iter().map(|i| self.id(i).to_string()).collect();
        format!("{{{}}}", parts.join(","))
    }

    /// Shortest lift of `q_j - q_i`.
    pub fn lift(&self, i: usize, j: usize) -> Vec<Rat> {
        self.vertices[j]
            .basepoint
            .iter()
            .zip(&self.vertices[i].basepoint)
            .map(|(a, b)| shortest_mod1(&(a - b)))
            .collect()
    }

    /// Polytope vertices of `P_i` relative to `q_i`.
    pub fn chart_vertices(&self, i: usize) -> Vec<Vec<Rat>> {
        let q = &self.vertices[i].basepoint;
        self.vertices[i]
            .polytope
            .iter()
            .map(|p| p.iter().zip(q).map(|(a, b)| a - b).collect())
            .collect()
    }

    /// `min over vertices v of P_i of ⟨v - q_i, A⟩`.
    pub fn min_pairing(&self, i: usize, a: &[i64]) -> Rat {
        self.chart_vertices(i)
            .iter()
            .map(|v| dot(v, a))
            .min()
            .unwrap_or_else(Rat::zero)
    }

    pub fn section(&self, i: usize, j: usize) -> Section {
        self.sections.get(&(i, j)).cloned().unwrap_or(Section {
            gradient: vec![Rat::zero(); self.dimension],
            value: Rat::zero(),
        })
    }

    pub fn sign(&self, i: usize, j: usize, k: usize) -> u8 {
        self.sign_cocycle.get(&(i, j, k)).copied().unwrap_or(0)
    }

    /// `f_ij` evaluated at `q_k` (through the shortest lift `q_k - q_j`).
    pub fn section_at(&self, i: usize, j: usize, k: usize) -> Rat {
        let s = self.section(i, j);
        s.value + dot_rr(&s.gradient, &self.lift(j, k))
    }

    /// `(g_ijk(q_k), dg_ijk)` for `g = f_ij + f_jk - f_ik`.
    pub fn g_triple(&self, i: usize, j: usize, k: usize) -> (Rat, Vec<Rat>) {
        let val = self.section_at(i, j, k) + self.section_at(j, k, k) - self.section_at(i, k, k);
        let (a, b, c) = (self.section(i, j), self.section(j, k), self.section(i, k));
        let grad = (0..self.dimension)
            .map(|t| a.gradient[t] + b.gradient[t] - c.gradient[t])
            .collect();
        (val, grad)
    }

    /// All chains (nonempty subsets of simplices) of length at most `max_len`,
    /// sorted by length and then lexicographically.
    pub fn chains(&self, max_len: usize) -> Vec<Chain> {
        let mut set: BTreeSet<Chain> = BTreeSet::new();
        for s in &self.simplices {
            let m = s.len();
            for mask in 1u64..(1u64 << m) {
                if (mask.count_ones() as usize) > max_len {
                    continue;
                }
                let v: Vec<usize> = (0..m).filter(|b| mask >> b & 1 == 1).map(|b| s.0[b]).collect();
                set.insert(Chain(v));
            }
        }
        let mut out: Vec<Chain> = set.into_iter().collect();
        out.sort_by(|a, b| a.len().cmp(&b.len()).then(a.cmp(b)));
        out
    }

    pub fn all_chains(&self) -> Vec<Chain> {
        self.chains(usize::MAX)
    }

    pub fn is_chain(&self, c: &Chain) -> bool {
        !c.is_empty() && self.simplices.iter().any(|s| c.is_subset(s))
    }

    /// Chains `J ⊇ I` with `|J| = |I| + 1`.
    pub fn dual_cell_boundary(&self, i: &Chain) -> Vec<Chain> {
        self.chains(i.len() + 1)
            .into_iter()
            .filter(|j| j.len() == i.len() + 1 && i.is_subset(j))
            .collect()
    }

    /// All strictly nested sequences of chains.
    pub fn barycentric_chains(&self) -> Vec<BarycentricChain> {
        let chains = self.all_chains();
        let mut out = Vec::new();
        fn rec(chains: &[Chain], cur: &mut Vec<Chain>, out: &mut Vec<BarycentricChain>) {
            out.push(BarycentricChain(cur.clone()));
            let last = cur.last().unwrap().clone();
            for c in chains {
                if c.len() > last.len() && last.is_subset(c) {
                    cur.push(c.clone());
                    rec(chains, cur, out);
                    cur.pop();
                }
            }
        }
        for c in &chains {
            let mut cur = vec![c.clone()];
            rec(&chains, &mut cur, &mut out);
        }
        out.sort();
        out
    }

    /// Every cell `vI ⊆ vJ` of the pairs barycentric subdivision.
    pub fn pairs_barycentric_cells(&self) -> Vec<PairsCell> {
        let mut out = Vec::new();
        for vj in self.barycentric_chains() {
            let m = vj.len();
            for mask in 1u64..(1u64 << m) {
                let vi: Vec<Chain> = (0..m).filter(|b| mask >> b & 1 == 1).map(|b| vj.0[b].clone()).collect();
                out.push(PairsCell { inner: BarycentricChain(vi), outer: vj.clone() });
            }
        }
        out.sort_by(|a, b| a.dim().cmp(&b.dim()).then(a.cmp(b)));
        out
    }

    /// Exponent lattice actually needed: the configured denominator refined by
    /// the denominators of basepoints, section values and cocycle exponents.
    pub fn effective_denominator(&self) -> i64 {
        let mut d = self.lattice_denominator;
        for v in &self.vertices {
            for x in &v.basepoint {
                d = lcm(d, *shortest_mod1(x).denom());
            }
        }
        for (&(i, j), s) in &self.sections {
            d = lcm(d, *s.value.denom());
            for k in 0..self.n_vertices() {
                if self.is_chain(&Chain::new(vec![i, j, k])) {
                    d = lcm(d, *self.section_at(i, j, k).denom());
                }
            }
        }
        for c in self.chains(3).iter().filter(|c| c.len() == 3) {
            let (v, _) = self.g_triple(c.0[0], c.0[1], c.0[2]);
            d = lcm(d, *v.denom());
        }
        d
    }

    pub fn validate(&self) -> ValidationReport {
        let mut rep = ValidationReport::default();
        let n = self.dimension;
        // simplices: maximal ones have n+1 vertices
        for s in &self.simplices {
            let maximal = !self.simplices.iter().any(|t| t.len() > s.len() && s.is_subset(t));
            if maximal && s.len() != n + 1 {
                rep.push(
                    "maximal simplex has wrong size",
                    self.label(s),
                    format!("{} vertices, expected {}", s.len(), n + 1),
                );
            }
        }
        for (i, v) in self.vertices.iter().enumerate() {
            if facets_of(&v.polytope, n).is_none() {
                rep.push("degenerate polytope", format!("{{{}}}", v.id), "polytope is not full-dimensional".into());
                continue;
            }
            if !inside(&self.facets[i], &v.basepoint) {
                rep.push("basepoint outside polytope", format!("{{{}}}", v.id), "q_i ∉ P_i".into());
            }
        }
        // lifts additive inside simplices
        let chains = self.all_chains();
        for c in chains.iter().filter(|c| c.len() == 3) {
            let (i, j, k) = (c.0[0], c.0[1], c.0[2]);
            let (a, b, ik) = (self.lift(i, j), self.lift(j, k), self.lift(i, k));
            let sum: Vec<Rat> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
            if sum != ik {
                rep.push(
                    "simplex wraps",
                    self.label(c),
                    "shortest lifts of basepoint differences are not additive".into(),
                );
            }
        }
        // σ_I ⊆ P_i for i ∈ I
        for s in &self.simplices {
            for i in s.iter() {
                for k in s.iter() {
                    let p: Vec<Rat> = self.vertices[i]
                        .basepoint
                        .iter()
                        .zip(self.lift(i, k))
                        .map(|(q, d)| q + d)
                        .collect();
                    if !self.facets[i].is_empty() && !inside(&self.facets[i], &p) {
                        rep.push(
                            "simplex not in chart",
                            self.label(s),
                            format!("vertex {} of the simplex lies outside P_{}", self.id(k), self.id(i)),
                        );
                    }
                }
            }
        }
        // P_j ⊆ P_i for i < j in a common simplex
        for c in chains.iter().filter(|c| c.len() == 2) {
            let (i, j) = (c.0[0], c.0[1]);
            if self.facets[i].is_empty() && n > 0 {
                continue;
            }
            let shift: Vec<Rat> = self.lift(i, j);
            let ok = self.chart_vertices(j).iter().all(|v| {
                let p: Vec<Rat> = v
                    .iter()
                    .zip(&shift)
                    .zip(&self.vertices[i].basepoint)
                    .map(|((a, b), q)| a + b + q)
                    .collect();
                inside(&self.facets[i], &p)
            });
            if !ok {
                rep.push(
                    "chart not nested",
                    self.label(c),
                    format!("P_{} ⊄ P_{}", self.id(j), self.id(i)),
                );
            }
        }
        // integrality of d(f_ij + f_jk - f_ik)
        for c in chains.iter().filter(|c| c.len() == 3) {
            let (_, grad) = self.g_triple(c.0[0], c.0[1], c.0[2]);
            if grad.iter().any(|g| !g.is_integer()) {
                rep.push(
                    "non-integral cocycle differential",
                    self.label(c),
                    format!("d(f_ij+f_jk-f_ik) = [{}]", fmt_vec(&grad).join(", ")),
                );
            }
        }
        // v is a cocycle
        for c in chains.iter().filter(|c| c.len() == 4) {
            let (i, j, k, l) = (c.0[0], c.0[1], c.0[2], c.0[3]);
            let s = self.sign(j, k, l) + self.sign(i, k, l) + self.sign(i, j, l) + self.sign(i, j, k);
            if s % 2 != 0 {
                rep.push("sign cochain not a cocycle", self.label(c), "δv ≠ 0 mod 2".into());
            }
        }
        // lattice
        let d = self.effective_denominator();
        if d != self.lattice_denominator {
            rep.notes.push(format!(
                "exponent lattice refined from (1/{})Z to (1/{})Z by the atlas data",
                self.lattice_denominator, d
            ));
        }
        if !chains.iter().any(|c| c.len() == 4) {
            rep.notes.push("no chains of length 4: cocycle conditions on 4-chains are vacuous".into());
        }
        rep.notes.push(
            "open-star containment is checked as closed-star containment (vertex test on closed simplices)".into(),
        );
        rep
    }
}
