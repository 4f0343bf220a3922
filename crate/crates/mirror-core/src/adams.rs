//! Adams paths, the cubes `𝒜̄` with their strata, and the families of
//! degenerate annuli over cells of the pairs barycentric subdivision.
//!
//! A cube is an ordered list of elements together with a mask of fixed
//! elements. Strata are pairs of masks `fixed ⊆ I ⊆ J ⊆ all`; on a stratum
//! the coordinates in `I` equal 1, those outside `J` vanish and the ones in
//! `J∖I` are free. The same convention is used for cells `σ_{vI⊂vJ}`, whose
//! elements are the members of `vJ` and whose fixed mask is `vI`.

use crate::affine::{BarycentricChain, Chain, PairsCell};
use crate::dot::Hasse;
use crate::rat::{fmt_rat, Rat};
use num_traits::{One, Signed, Zero};
use serde::Serialize;
use std::collections::BTreeMap;
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AdamsError {
    #[error("parameter out of range: {0}")]
    OutOfRange(String),
    #[error("weights on the {0} side must be positive and sum to 1")]
    Weights(&'static str),
    #[error("{0}")]
    Shape(String),
}

/// An element of `(0, ∞]` or `[0, ∞]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Ext {
    Fin(Rat),
    Inf,
}

impl Ext {
    pub fn add(self, o: Ext) -> Ext {
        match (self, o) {
            (Ext::Fin(a), Ext::Fin(b)) => Ext::Fin(a + b),
            _ => Ext::Inf,
        }
    }

    pub fn scale(self, w: Rat) -> Ext {
        match self {
            Ext::Fin(a) => Ext::Fin(a * w),
            Ext::Inf => Ext::Inf,
        }
    }
}

impl fmt::Display for Ext {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Ext::Fin(r) => write!(f, "{}", fmt_rat(r)),
            Ext::Inf => write!(f, "inf"),
        }
    }
}

impl Serialize for Ext {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

/// Default identification of `[0,1]` with `[0,∞]`: `r ↦ r/(1−r)`.
pub fn ratio_map(r: Rat) -> Ext {
    if r >= Rat::one() {
        Ext::Inf
    } else {
        Ext::Fin(r / (Rat::one() - r))
    }
}

/// Evaluates the Adams path of the simplex `Δ_d` with parameters
/// `r ∈ [0,1]^{d-1}` at time `s ∈ [0, Σr + 1]`.
pub fn adams_path_eval(r: &[Rat], s: Rat) -> Result<Vec<Rat>, AdamsError> {
    let d = r.len() + 1;
    if let Some(x) = r.iter().find(|x| x.is_negative() || **x > Rat::one()) {
        return Err(AdamsError::OutOfRange(format!("r = {} not in [0,1]", fmt_rat(x))));
    }
    let total: Rat = r.iter().copied().sum::<Rat>() + Rat::one();
    if s.is_negative() || s > total {
        return Err(AdamsError::OutOfRange(format!(
            "s = {} not in [0,{}]",
            fmt_rat(&s),
            fmt_rat(&total)
        )));
    }
    let mut p = vec![Rat::zero(); d + 1];
    p[0] = Rat::one();
    let mut acc = Rat::zero();
    for j in 1..=d {
        let rj = if j < d { r[j - 1] } else { Rat::one() };
        let sj = s - acc;
        if sj <= rj {
            let mut out: Vec<Rat> = p.iter().map(|x| x * (Rat::one() - sj)).collect();
            out[j] += sj;
            return Ok(out);
        }
        for x in p.iter_mut() {
            *x *= Rat::one() - rj;
        }
        p[j] += rj;
        acc += rj;
    }
    unreachable!("s is bounded by the total length")
}

/// Element of a prism `(K−, K+)`; every `+` element precedes every `−` one.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Pt {
    Plus(usize),
    Minus(usize),
}

impl Pt {
    pub fn vertex(self) -> usize {
        match self {
            Pt::Plus(v) | Pt::Minus(v) => v,
        }
    }
}

impl fmt::Display for Pt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Pt::Plus(v) => write!(f, "({v},+)"),
            Pt::Minus(v) => write!(f, "({v},−)"),
        }
    }
}

fn prism(minus: &[usize], plus: &[usize]) -> Vec<Pt> {
    let mut v: Vec<Pt> = minus.iter().map(|&i| Pt::Minus(i)).chain(plus.iter().map(|&i| Pt::Plus(i))).collect();
    v.sort();
    v
}

/// `K^in_I = (K≥_{max I} × {−}, K≤_{min I} × {+})`.
pub fn prism_in(k: &Chain, i: &Chain) -> Vec<Pt> {
    prism(&k.ge(i.max()).0, &k.le(i.min()).0)
}

/// `K^ou_I = (K≤_{min I} × {−}, K≥_{max I} × {+})`.
pub fn prism_out(k: &Chain, i: &Chain) -> Vec<Pt> {
    prism(&k.le(i.min()).0, &k.ge(i.max()).0)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum CubeKind {
    Plain,
    Input,
    Output,
    Cell,
}

/// A stratum `I ⊂ J` stored as bit masks over the cube's elements.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Stratum {
    pub inner: u32,
    pub outer: u32,
}

impl Stratum {
    pub fn dim(&self) -> usize {
        (self.outer & !self.inner).count_ones() as usize
    }

    /// `self ≤ o`: `o.I ⊆ self.I ⊆ self.J ⊆ o.J`.
    pub fn is_face_of(&self, o: &Stratum) -> bool {
        o.inner & !self.inner == 0 && self.outer & !o.outer == 0
    }
}

fn bits(m: u32) -> Vec<usize> {
    (0..32).filter(|b| m >> b & 1 == 1).collect()
}

fn mask(idx: impl IntoIterator<Item = usize>) -> u32 {
    idx.into_iter().fold(0, |m, b| m | 1 << b)
}

/// One of the cubes `𝒜̄_K`, `𝒜̄_{K−,K+}`, `𝒜̄_{vK;in}`, `𝒜̄_{vK;ou}`, or a
/// pairs cell viewed as a cube.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct AdamsCube {
    pub kind: CubeKind,
    pub labels: Vec<String>,
    pub fixed: u32,
}

/// A factor of a stratum: a cube together with the parent indices of its
/// elements.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Factor {
    pub cube: AdamsCube,
    pub indices: Vec<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum FacetFamily {
    /// The coordinate of the element vanishes.
    Skip,
    /// The coordinate of the element equals 1.
    Stop,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Facet {
    pub stratum: Stratum,
    pub family: FacetFamily,
    pub element: usize,
    pub factors: Vec<Factor>,
}

impl Facet {
    pub fn describe(&self) -> String {
        let names: Vec<String> = self.factors.iter().map(|f| f.cube.name()).collect();
        names.join(" × ")
    }
}

fn fixed_for(kind: CubeKind, n: usize) -> u32 {
    match kind {
        CubeKind::Plain => 1 | 1 << (n - 1),
        CubeKind::Input => 1 << (n - 1),
        CubeKind::Output => 1,
        CubeKind::Cell => 0,
    }
}

impl AdamsCube {
    fn with_kind(kind: CubeKind, labels: Vec<String>) -> AdamsCube {
        assert!(!labels.is_empty() && labels.len() <= 31, "cube size out of range");
        let fixed = fixed_for(kind, labels.len());
        AdamsCube { kind, labels, fixed }
    }

    pub fn plain(labels: Vec<String>) -> AdamsCube {
        AdamsCube::with_kind(CubeKind::Plain, labels)
    }

    pub fn plain_chain(k: &Chain) -> AdamsCube {
        AdamsCube::plain(k.iter().map(|i| i.to_string()).collect())
    }

    pub fn prism(elems: &[Pt]) -> AdamsCube {
        AdamsCube::plain(elems.iter().map(|p| p.to_string()).collect())
    }

    pub fn input(vk: &BarycentricChain) -> AdamsCube {
        AdamsCube::with_kind(CubeKind::Input, vk.0.iter().map(|c| c.to_string()).collect())
    }

    pub fn output(vk: &BarycentricChain) -> AdamsCube {
        AdamsCube::with_kind(CubeKind::Output, vk.0.iter().map(|c| c.to_string()).collect())
    }

    /// The cell `σ_{vI⊂vJ}` as a cube with elements `vJ` and fixed mask `vI`.
    pub fn cell(c: &PairsCell) -> AdamsCube {
        let labels = c.outer.0.iter().map(|m| m.to_string()).collect();
        let fixed = mask(
            c.outer
                .0
                .iter()
                .enumerate()
                .filter(|(_, m)| c.inner.contains(m))
                .map(|(k, _)| k),
        );
        AdamsCube { kind: CubeKind::Cell, labels, fixed }
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn full(&self) -> u32 {
        (1u32 << self.n()) - 1
    }

    pub fn dim(&self) -> usize {
        self.n() - self.fixed.count_ones() as usize
    }

    /// Indices of the coordinates, i.e. the non-fixed elements.
    pub fn coords(&self) -> Vec<usize> {
        (0..self.n()).filter(|b| self.fixed >> b & 1 == 0).collect()
    }

    pub fn name(&self) -> String {
        let body = match self.kind {
            CubeKind::Plain | CubeKind::Cell => self.labels.join(","),
            _ => self.labels.join("⊂"),
        };
        match self.kind {
            CubeKind::Plain => format!("𝒜̄_{{{body}}}"),
            CubeKind::Input => format!("𝒜̄_{{({body});in}}"),
            CubeKind::Output => format!("𝒜̄_{{({body});ou}}"),
            CubeKind::Cell => format!("σ_{{{body}}}"),
        }
    }

    pub fn top(&self) -> Stratum {
        Stratum { inner: self.fixed, outer: self.full() }
    }

    pub fn is_stratum(&self, s: &Stratum) -> bool {
        let full = self.full();
        self.fixed & !s.inner == 0 && s.inner & !s.outer == 0 && s.outer & !full == 0
    }

    /// All strata, sorted by dimension and then by masks.
    pub fn strata(&self) -> Vec<Stratum> {
        let free = bits(self.full() & !self.fixed);
        let k = free.len();
        let mut out = Vec::new();
        // each free element is in I, in J∖I, or outside J
        let total = 3usize.pow(k as u32);
        for mut code in 0..total {
            let mut s = Stratum { inner: self.fixed, outer: self.fixed };
            for &b in &free {
                match code % 3 {
                    0 => {}
                    1 => s.outer |= 1 << b,
                    _ => {
                        s.outer |= 1 << b;
                        s.inner |= 1 << b;
                    }
                }
                code /= 3;
            }
            out.push(s);
        }
        out.sort_by_key(|s| (s.dim(), s.inner, s.outer));
        out
    }

    pub fn stratum_label(&self, s: &Stratum) -> String {
        let set = |m: u32| -> String {
            let parts: Vec<&str> = bits(m).into_iter().map(|b| self.labels[b].as_str()).collect();
            match self.kind {
                CubeKind::Plain => format!("{{{}}}", parts.join(",")),
                _ => format!("({})", parts.join("⊂")),
            }
        };
        format!("{}⊂{}", set(s.inner), set(s.outer))
    }

    pub fn hasse(&self) -> Hasse {
        Hasse::from_order(&self.strata(), |s| self.stratum_label(s), |s| s.dim(), |a, b| a.is_face_of(b))
    }

    fn sub(&self, kind: CubeKind, indices: Vec<usize>) -> Factor {
        let labels = indices.iter().map(|&b| self.labels[b].clone()).collect();
        Factor { cube: AdamsCube::with_kind(kind, labels), indices }
    }

    /// Plain factors `𝒜̄_{J ∩ [m_l, m_{l+1}]}` for successive anchors, listed
    /// from the top down.
    fn plain_factors(&self, anchors: &[usize], outer: u32) -> Vec<Factor> {
        let mut out = Vec::new();
        for w in anchors.windows(2).rev() {
            let idx: Vec<usize> = bits(outer).into_iter().filter(|&b| b >= w[0] && b <= w[1]).collect();
            out.push(self.sub(CubeKind::Plain, idx));
        }
        out
    }

    /// Product decomposition of the closed stratum `s`.
    pub fn factors(&self, s: &Stratum) -> Vec<Factor> {
        let anchors = bits(s.inner);
        match self.kind {
            CubeKind::Plain => {
                if self.n() == 1 {
                    return vec![self.sub(CubeKind::Plain, vec![0])];
                }
                self.plain_factors(&anchors, s.outer)
            }
            CubeKind::Input => {
                let a = anchors[0];
                let mut out = self.plain_factors(&anchors, s.outer);
                let low: Vec<usize> = bits(s.outer).into_iter().filter(|&b| b <= a).collect();
                out.push(self.sub(CubeKind::Input, low));
                out
            }
            CubeKind::Output => {
                let b = *anchors.last().unwrap();
                let high: Vec<usize> = bits(s.outer).into_iter().filter(|&x| x >= b).collect();
                let mut out = vec![self.sub(CubeKind::Output, high)];
                out.extend(self.plain_factors(&anchors, s.outer));
                out
            }
            CubeKind::Cell => {
                let idx = bits(s.outer);
                let labels = idx.iter().map(|&b| self.labels[b].clone()).collect();
                let fixed = mask(idx.iter().enumerate().filter(|(_, &b)| s.inner >> b & 1 == 1).map(|(k, _)| k));
                vec![Factor { cube: AdamsCube { kind: CubeKind::Cell, labels, fixed }, indices: idx }]
            }
        }
    }

    /// Restriction of a parent stratum to a factor, in the factor's indices.
    pub fn restrict_to_factor(f: &Factor, s: &Stratum) -> Stratum {
        let pick = |m: u32| mask(f.indices.iter().enumerate().filter(|(_, &b)| m >> b & 1 == 1).map(|(k, _)| k));
        Stratum { inner: pick(s.inner), outer: pick(s.outer) }
    }

    /// Brute-force check that the closed stratum `s` is isomorphic, as a
    /// graded poset, to the product of its factors.
    pub fn verify_product(&self, s: &Stratum) -> Result<(), String> {
        let fs = self.factors(s);
        let dsum: usize = fs.iter().map(|f| f.cube.dim()).sum();
        if dsum != s.dim() {
            return Err(format!("factor dimensions {dsum} != {}", s.dim()));
        }
        let below: Vec<Stratum> = self.strata().into_iter().filter(|t| t.is_face_of(s)).collect();
        let expected: usize = fs.iter().map(|f| f.cube.strata().len()).product();
        if below.len() != expected {
            return Err(format!("{} strata below, product has {expected}", below.len()));
        }
        let mut seen = std::collections::HashSet::new();
        let images: Vec<Vec<Stratum>> = below
            .iter()
            .map(|t| fs.iter().map(|f| AdamsCube::restrict_to_factor(f, t)).collect())
            .collect();
        for (t, img) in below.iter().zip(&images) {
            for (f, x) in fs.iter().zip(img) {
                if !f.cube.is_stratum(x) {
                    return Err(format!("{} does not restrict to a stratum of {}", self.stratum_label(t), f.cube.name()));
                }
            }
            let d: usize = img.iter().map(|x| x.dim()).sum();
            if d != t.dim() {
                return Err(format!("dimension not additive at {}", self.stratum_label(t)));
            }
            if !seen.insert(img.clone()) {
                return Err(format!("not injective at {}", self.stratum_label(t)));
            }
        }
        for a in 0..below.len() {
            for b in 0..below.len() {
                let lhs = below[a].is_face_of(&below[b]);
                let rhs = images[a].iter().zip(&images[b]).all(|(x, y)| x.is_face_of(y));
                if lhs != rhs {
                    return Err(format!(
                        "order mismatch between {} and {}",
                        self.stratum_label(&below[a]),
                        self.stratum_label(&below[b])
                    ));
                }
            }
        }
        Ok(())
    }

    /// Codimension-one strata with their family and factor decomposition.
    pub fn facets(&self) -> Vec<Facet> {
        let top = self.top();
        let mut out = Vec::new();
        for s in self.strata() {
            if s.dim() + 1 != top.dim() || !s.is_face_of(&top) {
                continue;
            }
            let (family, element) = if s.outer != top.outer {
                (FacetFamily::Skip, bits(top.outer & !s.outer)[0])
            } else {
                (FacetFamily::Stop, bits(s.inner & !top.inner)[0])
            };
            let factors = self.factors(&s);
            out.push(Facet { stratum: s, family, element, factors });
        }
        out.sort_by_key(|f| (f.family as u8, f.element));
        out
    }

    /// Extends a coordinate vector to all elements, with 1 at fixed ones.
    pub fn full_point(&self, r: &[Rat]) -> Vec<Rat> {
        let mut out = vec![Rat::one(); self.n()];
        for (c, x) in self.coords().into_iter().zip(r) {
            out[c] = *x;
        }
        out
    }

    pub fn check_point(&self, r: &[Rat]) -> Result<(), AdamsError> {
        if r.len() != self.dim() {
            return Err(AdamsError::Shape(format!("expected {} coordinates, got {}", self.dim(), r.len())));
        }
        if let Some(x) = r.iter().find(|x| x.is_negative() || **x > Rat::one()) {
            return Err(AdamsError::OutOfRange(format!("coordinate {} not in [0,1]", fmt_rat(x))));
        }
        Ok(())
    }

    /// The open stratum containing a point.
    pub fn point_stratum(&self, r: &[Rat]) -> Stratum {
        let p = self.full_point(r);
        Stratum {
            inner: mask((0..self.n()).filter(|&b| p[b] == Rat::one())),
            outer: mask((0..self.n()).filter(|&b| p[b] > Rat::zero())),
        }
    }

    /// `f_{I⊂J}`: the coordinates of `J∖I`.
    pub fn project(&self, s: &Stratum, r: &[Rat]) -> Vec<Rat> {
        let p = self.full_point(r);
        bits(s.outer & !s.inner).into_iter().map(|b| p[b]).collect()
    }

    /// `g_I`: the coordinates of `I∖fixed`, pushed through `phi`.
    pub fn gluing_projection(&self, inner: u32, r: &[Rat], phi: &dyn Fn(Rat) -> Ext) -> Vec<Ext> {
        let p = self.full_point(r);
        bits(inner & !self.fixed).into_iter().map(|b| phi(p[b])).collect()
    }

    /// Splits a point of the stratum `s` (coordinates on `J∖I`) into points of
    /// its factors.
    pub fn split_point(&self, s: &Stratum, x: &[Rat]) -> Vec<(Factor, Vec<Rat>)> {
        let free = bits(s.outer & !s.inner);
        let val: BTreeMap<usize, Rat> = free.into_iter().zip(x.iter().copied()).collect();
        self.factors(s)
            .into_iter()
            .map(|f| {
                let coords = f.cube.coords().into_iter().map(|c| val[&f.indices[c]]).collect();
                (f, coords)
            })
            .collect()
    }

    /// Fibre of the universal family of paths over a point: one strip for
    /// each pair of successive broken elements. Empty for a one-element cube.
    pub fn plain_fibre(&self, r: &[Rat]) -> Vec<(usize, usize)> {
        let b = bits(self.point_stratum(r).inner);
        b.windows(2).map(|w| (w[0], w[1])).collect()
    }
}

/// Boundary strata of `𝒜̄^d_K`, the cube with `d` punctures on the moving
/// boundary.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub enum MarkedFacet {
    Skip { i: usize },
    Stop { i: usize, d2: usize, d1: usize },
    Bubble { j: usize, d2: usize, d1: usize },
}

pub fn marked_dim(k: usize, d: usize) -> i64 {
    k as i64 - 2 + d as i64
}

/// Facets of `𝒜̄^d_K` for `|K| = k`, with the dimension of each.
pub fn marked_moduli_boundary(k: usize, d: usize) -> Vec<(MarkedFacet, i64)> {
    let mut out = Vec::new();
    for i in 1..k.saturating_sub(1) {
        out.push((MarkedFacet::Skip { i }, marked_dim(k - 1, d)));
    }
    for i in 0..k {
        for d1 in 0..=d {
            let d2 = d - d1;
            let (hi, lo) = (k - i, i + 1);
            // a factor on one element needs a puncture to be stable
            if (hi == 1 && d2 == 0) || (lo == 1 && d1 == 0) {
                continue;
            }
            out.push((MarkedFacet::Stop { i, d2, d1 }, marked_dim(hi, d2) + marked_dim(lo, d1)));
        }
    }
    for d1 in 2..=d {
        let d2 = d + 1 - d1;
        for j in 1..=d2 {
            out.push((MarkedFacet::Bubble { j, d2, d1 }, marked_dim(k, d2) + d1 as i64 - 2));
        }
    }
    out
}

/// One of the four maps from a pairs cell to an Adams cube.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CellMap {
    pub name: &'static str,
    pub cube: AdamsCube,
    /// Vertex of `Σ` underlying each element of the target cube.
    pub vertex: Vec<usize>,
    /// For each member of `vJ` in the domain of the map, its target elements.
    pub assign: Vec<(usize, Vec<usize>)>,
}

impl CellMap {
    /// Image of a stratum of the cell.
    pub fn on_stratum(&self, s: &Stratum) -> Stratum {
        let mut t = Stratum { inner: 0, outer: 0 };
        for (m, tgt) in &self.assign {
            if s.outer >> m & 1 == 1 {
                t.outer |= mask(tgt.iter().copied());
            }
            if s.inner >> m & 1 == 1 {
                t.inner |= mask(tgt.iter().copied());
            }
        }
        t
    }

    /// Image of a point; `p` is the full point of the cell (1 on `vI`).
    /// Each target coordinate is the largest source value landing on it.
    pub fn on_point(&self, p: &[Rat]) -> Vec<Rat> {
        let mut val = vec![Rat::zero(); self.cube.n()];
        for (m, tgt) in &self.assign {
            for &t in tgt {
                if p[*m] > val[t] {
                    val[t] = p[*m];
                }
            }
        }
        self.cube.coords().into_iter().map(|c| val[c]).collect()
    }
}

/// `μ_ou`, `max`, `min` and `μ_in` for the cell `σ_{vI⊂vJ}`, with targets
/// `𝒜̄_{J^ou_I}`, `𝒜̄_{I≥_{I0}}`, `𝒜̄_{I≤_{I0}}` and `𝒜̄_{I0^in_{J0}}`.
pub fn pairs_cell_to_adams(c: &PairsCell) -> [CellMap; 4] {
    let (i0, i) = (c.inner.first(), c.inner.last());
    let (j0, j) = (c.outer.first(), c.outer.last());
    let members = &c.outer.0;
    let pos = |v: &[Pt], p: Pt| v.iter().position(|x| *x == p).expect("prism element");

    let ou = prism_out(j, i);
    let out_map = CellMap {
        name: "mu_ou",
        cube: AdamsCube::prism(&ou),
        vertex: ou.iter().map(|p| p.vertex()).collect(),
        assign: members
            .iter()
            .enumerate()
            .filter(|(_, l)| i.is_subset(l))
            .map(|(k, l)| (k, vec![pos(&ou, Pt::Plus(Chain::max(l))), pos(&ou, Pt::Minus(Chain::min(l)))]))
            .collect(),
    };

    let between: Vec<(usize, &Chain)> =
        members.iter().enumerate().filter(|(_, l)| i0.is_subset(l) && l.is_subset(i)).collect();
    let upper = i.ge(i0.max());
    let max_map = CellMap {
        name: "max",
        cube: AdamsCube::plain_chain(&upper),
        vertex: upper.0.clone(),
        assign: between.iter().map(|(k, l)| (*k, vec![upper.position(Chain::max(l)).unwrap()])).collect(),
    };
    let lower = i.le(i0.min());
    let min_map = CellMap {
        name: "min",
        cube: AdamsCube::plain_chain(&lower),
        vertex: lower.0.clone(),
        assign: between.iter().map(|(k, l)| (*k, vec![lower.position(Chain::min(l)).unwrap()])).collect(),
    };

    let inp = prism_in(i0, j0);
    let in_map = CellMap {
        name: "mu_in",
        cube: AdamsCube::prism(&inp),
        vertex: inp.iter().map(|p| p.vertex()).collect(),
        assign: members
            .iter()
            .enumerate()
            .filter(|(_, l)| l.is_subset(i0))
            .map(|(k, l)| (k, vec![pos(&inp, Pt::Minus(Chain::max(l))), pos(&inp, Pt::Plus(Chain::min(l)))]))
            .collect(),
    };
    [out_map, max_map, min_map, in_map]
}

/// For a cell with `vI = {I}`, checks that `σ ≅ 𝒜̄_{vJ[≥]_I;ou} × 𝒜̄_{vJ[≤]_I;in}`
/// as graded posets.
pub fn singleton_product_check(c: &PairsCell) -> Result<(), String> {
    if c.inner.len() != 1 {
        return Err("inner chain is not a singleton".into());
    }
    let i = c.inner.first();
    let above = BarycentricChain(c.outer.above(i));
    let below = BarycentricChain(c.outer.below(i));
    let (ou, inn) = (AdamsCube::output(&above), AdamsCube::input(&below));
    if ou.dim() + inn.dim() != c.dim() {
        return Err(format!("dimensions {} + {} != {}", ou.dim(), inn.dim(), c.dim()));
    }
    let cell = AdamsCube::cell(c);
    let idx_above: Vec<usize> = (0..cell.n()).filter(|&k| i.is_subset(&c.outer.0[k])).collect();
    let idx_below: Vec<usize> = (0..cell.n()).filter(|&k| c.outer.0[k].is_subset(i)).collect();
    let fa = Factor { cube: ou.clone(), indices: idx_above };
    let fb = Factor { cube: inn.clone(), indices: idx_below };
    let strata = cell.strata();
    let mut seen = std::collections::HashSet::new();
    for s in &strata {
        let (x, y) = (AdamsCube::restrict_to_factor(&fa, s), AdamsCube::restrict_to_factor(&fb, s));
        if !ou.is_stratum(&x) || !inn.is_stratum(&y) || x.dim() + y.dim() != s.dim() {
            return Err(format!("bad image of {}", cell.stratum_label(s)));
        }
        seen.insert((x, y));
    }
    if seen.len() != strata.len() || seen.len() != ou.strata().len() * inn.strata().len() {
        return Err("not a bijection".into());
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Side {
    Out,
    Upper,
    In,
    Lower,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Source {
    MuOut,
    Max,
    Min,
    MuIn,
}

/// A strip component of a fibre of degenerate annuli.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Strip {
    /// Vertex labels of the two ends, smaller first.
    pub ends: (usize, usize),
    pub side: Side,
    pub source: Source,
    pub constant: bool,
    /// `"z_in"` or `"z_ou"` on the input and output strips.
    pub marked: Option<&'static str>,
    #[serde(skip)]
    gap: usize,
}

impl Strip {
    fn key(&self, n: usize) -> (u8, usize) {
        match self.side {
            Side::Out => (0, 0),
            Side::Upper => (1, n - self.gap),
            Side::In => (2, 0),
            Side::Lower => (3, self.gap),
        }
    }

    /// The strip without the factor it was pulled back from.
    pub fn shape(&self) -> ((usize, usize), Side, bool, Option<&'static str>) {
        (self.ends, self.side, self.constant, self.marked)
    }
}

/// Components of a fibre, in cyclic order starting at the output strip.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct FibreDescription {
    pub cell: String,
    pub components: Vec<Strip>,
}

impl FibreDescription {
    pub fn count(&self) -> usize {
        self.components.len()
    }

    pub fn non_constant(&self) -> usize {
        self.components.iter().filter(|s| !s.constant).count()
    }

    pub fn shapes(&self) -> Vec<((usize, usize), Side, bool, Option<&'static str>)> {
        self.components.iter().map(|s| s.shape()).collect()
    }
}

fn strip(a: usize, b: usize, side: Side, source: Source, gap: usize) -> Strip {
    let marked = match side {
        Side::Out => Some("z_ou"),
        Side::In => Some("z_in"),
        _ => None,
    };
    let constant = a == b && matches!(side, Side::Upper | Side::Lower);
    Strip { ends: (a.min(b), a.max(b)), side, source, constant, marked, gap }
}

/// Strips between successive slots of a prism factor. `plus` is the side of
/// strips between two `+` slots, `minus` between two `−` slots, and `cross`
/// the marked strip joining them. `gaps[k]` is the gap index of strip `k`.
fn prism_strips(slots: &[Pt], plus: Side, minus: Side, cross: Side, source: Source, gaps: &[usize]) -> Vec<Strip> {
    slots
        .windows(2)
        .zip(gaps)
        .map(|(w, &g)| {
            let side = match (w[0], w[1]) {
                (Pt::Plus(_), Pt::Plus(_)) => plus,
                (Pt::Minus(_), Pt::Minus(_)) => minus,
                _ => cross,
            };
            strip(w[0].vertex(), w[1].vertex(), side, source, g)
        })
        .collect()
}

/// The members of `vJ` broken at a point of the cell: `vI` together with the
/// members whose coordinate equals 1.
pub fn broken_members(c: &PairsCell, r: &[Rat]) -> Vec<usize> {
    let cube = AdamsCube::cell(c);
    bits(cube.point_stratum(r).inner)
}

/// Fibre of `𝒞^∞(σ_{vI⊂vJ})` over a point of the cell, assembled from the
/// four Adams factors. Each pair of successive broken members contributes
/// one upper and one lower strip; strips whose ends agree are kept and
/// flagged constant.
pub fn degenerate_annulus_fibre(c: &PairsCell, r: &[Rat]) -> Result<FibreDescription, AdamsError> {
    let cube = AdamsCube::cell(c);
    cube.check_point(r)?;
    let b = broken_members(c, r);
    let m = &c.outer.0;
    let (i0, i) = (c.inner.first(), c.inner.last());
    let rank = |k: usize| b.iter().position(|&x| x == k).unwrap();

    let mut comps = Vec::new();

    // output factor: members containing I
    let up: Vec<usize> = b.iter().copied().filter(|&k| i.is_subset(&m[k])).collect();
    let mut slots: Vec<Pt> = up.iter().map(|&k| Pt::Plus(Chain::max(&m[k]))).collect();
    slots.extend(up.iter().rev().map(|&k| Pt::Minus(Chain::min(&m[k]))));
    let mut gaps: Vec<usize> = up.windows(2).map(|w| rank(w[0])).collect();
    gaps.push(0);
    gaps.extend(up.windows(2).rev().map(|w| rank(w[0])));
    comps.extend(prism_strips(&slots, Side::Upper, Side::Lower, Side::Out, Source::MuOut, &gaps));

    // max and min factors: members between I0 and I
    let mid: Vec<usize> = b.iter().copied().filter(|&k| i0.is_subset(&m[k]) && m[k].is_subset(i)).collect();
    for w in mid.windows(2) {
        comps.push(strip(Chain::max(&m[w[0]]), Chain::max(&m[w[1]]), Side::Upper, Source::Max, rank(w[0])));
    }
    for w in mid.windows(2) {
        comps.push(strip(Chain::min(&m[w[1]]), Chain::min(&m[w[0]]), Side::Lower, Source::Min, rank(w[0])));
    }

    // input factor: members contained in I0
    let down: Vec<usize> = b.iter().copied().filter(|&k| m[k].is_subset(i0)).collect();
    let mut slots: Vec<Pt> = down.iter().rev().map(|&k| Pt::Plus(Chain::min(&m[k]))).collect();
    slots.extend(down.iter().map(|&k| Pt::Minus(Chain::max(&m[k]))));
    let mut gaps: Vec<usize> = down.windows(2).rev().map(|w| rank(w[0])).collect();
    gaps.push(0);
    gaps.extend(down.windows(2).map(|w| rank(w[0])));
    comps.extend(prism_strips(&slots, Side::Lower, Side::Upper, Side::In, Source::MuIn, &gaps));

    let n = b.len();
    comps.sort_by_key(|s| s.key(n));
    Ok(FibreDescription { cell: c.to_string(), components: comps })
}

/// Interior sample point: all coordinates 1/2.
pub fn barycenter(c: &PairsCell) -> Vec<Rat> {
    vec![Rat::new(1, 2); c.dim()]
}

/// Point of the cell `c` lying in the open face `f`.
pub fn face_point(c: &PairsCell, f: &PairsCell) -> Vec<Rat> {
    AdamsCube::cell(c)
        .coords()
        .into_iter()
        .map(|k| {
            let l = &c.outer.0[k];
            if f.inner.contains(l) {
                Rat::one()
            } else if f.outer.contains(l) {
                Rat::new(1, 2)
            } else {
                Rat::zero()
            }
        })
        .collect()
}

/// Gluing lengths on the two sides of a degenerate annulus, one per member
/// of `vI` (labelled by its minimum on one side and its maximum on the other).
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct GluingParams {
    pub min_side: Vec<(String, Ext)>,
    pub max_side: Vec<(String, Ext)>,
}

impl GluingParams {
    pub fn sums(&self) -> (Ext, Ext) {
        let s = |v: &[(String, Ext)]| v.iter().fold(Ext::Fin(Rat::zero()), |a, (_, x)| a.add(*x));
        (s(&self.min_side), s(&self.max_side))
    }
}

pub fn equal_weights(k: usize) -> Vec<Rat> {
    vec![Rat::new(1, k as i64); k]
}

fn check_weights(w: &[Rat], k: usize, side: &'static str) -> Result<(), AdamsError> {
    if w.len() != k || w.iter().any(|x| !x.is_positive()) || w.iter().copied().sum::<Rat>() != Rat::one() {
        return Err(AdamsError::Weights(side));
    }
    Ok(())
}

/// Proportional annulus gluing function `g_k = w_k·S` on each side.
pub fn annulus_gluing(c: &PairsCell, w_min: &[Rat], w_max: &[Rat], s: Ext) -> Result<GluingParams, AdamsError> {
    let k = c.inner.len();
    check_weights(w_min, k, "min")?;
    check_weights(w_max, k, "max")?;
    if let Ext::Fin(x) = s {
        if !x.is_positive() {
            return Err(AdamsError::OutOfRange("S must be positive".into()));
        }
    }
    let label = |l: &Chain, v: usize| format!("{}@{}", l, v);
    Ok(GluingParams {
        min_side: c.inner.0.iter().zip(w_min).map(|(l, w)| (label(l, Chain::min(l)), s.scale(*w))).collect(),
        max_side: c.inner.0.iter().zip(w_max).map(|(l, w)| (label(l, Chain::max(l)), s.scale(*w))).collect(),
    })
}

/// The map induced on a neighbourhood of the face with inner chain `vI1`:
/// members of `vI` keep their annulus gluing values, members of `vI1∖vI`
/// receive `phi` of their cell coordinate.
pub fn nested_gluing(
    c: &PairsCell,
    vi1: &BarycentricChain,
    r: &[Rat],
    w_min: &[Rat],
    w_max: &[Rat],
    s: Ext,
    phi: &dyn Fn(Rat) -> Ext,
) -> Result<GluingParams, AdamsError> {
    if !c.inner.is_subset(vi1) || !vi1.is_subset(&c.outer) {
        return Err(AdamsError::Shape(format!("{vi1} does not lie between {} and {}", c.inner, c.outer)));
    }
    let cube = AdamsCube::cell(c);
    cube.check_point(r)?;
    let base = annulus_gluing(c, w_min, w_max, s)?;
    let p = cube.full_point(r);
    let mut lo: BTreeMap<usize, (String, Ext)> = BTreeMap::new();
    let mut hi: BTreeMap<usize, (String, Ext)> = BTreeMap::new();
    let pos = |l: &Chain| c.outer.0.iter().position(|x| x == l).unwrap();
    for (l, (a, b)) in c.inner.0.iter().zip(base.min_side.into_iter().zip(base.max_side)) {
        lo.insert(pos(l), a);
        hi.insert(pos(l), b);
    }
    for l in vi1.0.iter().filter(|l| !c.inner.contains(l)) {
        let v = phi(p[pos(l)]);
        lo.insert(pos(l), (format!("{}@{}", l, Chain::min(l)), v));
        hi.insert(pos(l), (format!("{}@{}", l, Chain::max(l)), v));
    }
    Ok(GluingParams { min_side: lo.into_values().collect(), max_side: hi.into_values().collect() })
}

/// Face poset of all pairs cells of an atlas.
pub fn cell_hasse(cells: &[PairsCell]) -> Hasse {
    Hasse::from_order(cells, |c| c.to_string(), |c| c.dim(), |a, b| b.has_face(a))
}
