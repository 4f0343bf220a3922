//! Formal count ledgers standing in for moduli counts, and the residuals of
//! the identities they must satisfy: the sheaf equation for the branes, the
//! chain-map property of `𝒞` and `𝒫`, `𝒫∘𝒞 ≃ ±Id`, the `A∞` relations of
//! the Floer operations and the `A∞` homomorphism equation.
//!
//! Sign conventions on the target: the dg category is read as an `A∞`
//! category through `μ¹_A(T) = (−1)^{|T|} μ¹T` and `μ²_A(S,T) = (−1)^{|T|} μ²(S,T)`,
//! and the Floer differential as a chain complex is `d(a) = (−1)^{|a|} μ¹(a)`.

use crate::affine::{Atlas, Chain};
use crate::affinoid::{twisting_cocycle, AffinoidElement, AffinoidError, MonomialUnit, TwistingCocycle};
use crate::category::{Category, Generator, Mat, SheafError, SheafMorphism, TwistedSheaf};
use crate::novikov::{BaseField, Coeff, NovikovScalar};
use crate::rat::{dot, fmt_rat, on_lattice, Rat};
use num_traits::{One, Signed, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FunctorError {
    #[error("{0}")]
    Malformed(String),
    #[error("no solution: {0}")]
    NoSolution(String),
    #[error(transparent)]
    Sheaf(#[from] SheafError),
    #[error(transparent)]
    Affinoid(#[from] AffinoidError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// An intersection point of a brane with a fibre, with its local primitive
/// `g_x` (gradient and value at the chart basepoint).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Point {
    pub label: String,
    pub degree: i64,
    #[serde(default, with = "crate::rat::vec_str", skip_serializing_if = "Vec::is_empty")]
    pub gradient: Vec<Rat>,
    #[serde(default = "Rat::zero", with = "crate::rat::as_str")]
    pub value: Rat,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VertexPoints {
    pub vertex: i64,
    pub points: Vec<Point>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntersectionJson {
    pub branes: BTreeMap<String, Vec<VertexPoints>>,
    pub floer: Vec<Generator>,
}

/// Points of each brane per vertex, and the Floer generators of the pair.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IntersectionData {
    pub branes: BTreeMap<String, Vec<Vec<Point>>>,
    pub floer: Vec<Generator>,
}

pub const SOURCE: &str = "L";
pub const TARGET: &str = "L'";

impl IntersectionData {
    pub fn from_json(j: &IntersectionJson, atlas: &Atlas) -> Result<IntersectionData, FunctorError> {
        let mut branes = BTreeMap::new();
        for (name, verts) in &j.branes {
            let mut pts = vec![Vec::new(); atlas.n_vertices()];
            for v in verts {
                let i = atlas
                    .index_of(v.vertex)
                    .ok_or_else(|| FunctorError::Malformed(format!("brane {name}: unknown vertex {}", v.vertex)))?;
                let mut seen = BTreeSet::new();
                for p in &v.points {
                    if !seen.insert(&p.label) {
                        return Err(FunctorError::Malformed(format!("brane {name}: label {} repeated", p.label)));
                    }
                    if !p.gradient.is_empty() && p.gradient.len() != atlas.dimension {
                        return Err(FunctorError::Malformed(format!("brane {name}: gradient of {} has wrong length", p.label)));
                    }
                }
                pts[i] = v.points.clone();
            }
            branes.insert(name.clone(), pts);
        }
        if !branes.contains_key(SOURCE) {
            return Err(FunctorError::Malformed(format!("missing brane {SOURCE}")));
        }
        let labels: BTreeSet<&String> = j.floer.iter().map(|g| &g.label).collect();
        if labels.len() != j.floer.len() {
            return Err(FunctorError::Malformed("Floer generator labels repeat".into()));
        }
        Ok(IntersectionData { branes, floer: j.floer.clone() })
    }

    pub fn to_json(&self, atlas: &Atlas) -> IntersectionJson {
        IntersectionJson {
            branes: self
                .branes
                .iter()
                .map(|(k, v)| {
                    let verts = v
                        .iter()
                        .enumerate()
                        .map(|(i, p)| VertexPoints { vertex: atlas.id(i), points: p.clone() })
                        .collect();
                    (k.clone(), verts)
                })
                .collect(),
            floer: self.floer.clone(),
        }
    }

    fn brane(&self, name: &str) -> Option<&Vec<Vec<Point>>> {
        if name == TARGET && !self.branes.contains_key(TARGET) {
            return self.branes.get(SOURCE);
        }
        self.branes.get(name)
    }

    fn point(&self, brane: &str, vertex: usize, label: &str) -> Option<usize> {
        self.brane(brane)?[vertex].iter().position(|p| p.label == label)
    }

    fn floer_index(&self, label: &str) -> Option<usize> {
        self.floer.iter().position(|g| g.label == label)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Strip,
    Continuation,
    Input,
    Output,
    Disc,
    #[serde(rename = "discK")]
    DiscK,
    Annulus,
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::Strip => "strip",
            Family::Continuation => "continuation",
            Family::Input => "input",
            Family::Output => "output",
            Family::Disc => "disc",
            Family::DiscK => "discK",
            Family::Annulus => "annulus",
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Labels {
    #[serde(rename = "in", default, skip_serializing_if = "Option::is_none")]
    pub input: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub floer: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inputs: Option<Vec<String>>,
}

/// One rigid count. `where` is the chain (vertex ids) for chain families.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountEntry {
    pub family: Family,
    #[serde(rename = "where", default)]
    pub chain: Vec<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub brane: Option<String>,
    pub labels: Labels,
    #[serde(with = "crate::rat::as_str")]
    pub energy: Rat,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub boundary: Option<Vec<i64>>,
    pub count: String,
}

impl CountEntry {
    pub fn brane(&self) -> &str {
        self.brane.as_deref().unwrap_or(SOURCE)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CountsJson {
    Full { intersections: IntersectionJson, entries: Vec<CountEntry> },
    Entries(Vec<CountEntry>),
}

/// A count entry resolved against the atlas and intersection data.
#[derive(Clone, Debug)]
struct Resolved {
    index: usize,
    family: Family,
    chain: Option<Chain>,
    brane: String,
    /// Point indices at `min K` and `max K`, or Floer indices for annuli.
    src: usize,
    dst: usize,
    floer: Option<usize>,
    inputs: Vec<usize>,
    coeff: Coeff,
    lambda: Rat,
    a: Vec<i64>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerFailure {
    pub index: usize,
    pub family: Family,
    pub reason: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerReport {
    pub checked: usize,
    pub failures: Vec<LedgerFailure>,
}

/// Nonzero part of one identity below the working precision.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Residual {
    pub check: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chain: Option<Vec<i64>>,
    pub generators: Vec<String>,
    #[serde(with = "crate::rat::opt_str")]
    pub valuation: Option<Rat>,
    pub defect: Vec<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FunctorReport {
    pub ledger: LedgerReport,
    pub composition_sign: i64,
    pub residuals: Vec<Residual>,
}

impl FunctorReport {
    pub fn ok(&self) -> bool {
        self.ledger.failures.is_empty() && self.residuals.is_empty()
    }
}

/// Linear combination of Floer generators.
pub type FloerVec = BTreeMap<usize, NovikovScalar>;

fn fv_add(acc: &mut FloerVec, k: usize, s: &NovikovScalar) {
    let slot = acc.entry(k).or_insert_with(|| NovikovScalar::zero(s.field()));
    *slot = slot.add(s);
    if slot.is_zero() {
        acc.remove(&k);
    }
}

fn fv_axpy(acc: &mut FloerVec, c: &NovikovScalar, x: &FloerVec) {
    for (k, v) in x {
        fv_add(acc, *k, &c.mul(v));
    }
}

fn fv_sub(a: &FloerVec, b: &FloerVec) -> FloerVec {
    let mut out = a.clone();
    for (k, v) in b {
        fv_add(&mut out, *k, &v.neg());
    }
    out
}

fn unit(field: BaseField, k: usize) -> FloerVec {
    BTreeMap::from([(k, NovikovScalar::one(field))])
}

/// `s · m` for a Novikov scalar `s`.
fn scale_morphism(m: &SheafMorphism, s: &NovikovScalar, dim: usize) -> SheafMorphism {
    let mut out = SheafMorphism::zero(m.degree);
    for (c, x) in &m.comps {
        let mut acc = Mat::zero(x.rows, x.cols, x.chart);
        for (e, k) in s.terms() {
            acc.add_scaled(x, k, &MonomialUnit { sign: 0, lambda: *e, a: vec![0; dim] });
        }
        if !acc.is_zero() {
            out.comps.insert(c.clone(), acc);
        }
    }
    out
}

fn add_into(acc: &mut Option<SheafMorphism>, m: SheafMorphism) {
    *acc = Some(match acc.take() {
        None => m,
        Some(a) => a.add(&m),
    });
}

/// Evaluation context for one atlas, intersection data and ledger.
pub struct FunctorData<'a> {
    pub atlas: &'a Atlas,
    pub data: IntersectionData,
    pub entries: Vec<CountEntry>,
    pub precision: Rat,
    /// Cocycle twisting the Floer-theoretic sheaves: the inverse of `α^v`.
    pub beta: TwistingCocycle,
    resolved: Vec<Resolved>,
    ledger: LedgerReport,
}

impl<'a> FunctorData<'a> {
    pub fn new(atlas: &'a Atlas, data: IntersectionData, entries: Vec<CountEntry>, precision: Rat) -> Result<Self, FunctorError> {
        let beta = twisting_cocycle(atlas)?.inverse();
        let mut f = FunctorData {
            atlas,
            data,
            entries,
            precision,
            beta,
            resolved: Vec::new(),
            ledger: LedgerReport::default(),
        };
        f.resolve();
        Ok(f)
    }

    pub fn from_json_str(atlas: &'a Atlas, counts: &str, intersections: Option<&str>, precision: Rat) -> Result<Self, FunctorError> {
        let (inter, entries) = match serde_json::from_str::<CountsJson>(counts)? {
            CountsJson::Full { intersections, entries } => (intersections, entries),
            CountsJson::Entries(e) => {
                let text = intersections
                    .ok_or_else(|| FunctorError::Malformed("a bare entry list needs intersection data".into()))?;
                (serde_json::from_str(text)?, e)
            }
        };
        let data = IntersectionData::from_json(&inter, atlas)?;
        FunctorData::new(atlas, data, entries, precision)
    }

    pub fn to_json(&self) -> CountsJson {
        CountsJson::Full { intersections: self.data.to_json(self.atlas), entries: self.entries.clone() }
    }

    pub fn field(&self) -> BaseField {
        self.atlas.field
    }

    fn dim(&self) -> usize {
        self.atlas.dimension
    }

    pub fn category(&self) -> Category<'a> {
        Category::new(self.atlas, self.beta.clone())
    }

    pub fn ledger_report(&self) -> &LedgerReport {
        &self.ledger
    }

    fn fdeg(&self, k: usize) -> i64 {
        self.data.floer[k].degree
    }

    fn pdeg(&self, brane: &str, v: usize, k: usize) -> i64 {
        self.data.brane(brane).unwrap()[v][k].degree
    }

    fn resolve(&mut self) {
        let mut failures = Vec::new();
        let mut resolved = Vec::new();
        for (index, e) in self.entries.iter().enumerate() {
            match self.resolve_one(index, e) {
                Ok(r) => resolved.push(r),
                Err(reason) => failures.push(LedgerFailure { index, family: e.family, reason }),
            }
        }
        self.ledger = LedgerReport { checked: self.entries.len(), failures };
        self.resolved = resolved;
    }

    fn resolve_one(&self, index: usize, e: &CountEntry) -> Result<Resolved, String> {
        let atlas = self.atlas;
        let n = self.dim();
        let coeff = self.field().parse_coeff(&e.count).map_err(|x| format!("count: {x}"))?;
        if e.energy.is_negative() {
            return Err("negative energy".into());
        }
        let d = atlas.effective_denominator();
        if !on_lattice(&e.energy, d) {
            return Err(format!("energy {} is off the lattice (1/{d})ℤ", fmt_rat(&e.energy)));
        }
        let a = e.boundary.clone().unwrap_or_else(|| vec![0; n]);
        if a.len() != n {
            return Err("boundary class has the wrong length".into());
        }
        let chain_families = matches!(e.family, Family::Strip | Family::Continuation | Family::Input | Family::Output | Family::DiscK);
        let chain = if chain_families {
            let mut v = Vec::new();
            for id in &e.chain {
                v.push(atlas.index_of(*id).ok_or_else(|| format!("unknown vertex {id}"))?);
            }
            let c = Chain::new(v);
            if c.len() != e.chain.len() || !atlas.is_chain(&c) {
                return Err(format!("{:?} is not a chain", e.chain));
            }
            Some(c)
        } else {
            if !e.chain.is_empty() {
                return Err("this family takes no chain".into());
            }
            None
        };
        let need = |x: &Option<String>, what: &str| x.clone().ok_or_else(|| format!("missing label \"{what}\""));
        let floer = |l: &str| self.data.floer_index(l).ok_or_else(|| format!("unknown Floer generator {l}"));
        let brane = e.brane().to_string();
        if self.data.brane(&brane).is_none() {
            return Err(format!("unknown brane {brane}"));
        }
        let point = |b: &str, v: usize, l: &str| {
            self.data.point(b, v, l).ok_or_else(|| format!("brane {b} has no point {l} at vertex {}", atlas.id(v)))
        };
        let filter = |lhs: i64, text: &str| if lhs == 0 { Ok(()) } else { Err(format!("degree filter: {text} = {lhs}")) };
        let mut r = Resolved {
            index,
            family: e.family,
            chain: chain.clone(),
            brane: brane.clone(),
            src: 0,
            dst: 0,
            floer: None,
            inputs: Vec::new(),
            coeff,
            lambda: e.energy,
            a,
        };
        match e.family {
            Family::Strip | Family::Continuation => {
                let c = chain.unwrap();
                if (e.family == Family::Strip) != (c.len() == 1) {
                    return Err("strips live on vertices, continuations on longer chains".into());
                }
                r.src = point(&brane, Chain::min(&c), &need(&e.labels.input, "in")?)?;
                r.dst = point(&brane, Chain::max(&c), &need(&e.labels.out, "out")?)?;
                let (dx, dy) = (self.pdeg(&brane, Chain::min(&c), r.src), self.pdeg(&brane, Chain::max(&c), r.dst));
                if e.family == Family::Strip {
                    filter(dy - dx - 1, "deg(out) − deg(in) − 1")?;
                } else {
                    filter(dy - dx + c.len() as i64 - 2, "deg(out) − deg(in) + |K| − 2")?;
                }
            }
            Family::Input => {
                let c = chain.unwrap();
                let x = floer(&need(&e.labels.floer, "floer")?)?;
                r.floer = Some(x);
                r.src = point(SOURCE, Chain::min(&c), &need(&e.labels.input, "in")?)?;
                r.dst = point(TARGET, Chain::max(&c), &need(&e.labels.out, "out")?)?;
                let lhs = self.pdeg(TARGET, Chain::max(&c), r.dst) - self.fdeg(x) - self.pdeg(SOURCE, Chain::min(&c), r.src) + c.len() as i64 - 1;
                filter(lhs, "deg(x′) − deg(x_in) − deg(x) + |K| − 1")?;
                r.brane = SOURCE.into();
            }
            Family::Output => {
                let c = chain.unwrap();
                let x = floer(&need(&e.labels.floer, "floer")?)?;
                r.floer = Some(x);
                r.src = point(SOURCE, Chain::min(&c), &need(&e.labels.input, "in")?)?;
                r.dst = point(TARGET, Chain::max(&c), &need(&e.labels.out, "out")?)?;
                let lhs = self.pdeg(SOURCE, Chain::min(&c), r.src) + self.fdeg(x) - self.pdeg(TARGET, Chain::max(&c), r.dst) + 1 - c.len() as i64;
                filter(lhs, "deg(x) + deg(x_ou) − deg(x′) + 1 − |I|")?;
                r.brane = SOURCE.into();
            }
            Family::Disc => {
                let out = floer(&need(&e.labels.out, "out")?)?;
                let ins = e.labels.inputs.clone().ok_or("missing label \"inputs\"")?;
                if ins.is_empty() {
                    return Err("a disc needs at least one input".into());
                }
                r.inputs = ins.iter().map(|l| floer(l)).collect::<Result<_, _>>()?;
                r.dst = out;
                let d = r.inputs.len() as i64;
                let sum: i64 = r.inputs.iter().map(|&k| self.fdeg(k)).sum();
                filter(self.fdeg(out) - 2 + d - sum, "deg(x₀) − 2 + d − Σdeg(x_j)")?;
            }
            Family::DiscK => {
                let c = chain.unwrap();
                let ins = e.labels.inputs.clone().ok_or("missing label \"inputs\"")?;
                if ins.is_empty() {
                    return Err("discK needs at least one input".into());
                }
                r.inputs = ins.iter().map(|l| floer(l)).collect::<Result<_, _>>()?;
                r.src = point(&brane, Chain::min(&c), &need(&e.labels.input, "in")?)?;
                r.dst = point(&brane, Chain::max(&c), &need(&e.labels.out, "out")?)?;
                let d = r.inputs.len() as i64;
                let sum: i64 = r.inputs.iter().map(|&k| self.fdeg(k)).sum();
                let lhs = self.pdeg(&brane, Chain::max(&c), r.dst) - self.pdeg(&brane, Chain::min(&c), r.src) - sum + d + c.len() as i64 - 2;
                filter(lhs, "deg(y) − deg(x) − Σdeg(a_j) + d + |K| − 2")?;
            }
            Family::Annulus => {
                r.src = floer(&need(&e.labels.input, "in")?)?;
                r.dst = floer(&need(&e.labels.out, "out")?)?;
                filter(self.fdeg(r.dst) - self.fdeg(r.src) + 1, "deg(out) − deg(in) + 1")?;
            }
        }
        Ok(r)
    }

    fn of_family(&self, f: Family) -> impl Iterator<Item = &Resolved> {
        self.resolved.iter().filter(move |r| r.family == f)
    }

    /// Sheaf of a brane: `F(i)` from its points, `F_K` from strips and
    /// continuations with the prefactor `T^{f(q_max)} z^{df − dg_y + dg_x}`.
    pub fn sheaf(&self, brane: &str) -> Result<TwistedSheaf, FunctorError> {
        let pts = self.data.brane(brane).ok_or_else(|| FunctorError::Malformed(format!("unknown brane {brane}")))?;
        let name = if brane == TARGET && !self.data.branes.contains_key(TARGET) { SOURCE } else { brane };
        let mut s = TwistedSheaf::zero(self.atlas);
        for (i, p) in pts.iter().enumerate() {
            s.modules[i] = p.iter().map(|x| Generator { label: x.label.clone(), degree: x.degree }).collect();
        }
        let n = self.dim();
        for r in self.resolved.iter().filter(|r| matches!(r.family, Family::Strip | Family::Continuation) && r.brane == name) {
            let c = r.chain.as_ref().unwrap();
            let (lo, hi) = (Chain::min(&c), Chain::max(&c));
            let mut u = MonomialUnit { sign: 0, lambda: r.lambda, a: r.a.clone() };
            if c.len() >= 2 {
                let f = self.atlas.section(lo, hi);
                let gx = &pts[lo][r.src].gradient;
                let gy = &pts[hi][r.dst].gradient;
                let mut z = Vec::with_capacity(n);
                for t in 0..n {
                    let v = f.gradient[t] - gy.get(t).copied().unwrap_or_else(Rat::zero) + gx.get(t).copied().unwrap_or_else(Rat::zero);
                    if !v.is_integer() {
                        return Err(FunctorError::Malformed(format!(
                            "entry {}: prefactor exponent df − dg_y + dg_x is not integral",
                            r.index
                        )));
                    }
                    z.push(v.to_integer());
                }
                u = u.mul(&MonomialUnit { sign: 0, lambda: f.value, a: z });
            }
            let m = s
                .maps
                .entry(c.clone())
                .or_insert_with(|| Mat::zero(pts[hi].len(), pts[lo].len(), hi));
            let mut x = m.get(r.dst, r.src).cloned().unwrap_or_else(|| AffinoidElement::zero(self.field(), hi));
            x.add_scaled(&AffinoidElement::constant(hi, self.field().one(), n), &r.coeff, u.lambda, &u.a);
            m.set(r.dst, r.src, x);
        }
        s.maps.retain(|_, m| !m.is_zero());
        s.check(self.atlas)?;
        Ok(s)
    }

    fn entry_morphism<'b>(&self, it: impl Iterator<Item = &'b Resolved>, degree: i64, src: &str, dst: &str) -> SheafMorphism {
        let (ps, pd) = (self.data.brane(src).unwrap(), self.data.brane(dst).unwrap());
        let mut out = SheafMorphism::zero(degree);
        for r in it {
            let c = r.chain.as_ref().unwrap();
            let m = out
                .comps
                .entry(c.clone())
                .or_insert_with(|| Mat::zero(pd[Chain::max(&c)].len(), ps[Chain::min(&c)].len(), Chain::max(&c)));
            let mut x = m.get(r.dst, r.src).cloned().unwrap_or_else(|| AffinoidElement::zero(self.field(), Chain::max(&c)));
            x.add_scaled(&AffinoidElement::constant(Chain::max(&c), self.field().one(), self.dim()), &r.coeff, r.lambda, &r.a);
            m.set(r.dst, r.src, x);
        }
        out.comps.retain(|_, m| !m.is_zero());
        out
    }

    /// `𝒞(x_in)` as a morphism `F(L) → F(L′)`.
    pub fn cech(&self, k: usize) -> SheafMorphism {
        self.entry_morphism(self.of_family(Family::Input).filter(|r| r.floer == Some(k)), self.fdeg(k), SOURCE, TARGET)
    }

    pub fn cech_vec(&self, x: &FloerVec) -> Option<SheafMorphism> {
        let mut acc = None;
        for (k, s) in x {
            add_into(&mut acc, scale_morphism(&self.cech(*k), s, self.dim()));
        }
        acc
    }

    /// `𝒞^d(a_d, …, a_1)` on generators, an endomorphism of `F(L)`.
    pub fn cech_d(&self, args: &[usize]) -> SheafMorphism {
        let deg = args.iter().map(|&k| self.fdeg(k)).sum::<i64>() + 1 - args.len() as i64;
        self.entry_morphism(self.of_family(Family::DiscK).filter(|r| r.inputs == args && r.brane == SOURCE), deg, SOURCE, SOURCE)
    }

    /// Multilinear extension of `𝒞^d`.
    pub fn cech_d_vec(&self, args: &[FloerVec]) -> Option<SheafMorphism> {
        let mut acc = None;
        for (tuple, coeff) in expand(args, self.field()) {
            add_into(&mut acc, scale_morphism(&self.cech_d(&tuple), &coeff, self.dim()));
        }
        acc
    }

    /// `μ^d(a_d, …, a_1)` on generators.
    pub fn floer_mu(&self, args: &[usize]) -> FloerVec {
        let mut out = FloerVec::new();
        for r in self.of_family(Family::Disc).filter(|r| r.inputs == args) {
            fv_add(&mut out, r.dst, &NovikovScalar::monomial(r.coeff.clone(), r.lambda));
        }
        out
    }

    pub fn floer_mu_vec(&self, args: &[FloerVec]) -> FloerVec {
        let mut out = FloerVec::new();
        for (tuple, coeff) in expand(args, self.field()) {
            fv_axpy(&mut out, &coeff, &self.floer_mu(&tuple));
        }
        out
    }

    /// Chain-complex differential `d(a) = (−1)^{|a|} μ¹(a)`.
    pub fn floer_d(&self, x: &FloerVec) -> FloerVec {
        let mut out = FloerVec::new();
        for (k, s) in x {
            let sign = NovikovScalar::constant(self.field().sign(self.fdeg(*k)));
            fv_axpy(&mut out, &s.mul(&sign), &self.floer_mu(&[*k]));
        }
        out
    }

    /// The homotopy `h` from annulus counts.
    pub fn homotopy(&self, x: &FloerVec) -> FloerVec {
        let mut out = FloerVec::new();
        for (k, s) in x {
            for r in self.of_family(Family::Annulus).filter(|r| r.src == *k) {
                fv_add(&mut out, r.dst, &s.mul(&NovikovScalar::monomial(r.coeff.clone(), r.lambda)));
            }
        }
        out
    }

    /// `𝒫(T)`: for every output count `(x, x_ou; x′, λ, γ)` on `I`, the
    /// coefficient of `z^γ` in `T_I[x′,x]` (chart `max I`) times `count·T^λ`.
    pub fn floer_map(&self, t: &SheafMorphism) -> FloerVec {
        self.floer_map_in(t, &|c: &Chain| Chain::max(&c))
    }

    /// `𝒫(T)` read in chart `chart(I) ≥ max I`: coefficients of `T_I` are
    /// rebased and output energies shifted back by `⟨q_J − q_{max I}, γ⟩`.
    pub fn floer_map_in(&self, t: &SheafMorphism, chart: &dyn Fn(&Chain) -> usize) -> FloerVec {
        let mut out = FloerVec::new();
        for r in self.of_family(Family::Output) {
            let c = r.chain.as_ref().unwrap();
            let Some(m) = t.comps.get(c) else { continue };
            let j = chart(c);
            let shift = dot(&self.atlas.lift(Chain::max(&c), j), &r.a);
            let Some(x) = m.get(r.dst, r.src) else { continue };
            let x = x.restrict_unchecked(self.atlas, j);
            for ((l, a), k) in &x.terms {
                if *a == r.a {
                    let s = NovikovScalar::monomial(k.mul(&r.coeff), l + r.lambda - shift);
                    fv_add(&mut out, r.floer.unwrap(), &s);
                }
            }
        }
        out
    }

    pub fn composition_sign(&self) -> i64 {
        let n = self.dim() as i64;
        if (n * (n - 1) / 2) % 2 == 0 {
            1
        } else {
            -1
        }
    }

    fn fv_residual(&self, check: &str, gens: Vec<String>, x: &FloerVec) -> Option<Residual> {
        let e = self.precision;
        let mut defect = Vec::new();
        let mut val: Option<Rat> = None;
        for (k, s) in x {
            let t: Vec<(Rat, Coeff)> = s.terms().iter().filter(|t| t.0 < e).cloned().collect();
            if let Some((l, c)) = t.first() {
                val = Some(val.map_or(*l, |v| v.min(*l)));
                defect.push(format!("{}: {c}*T^{{{}}}", self.data.floer[*k].label, fmt_rat(l)));
            }
        }
        val.map(|v| Residual { check: check.into(), chain: None, generators: gens, valuation: Some(v), defect })
    }

    fn morph_residuals(&self, check: &str, gens: &[String], m: &SheafMorphism) -> Vec<Residual> {
        let e = self.precision;
        let mut out = Vec::new();
        for (c, x) in &m.comps {
            let t = x.truncate(self.atlas, e);
            if t.is_zero() {
                continue;
            }
            let defect = t.entries.iter().map(|((r, k), y)| format!("({r},{k}): {}", y.display())).collect();
            out.push(Residual {
                check: check.into(),
                chain: Some(c.iter().map(|i| self.atlas.id(i)).collect()),
                generators: gens.to_vec(),
                valuation: t.valuation(self.atlas),
                defect,
            });
        }
        out
    }

    fn label(&self, k: usize) -> String {
        self.data.floer[k].label.clone()
    }

    /// Quadratic-equation residuals of the brane sheaves.
    pub fn sheaf_residuals(&self) -> Result<Vec<Residual>, FunctorError> {
        let cat = self.category();
        let mut out = Vec::new();
        let names: Vec<&str> = if self.data.branes.contains_key(TARGET) { vec![SOURCE, TARGET] } else { vec![SOURCE] };
        for b in names {
            let s = self.sheaf(b)?;
            for f in cat.validate(&s, self.precision)?.failures {
                out.push(Residual {
                    check: format!("sheaf {b}"),
                    chain: Some(f.chain),
                    generators: vec![],
                    valuation: f.valuation,
                    defect: f.defect,
                });
            }
        }
        Ok(out)
    }

    /// `μ¹(𝒞a) − 𝒞(d a)` on a generator.
    pub fn cech_defect(&self, cat: &Category, src: &TwistedSheaf, dst: &TwistedSheaf, k: usize) -> SheafMorphism {
        let lhs = cat.mu1(&self.cech(k), src, dst);
        let rhs = self.cech_vec(&self.floer_d(&unit(self.field(), k))).unwrap_or_else(|| SheafMorphism::zero(lhs.degree));
        lhs.sub(&rhs)
    }

    /// Left minus right side of the homomorphism equation on `args = [a_d, …, a_1]`.
    pub fn functor_defect(&self, cat: &Category, s: &TwistedSheaf, args: &[usize]) -> SheafMorphism {
        let f = self.field();
        let d = args.len();
        let deg = args.iter().map(|&k| self.fdeg(k)).sum::<i64>() + 2 - d as i64;
        let mut acc = SheafMorphism::zero(deg);
        let c = self.cech_d(args);
        acc = acc.add(&cat.mu1(&c, s, s).scaled(&f.sign(c.degree)));
        for d1 in 1..d {
            let hi = self.cech_d(&args[..d - d1]);
            let lo = self.cech_d(&args[d - d1..]);
            acc = acc.add(&cat.mu2(&hi, &lo).scaled(&f.sign(lo.degree)));
        }
        for d1 in 1..=d {
            for j in 0..=d - d1 {
                let inner = self.floer_mu_vec(&args[d - j - d1..d - j].iter().map(|&k| unit(f, k)).collect::<Vec<_>>());
                if inner.is_empty() {
                    continue;
                }
                let mut outer: Vec<FloerVec> = args[..d - j - d1].iter().map(|&k| unit(f, k)).collect();
                outer.push(inner);
                outer.extend(args[d - j..].iter().map(|&k| unit(f, k)));
                if let Some(m) = self.cech_d_vec(&outer) {
                    acc = acc.sub(&m.scaled(&f.sign(self.maltese(args, j))));
                }
            }
        }
        acc
    }

    /// `μ¹(𝒞a) − 𝒞(d a)` for every generator `a`.
    pub fn cech_residuals(&self) -> Result<Vec<Residual>, FunctorError> {
        let cat = self.category();
        let (src, dst) = (self.sheaf(SOURCE)?, self.sheaf(TARGET)?);
        let per: Vec<Vec<Residual>> = (0..self.data.floer.len())
            .into_par_iter()
            .map(|k| {
                self.morph_residuals("cech chain map", &[self.label(k)], &self.cech_defect(&cat, &src, &dst, k))
            })
            .collect();
        Ok(per.into_iter().flatten().collect())
    }

    /// Probe morphisms `z^γ e_{x′x}` on every chain, for the classes γ
    /// appearing in output counts and γ = 0.
    pub fn probes(&self) -> Result<Vec<(Chain, usize, usize, Vec<i64>, SheafMorphism)>, FunctorError> {
        let (src, dst) = (self.sheaf(SOURCE)?, self.sheaf(TARGET)?);
        let mut classes: BTreeSet<Vec<i64>> = self.of_family(Family::Output).map(|r| r.a.clone()).collect();
        classes.insert(vec![0; self.dim()]);
        let mut out = Vec::new();
        for c in self.atlas.all_chains() {
            for (r, y) in dst.modules[Chain::max(&c)].iter().enumerate() {
                for (k, x) in src.modules[Chain::min(&c)].iter().enumerate() {
                    for g in &classes {
                        let mut m = Mat::zero(dst.rank(Chain::max(&c)), src.rank(Chain::min(&c)), Chain::max(&c));
                        m.set(r, k, AffinoidElement::monomial(Chain::max(&c), self.field().one(), Rat::zero(), g.clone()));
                        let mut t = SheafMorphism::zero(y.degree - x.degree + c.len() as i64 - 1);
                        t.comps.insert(c.clone(), m);
                        out.push((c.clone(), k, r, g.clone(), t));
                    }
                }
            }
        }
        Ok(out)
    }

    /// `d(𝒫T) − 𝒫(μ¹T)` on every probe, keyed by the probe chain.
    pub fn floer_map_residuals(&self) -> Result<Vec<Residual>, FunctorError> {
        let cat = self.category();
        let (src, dst) = (self.sheaf(SOURCE)?, self.sheaf(TARGET)?);
        let probes = self.probes()?;
        let per: Vec<Option<Residual>> = probes
            .par_iter()
            .map(|(c, k, r, g, t)| {
                let lhs = self.floer_d(&self.floer_map(t));
                let rhs = self.floer_map(&cat.mu1(t, &src, &dst));
                let gens = vec![
                    src.modules[Chain::min(&c)][*k].label.clone(),
                    dst.modules[Chain::max(&c)][*r].label.clone(),
                    format!("z^{g:?}"),
                ];
                self.fv_residual("floer map chain map", gens, &fv_sub(&lhs, &rhs)).map(|mut x| {
                    x.chain = Some(c.iter().map(|i| self.atlas.id(i)).collect());
                    x
                })
            })
            .collect();
        Ok(per.into_iter().flatten().collect())
    }

    /// `𝒫(𝒞x) − s·x − (d h + h d)(x)` with `s = (−1)^{n(n−1)/2}`.
    pub fn composition_residuals(&self, sign: i64) -> Vec<Residual> {
        let f = self.field();
        let mut out = Vec::new();
        for k in 0..self.data.floer.len() {
            let x = unit(f, k);
            let mut defect = self.floer_map(&self.cech(k));
            fv_add(&mut defect, k, &NovikovScalar::constant(f.from_i64(-sign)));
            let dh = self.floer_d(&self.homotopy(&x));
            let hd = self.homotopy(&self.floer_d(&x));
            defect = fv_sub(&fv_sub(&defect, &dh), &hd);
            out.extend(self.fv_residual("composition", vec![self.label(k)], &defect));
        }
        out
    }

    /// `A∞` relations `Σ (−1)^{✠_j} μ^{d2}(…, μ^{d1}(…), a_j, …, a_1) = 0` for `d ≤ max_d`.
    pub fn ainfty_relations(&self, max_d: usize) -> Vec<Residual> {
        let f = self.field();
        let g = self.data.floer.len();
        let mut tuples = Vec::new();
        for d in 1..=max_d {
            tuples.extend(all_tuples(g, d));
        }
        let per: Vec<Option<Residual>> = tuples
            .par_iter()
            .map(|args| {
                let d = args.len();
                let mut acc = FloerVec::new();
                for d1 in 1..=d {
                    for j in 0..=d - d1 {
                        let inner_args: Vec<FloerVec> = args[d - j - d1..d - j].iter().map(|&k| unit(f, k)).collect();
                        let inner = self.floer_mu_vec(&inner_args);
                        if inner.is_empty() {
                            continue;
                        }
                        let mut outer: Vec<FloerVec> = args[..d - j - d1].iter().map(|&k| unit(f, k)).collect();
                        outer.push(inner);
                        outer.extend(args[d - j..].iter().map(|&k| unit(f, k)));
                        let sign = NovikovScalar::constant(f.sign(self.maltese(args, j)));
                        fv_axpy(&mut acc, &sign, &self.floer_mu_vec(&outer));
                    }
                }
                self.fv_residual(&format!("A∞ relation d={d}"), args.iter().map(|&k| self.label(k)).collect(), &acc)
            })
            .collect();
        per.into_iter().flatten().collect()
    }

    /// `✠_j = Σ_{i ≤ j} |a_i| − j` with `args = [a_d, …, a_1]`.
    fn maltese(&self, args: &[usize], j: usize) -> i64 {
        let d = args.len();
        (1..=j).map(|i| self.fdeg(args[d - i])).sum::<i64>() - j as i64
    }

    /// The `A∞` homomorphism equation for `d ≤ max_d`:
    /// `μ¹_A 𝒞^d(a) + Σ μ²_A(𝒞^{d2}(…), 𝒞^{d1}(…)) − Σ (−1)^{✠_j} 𝒞(…, μ^{d1}(…), …)`.
    pub fn ainfty_functor_residuals(&self, max_d: usize) -> Result<Vec<Residual>, FunctorError> {
        let cat = self.category();
        let s = self.sheaf(SOURCE)?;
        let g = self.data.floer.len();
        let mut tuples = Vec::new();
        for d in 1..=max_d {
            tuples.extend(all_tuples(g, d));
        }
        let per: Vec<Vec<Residual>> = tuples
            .par_iter()
            .map(|args| {
                let d = args.len();
                let acc = self.functor_defect(&cat, &s, args);
                let gens: Vec<String> = args.iter().map(|&k| self.label(k)).collect();
                self.morph_residuals(&format!("A∞ functor d={d}"), &gens, &acc)
            })
            .collect();
        Ok(per.into_iter().flatten().collect())
    }

    /// Every check at once.
    pub fn check_all(&self, sign: i64) -> Result<FunctorReport, FunctorError> {
        let mut residuals = self.sheaf_residuals()?;
        residuals.extend(self.cech_residuals()?);
        residuals.extend(self.floer_map_residuals()?);
        residuals.extend(self.composition_residuals(sign));
        residuals.extend(self.ainfty_relations(3));
        residuals.extend(self.ainfty_functor_residuals(2)?);
        Ok(FunctorReport { ledger: self.ledger.clone(), composition_sign: sign, residuals })
    }
}

fn all_tuples(g: usize, d: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for _ in 0..d {
        out = out
            .into_iter()
            .flat_map(|t| (0..g).map(move |k| {
                let mut v = t.clone();
                v.push(k);
                v
            }))
            .collect();
    }
    out
}

/// Expands a tuple of linear combinations into generator tuples with coefficients.
fn expand(args: &[FloerVec], field: BaseField) -> Vec<(Vec<usize>, NovikovScalar)> {
    let mut out = vec![(Vec::new(), NovikovScalar::one(field))];
    for a in args {
        let mut next = Vec::new();
        for (t, c) in &out {
            for (k, s) in a {
                let mut v = t.clone();
                v.push(*k);
                next.push((v, c.mul(s)));
            }
        }
        out = next;
    }
    out
}

/// Dense linear algebra over `ℚ` for the synthetic ledgers.
mod linalg {
    use crate::rat::Rat;
    use num_traits::Zero;

    /// Reduced row echelon form; returns pivot columns.
    pub fn rref(m: &mut [Vec<Rat>]) -> Vec<usize> {
        let cols = m.first().map_or(0, |r| r.len());
        let mut pivots = Vec::new();
        let mut row = 0;
        for c in 0..cols {
            let Some(p) = (row..m.len()).find(|&r| !m[r][c].is_zero()) else { continue };
            m.swap(row, p);
            let inv = m[row][c].recip();
            for x in m[row].iter_mut() {
                *x *= inv;
            }
            for r in 0..m.len() {
                if r != row && !m[r][c].is_zero() {
                    let f = m[r][c];
                    let src = m[row].clone();
                    for (x, y) in m[r].iter_mut().zip(&src) {
                        *x -= f * y;
                    }
                }
            }
            pivots.push(c);
            row += 1;
        }
        pivots
    }

    pub fn kernel(m: &[Vec<Rat>], cols: usize) -> Vec<Vec<Rat>> {
        let mut a = m.to_vec();
        let piv = rref(&mut a);
        let mut out = Vec::new();
        for free in (0..cols).filter(|c| !piv.contains(c)) {
            let mut v = vec![Rat::zero(); cols];
            v[free] = Rat::from_integer(1);
            for (r, &p) in piv.iter().enumerate() {
                v[p] = -a[r][free];
            }
            out.push(v);
        }
        out
    }

    pub fn rank(vs: &[Vec<Rat>]) -> usize {
        let mut a = vs.to_vec();
        rref(&mut a).len()
    }

    /// Some `x` with `A x = b`, free variables zero.
    pub fn solve(a: &[Vec<Rat>], b: &[Rat], cols: usize) -> Option<Vec<Rat>> {
        let mut m: Vec<Vec<Rat>> = a.iter().zip(b).map(|(r, y)| r.iter().copied().chain([*y]).collect()).collect();
        let piv = rref(&mut m);
        if piv.contains(&cols) {
            return None;
        }
        let mut x = vec![Rat::zero(); cols];
        for (r, &p) in piv.iter().enumerate() {
            x[p] = m[r][cols];
        }
        Some(x)
    }
}

/// Constant cochains of the structure sheaf: the degree-`t` part lives on
/// chains of length `t+1`.
struct ConstantComplex<'c, 'a> {
    cat: &'c Category<'a>,
    sheaf: TwistedSheaf,
    by_degree: BTreeMap<i64, Vec<Chain>>,
}

impl<'c, 'a> ConstantComplex<'c, 'a> {
    fn new(cat: &'c Category<'a>, sheaf: TwistedSheaf) -> Self {
        let mut by_degree: BTreeMap<i64, Vec<Chain>> = BTreeMap::new();
        for c in &cat.chains {
            by_degree.entry(c.len() as i64 - 1).or_default().push(c.clone());
        }
        ConstantComplex { cat, sheaf, by_degree }
    }

    fn chains(&self, t: i64) -> &[Chain] {
        self.by_degree.get(&t).map_or(&[], |v| v.as_slice())
    }

    fn morphism(&self, t: i64, v: &[Rat]) -> SheafMorphism {
        let f = self.cat.atlas.field;
        let n = self.cat.atlas.dimension;
        let mut m = SheafMorphism::zero(t);
        for (c, x) in self.chains(t).iter().zip(v) {
            if !x.is_zero() {
                let mut a = Mat::zero(1, 1, Chain::max(&c));
                a.set(0, 0, AffinoidElement::constant(Chain::max(&c), f.from_rat(x), n));
                m.comps.insert(c.clone(), a);
            }
        }
        m
    }

    fn vector(&self, m: &SheafMorphism) -> Result<Vec<Rat>, FunctorError> {
        let zero = vec![0; self.cat.atlas.dimension];
        let mut out = Vec::new();
        for c in self.chains(m.degree) {
            let mut v = Rat::zero();
            if let Some(x) = m.comps.get(c).and_then(|a| a.get(0, 0)) {
                for ((l, a), k) in &x.terms {
                    if !l.is_zero() || *a != zero {
                        return Err(FunctorError::NoSolution("cochain is not constant".into()));
                    }
                    v = coeff_rat(k)?;
                }
            }
            out.push(v);
        }
        Ok(out)
    }

    /// Columns are `d` of the unit cochains.
    fn differential(&self, t: i64) -> Result<Vec<Vec<Rat>>, FunctorError> {
        let (src, dst) = (self.chains(t).len(), self.chains(t + 1).len());
        let mut m = vec![vec![Rat::zero(); src]; dst];
        for c in 0..src {
            let mut e = vec![Rat::zero(); src];
            e[c] = Rat::one();
            let d = self.cat.mu1(&self.morphism(t, &e), &self.sheaf, &self.sheaf);
            for (r, x) in self.vector(&d)?.into_iter().enumerate() {
                m[r][c] = x;
            }
        }
        Ok(m)
    }
}

fn coeff_rat(c: &Coeff) -> Result<Rat, FunctorError> {
    match c {
        Coeff::Q(x) => {
            let n: i64 = x.numer().try_into().map_err(|_| FunctorError::NoSolution("coefficient overflow".into()))?;
            let d: i64 = x.denom().try_into().map_err(|_| FunctorError::NoSolution("coefficient overflow".into()))?;
            Ok(Rat::new(n, d))
        }
        _ => Err(FunctorError::NoSolution("synthetic ledgers are built over the rationals".into())),
    }
}

/// Consistent ledger for two copies of the structure sheaf on an atlas with
/// trivial twisting: Floer generators are a cohomology basis of the
/// constant cochains, `𝒞` sends them to cocycle representatives, `𝒫` to the
/// dual cycles times `sign`, `μ²` is the induced product and `𝒞²` solves the
/// degree-2 homomorphism equation.
pub fn identity_ledger(atlas: &Atlas, sign: i64) -> Result<(IntersectionData, Vec<CountEntry>), FunctorError> {
    let alpha = twisting_cocycle(atlas)?;
    if !alpha.is_trivial() {
        return Err(FunctorError::NoSolution("identity ledgers need a trivial twisting cocycle".into()));
    }
    let f = atlas.field;
    let n = atlas.dimension;
    let cat = Category::new(atlas, alpha.inverse());
    let pts: Vec<Vec<Point>> = (0..atlas.n_vertices())
        .map(|i| vec![Point { label: format!("p{}", atlas.id(i)), degree: 0, gradient: vec![], value: Rat::zero() }])
        .collect();
    let mut structure = TwistedSheaf::zero(atlas);
    for i in 0..atlas.n_vertices() {
        structure.modules[i] = vec![Generator { label: pts[i][0].label.clone(), degree: 0 }];
    }
    for c in atlas.chains(2).into_iter().filter(|c| c.len() == 2) {
        let mut m = Mat::zero(1, 1, Chain::max(&c));
        m.set(0, 0, AffinoidElement::constant(Chain::max(&c), f.one(), n));
        structure.maps.insert(c, m);
    }
    let cx = ConstantComplex::new(&cat, structure);
    let top = cx.by_degree.keys().copied().max().unwrap_or(0);

    // Cohomology basis and dual functionals per degree.
    let mut floer = Vec::new();
    let mut reps: Vec<(i64, Vec<Rat>, Vec<Rat>)> = Vec::new();
    for t in 0..=top {
        let dim = cx.chains(t).len();
        let d_t = cx.differential(t)?;
        let z = linalg::kernel(&d_t, dim);
        let b: Vec<Vec<Rat>> = if t > 0 {
            let d_prev = cx.differential(t - 1)?;
            let cols = cx.chains(t - 1).len();
            (0..cols).map(|c| d_prev.iter().map(|row| row[c]).collect()).collect()
        } else {
            Vec::new()
        };
        let mut basis: Vec<Vec<Rat>> = b.iter().filter(|v| v.iter().any(|x| !x.is_zero())).cloned().collect();
        let rb = linalg::rank(&basis);
        let mut span = rb;
        basis = {
            let mut a = basis.clone();
            let piv = linalg::rref(&mut a);
            a.truncate(piv.len());
            a
        };
        let mut zs = Vec::new();
        for v in z {
            let mut test = basis.clone();
            test.extend(zs.iter().cloned());
            test.push(v.clone());
            if linalg::rank(&test) > span {
                span += 1;
                zs.push(v);
            }
        }
        for (k, zk) in zs.iter().enumerate() {
            let mut rows = basis.clone();
            rows.extend(zs.iter().cloned());
            let mut rhs = vec![Rat::zero(); basis.len()];
            rhs.extend((0..zs.len()).map(|l| if l == k { Rat::one() } else { Rat::zero() }));
            let p = linalg::solve(&rows, &rhs, dim).ok_or_else(|| FunctorError::NoSolution("dual cycle".into()))?;
            let label = if zs.len() == 1 { format!("h{t}") } else { format!("h{t}_{k}") };
            floer.push(Generator { label, degree: t });
            reps.push((t, zk.clone(), p));
        }
    }
    let data = IntersectionData {
        branes: BTreeMap::from([(SOURCE.to_string(), pts.clone()), (TARGET.to_string(), pts.clone())]),
        floer: floer.clone(),
    };

    let ids = |c: &Chain| -> Vec<i64> { c.iter().map(|i| atlas.id(i)).collect() };
    let lbl = |i: usize| pts[i][0].label.clone();
    let rat_str = |x: &Rat| fmt_rat(x);
    let zero_class = Some(vec![0; n]);
    let mut entries = Vec::new();
    for brane in [SOURCE, TARGET] {
        for c in atlas.chains(2).into_iter().filter(|c| c.len() == 2) {
            entries.push(CountEntry {
                family: Family::Continuation,
                chain: ids(&c),
                brane: Some(brane.into()),
                labels: Labels { input: Some(lbl(Chain::min(&c))), out: Some(lbl(Chain::max(&c))), ..Labels::default() },
                energy: Rat::zero(),
                boundary: zero_class.clone(),
                count: "1".into(),
            });
        }
    }
    for (k, (t, z, p)) in reps.iter().enumerate() {
        for (c, x) in cx.chains(*t).iter().zip(z) {
            if x.is_zero() {
                continue;
            }
            let labels = Labels { input: Some(lbl(Chain::min(&c))), out: Some(lbl(Chain::max(&c))), floer: Some(floer[k].label.clone()), inputs: None };
            entries.push(CountEntry {
                family: Family::Input,
                chain: ids(c),
                brane: None,
                labels: labels.clone(),
                energy: Rat::zero(),
                boundary: zero_class.clone(),
                count: rat_str(x),
            });
            entries.push(CountEntry {
                family: Family::DiscK,
                chain: ids(c),
                brane: Some(SOURCE.into()),
                labels: Labels { floer: None, inputs: Some(vec![floer[k].label.clone()]), ..labels },
                energy: Rat::zero(),
                boundary: zero_class.clone(),
                count: rat_str(x),
            });
        }
        for (c, x) in cx.chains(*t).iter().zip(p) {
            if x.is_zero() {
                continue;
            }
            entries.push(CountEntry {
                family: Family::Output,
                chain: ids(c),
                brane: None,
                labels: Labels { input: Some(lbl(Chain::min(&c))), out: Some(lbl(Chain::max(&c))), floer: Some(floer[k].label.clone()), inputs: None },
                energy: Rat::zero(),
                boundary: zero_class.clone(),
                count: rat_str(&(*x * Rat::from_integer(sign))),
            });
        }
    }

    // Products and the second component of the functor.
    let maximal: BTreeSet<Chain> = cat
        .chains
        .iter()
        .filter(|c| !cat.chains.iter().any(|d| d.len() > c.len() && c.is_subset(d)))
        .cloned()
        .collect();
    for (k2, (t2, z2, _)) in reps.iter().enumerate() {
        for (k1, (t1, z1, _)) in reps.iter().enumerate() {
            let w = cat.mu2(&cx.morphism(*t2, z2), &cx.morphism(*t1, z1));
            let wt = t1 + t2;
            if wt > top {
                continue;
            }
            let wv = cx.vector(&SheafMorphism { degree: wt, ..w })?;
            let s1 = if t1 % 2 == 0 { Rat::one() } else { -Rat::one() };
            let mut class = vec![Rat::zero(); cx.chains(wt).len()];
            for (k, (t, z, p)) in reps.iter().enumerate() {
                if *t != wt {
                    continue;
                }
                let coord: Rat = p.iter().zip(&wv).map(|(a, b)| a * b).sum();
                if coord.is_zero() {
                    continue;
                }
                entries.push(CountEntry {
                    family: Family::Disc,
                    chain: vec![],
                    brane: None,
                    labels: Labels { out: Some(floer[k].label.clone()), inputs: Some(vec![floer[k2].label.clone(), floer[k1].label.clone()]), ..Labels::default() },
                    energy: Rat::zero(),
                    boundary: None,
                    count: rat_str(&(s1 * coord)),
                });
                for (c, x) in class.iter_mut().zip(z) {
                    *c += coord * x;
                }
            }
            // μ¹_A X = (−1)^{|a1|} (C(class) − W), i.e. d X = (−1)^{|X|+|a1|} (C(class) − W).
            let xdeg = wt - 1;
            let rhs: Vec<Rat> = class.iter().zip(&wv).map(|(a, b)| a - b).collect();
            if rhs.iter().all(|x| x.is_zero()) {
                continue;
            }
            if xdeg < 0 {
                return Err(FunctorError::NoSolution("degree-0 product is not its own representative".into()));
            }
            let sgn = if (xdeg + t1) % 2 == 0 { Rat::one() } else { -Rat::one() };
            let rhs: Vec<Rat> = rhs.iter().map(|x| sgn * x).collect();
            let d = cx.differential(xdeg)?;
            let free: Vec<usize> = (0..cx.chains(xdeg).len()).filter(|&c| !maximal.contains(&cx.chains(xdeg)[c])).collect();
            let a: Vec<Vec<Rat>> = d.iter().map(|row| free.iter().map(|&c| row[c]).collect()).collect();
            let x = linalg::solve(&a, &rhs, free.len()).ok_or_else(|| FunctorError::NoSolution("second functor component".into()))?;
            for (pos, &c) in free.iter().enumerate() {
                if x[pos].is_zero() {
                    continue;
                }
                let ch = &cx.chains(xdeg)[c];
                entries.push(CountEntry {
                    family: Family::DiscK,
                    chain: ids(ch),
                    brane: Some(SOURCE.into()),
                    labels: Labels {
                        input: Some(lbl(ch.min())),
                        out: Some(lbl(ch.max())),
                        floer: None,
                        inputs: Some(vec![floer[k2].label.clone(), floer[k1].label.clone()]),
                    },
                    energy: Rat::zero(),
                    boundary: zero_class.clone(),
                    count: rat_str(&x[pos]),
                });
            }
        }
    }
    Ok((data, entries))
}

/// `(−1)^{n(n−1)/2}`.
pub fn composition_sign_for(n: usize) -> i64 {
    let n = n as i64;
    if (n * (n - 1) / 2) % 2 == 0 {
        1
    } else {
        -1
    }
}
