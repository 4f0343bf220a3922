//! Twisted sheaves of perfect modules over the chart rings, their morphism
//! complexes with `μ¹` and `μ²`, and valuation barcodes of the cohomology.
//!
//! Structure maps and morphism components on a chain `I` are matrices over
//! `O_{max I}`; factors living on smaller charts are restricted before any
//! product. Rows are indexed by generators at `max I`, columns by generators
//! at `min I`. The source-degree sign `(−1)^{|a|}` is a column sign.

use crate::affine::{Atlas, Chain};
use crate::affinoid::{AffinoidElement, AffinoidError, MonomialUnit, TermJson, TwistingCocycle};
use crate::novikov::{BaseField, Coeff, NovikovScalar};
use crate::rat::{dot, fmt_rat, int, lcm, rat, Rat};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet, VecDeque};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SheafError {
    #[error("shape: {0}")]
    Shape(String),
    #[error("degree: {0}")]
    Degree(String),
    #[error("{0}")]
    Malformed(String),
    #[error("lattice: {0}")]
    Lattice(String),
    #[error("no monomial solution: {0}")]
    NoSolution(String),
    #[error("sheaf equation fails on {} chain(s)", .0.failures.len())]
    Invalid(SheafReport),
    #[error(transparent)]
    Affinoid(#[from] AffinoidError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Generator {
    pub label: String,
    pub degree: i64,
}

/// Sparse matrix over the chart ring of `chart`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Mat {
    pub rows: usize,
    pub cols: usize,
    pub chart: usize,
    pub entries: BTreeMap<(usize, usize), AffinoidElement>,
}

impl Mat {
    pub fn zero(rows: usize, cols: usize, chart: usize) -> Mat {
        Mat { rows, cols, chart, entries: BTreeMap::new() }
    }

    pub fn identity(n: usize, chart: usize, field: BaseField, dim: usize) -> Mat {
        let mut m = Mat::zero(n, n, chart);
        for k in 0..n {
            m.entries.insert((k, k), AffinoidElement::constant(chart, field.one(), dim));
        }
        m
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, r: usize, c: usize) -> Option<&AffinoidElement> {
        self.entries.get(&(r, c))
    }

    pub fn set(&mut self, r: usize, c: usize, e: AffinoidElement) {
        if e.is_zero() {
            self.entries.remove(&(r, c));
        } else {
            self.entries.insert((r, c), e);
        }
    }

    /// `self += c · u · o` for a monomial unit `u` in this chart.
    pub fn add_scaled(&mut self, o: &Mat, c: &Coeff, u: &MonomialUnit) {
        debug_assert_eq!((self.rows, self.cols, self.chart), (o.rows, o.cols, o.chart));
        let field = c.field();
        let coeff = c.mul(&u.coeff(field));
        for (&(r, k), e) in &o.entries {
            let slot = self.entries.entry((r, k)).or_insert_with(|| AffinoidElement::zero(field, o.chart));
            slot.add_scaled(e, &coeff, u.lambda, &u.a);
            if slot.is_zero() {
                self.entries.remove(&(r, k));
            }
        }
    }

    pub fn restrict(&self, atlas: &Atlas, j: usize) -> Mat {
        if self.chart == j {
            return self.clone();
        }
        Mat {
            rows: self.rows,
            cols: self.cols,
            chart: j,
            entries: self.entries.iter().map(|(k, e)| (*k, e.restrict_unchecked(atlas, j))).collect(),
        }
    }

    /// Exact product; both factors must live in the same chart.
    pub fn mul(&self, o: &Mat) -> Mat {
        assert_eq!(self.chart, o.chart, "matrix product across charts");
        assert_eq!(self.cols, o.rows, "matrix product shape");
        let mut out = Mat::zero(self.rows, o.cols, self.chart);
        let mut by_row: BTreeMap<usize, Vec<(usize, &AffinoidElement)>> = BTreeMap::new();
        for (&(k, c), e) in &o.entries {
            by_row.entry(k).or_default().push((c, e));
        }
        for (&(r, k), a) in &self.entries {
            if let Some(row) = by_row.get(&k) {
                for &(c, b) in row {
                    let p = a.mul_exact(b);
                    let slot = out.entries.entry((r, c)).or_insert_with(|| AffinoidElement::zero(a.field, a.chart));
                    *slot = slot.add(&p).expect("same chart");
                    if slot.is_zero() {
                        out.entries.remove(&(r, c));
                    }
                }
            }
        }
        out
    }

    pub fn neg(&self) -> Mat {
        Mat { entries: self.entries.iter().map(|(k, e)| (*k, e.neg())).collect(), ..self.clone() }
    }

    pub fn sub(&self, o: &Mat) -> Mat {
        let mut out = self.clone();
        let field = self.entries.values().chain(o.entries.values()).next().map(|e| e.field);
        if let Some(f) = field {
            out.add_scaled(o, &f.from_i64(-1), &MonomialUnit::one(unit_dim(self, o)));
        }
        out
    }

    /// Multiplies column `c` by `(−1)^{degrees[c] + extra}`.
    pub fn col_signed(&self, degrees: &[i64], extra: i64) -> Mat {
        let mut out = self.clone();
        for ((_, c), e) in out.entries.iter_mut() {
            if (degrees[*c] + extra).rem_euclid(2) == 1 {
                *e = e.neg();
            }
        }
        out
    }

    pub fn truncate(&self, atlas: &Atlas, e: Rat) -> Mat {
        let mut out = Mat::zero(self.rows, self.cols, self.chart);
        for (k, x) in &self.entries {
            let y = x.truncate(atlas, Some(e));
            if !y.is_zero() {
                out.entries.insert(*k, y);
            }
        }
        out
    }

    pub fn vanishes_below(&self, atlas: &Atlas, e: Rat) -> bool {
        self.entries.values().all(|x| x.vanishes_below(atlas, e))
    }

    pub fn valuation(&self, atlas: &Atlas) -> Option<Rat> {
        self.entries.values().filter_map(|x| x.valuation(atlas)).min()
    }
}

fn unit_dim(a: &Mat, b: &Mat) -> usize {
    a.entries
        .values()
        .chain(b.entries.values())
        .flat_map(|e| e.terms.keys())
        .map(|k| k.1.len())
        .next()
        .unwrap_or(0)
}

/// Matrix JSON: rows of entries, each entry a list of terms.
pub type MatJson = Vec<Vec<Vec<TermJson>>>;

fn mat_to_json(m: &Mat, atlas: &Atlas) -> MatJson {
    (0..m.rows)
        .map(|r| {
            (0..m.cols)
                .map(|c| m.get(r, c).map(|e| e.to_json(atlas).terms).unwrap_or_default())
                .collect()
        })
        .collect()
}

fn mat_from_json(j: &MatJson, rows: usize, cols: usize, chart: usize, atlas: &Atlas, what: &str) -> Result<Mat, SheafError> {
    if j.len() != rows || j.iter().any(|r| r.len() != cols) {
        return Err(SheafError::Shape(format!("{what}: expected a {rows}×{cols} matrix")));
    }
    let mut m = Mat::zero(rows, cols, chart);
    for (r, row) in j.iter().enumerate() {
        for (c, terms) in row.iter().enumerate() {
            let e = AffinoidElement::from_terms_json(terms, chart, None, atlas)?;
            m.set(r, c, e);
        }
    }
    Ok(m)
}

/// Graded free modules at the vertices and structure maps on chains.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TwistedSheaf {
    pub modules: Vec<Vec<Generator>>,
    pub maps: BTreeMap<Chain, Mat>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModuleJson {
    pub vertex: i64,
    pub generators: Vec<Generator>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MapJson {
    pub chain: Vec<i64>,
    pub matrix: MatJson,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SheafJson {
    pub modules: Vec<ModuleJson>,
    #[serde(default)]
    pub maps: Vec<MapJson>,
}

fn chain_from_ids(ids: &[i64], atlas: &Atlas) -> Result<Chain, SheafError> {
    let mut v = Vec::new();
    for id in ids {
        v.push(atlas.index_of(*id).ok_or_else(|| SheafError::Malformed(format!("unknown vertex {id}")))?);
    }
    let c = Chain::new(v);
    if c.len() != ids.len() || !atlas.is_chain(&c) {
        return Err(SheafError::Malformed(format!("{ids:?} is not a chain of the atlas")));
    }
    Ok(c)
}

fn ids(atlas: &Atlas, c: &Chain) -> Vec<i64> {
    c.iter().map(|i| atlas.id(i)).collect()
}

impl TwistedSheaf {
    pub fn zero(atlas: &Atlas) -> TwistedSheaf {
        TwistedSheaf { modules: vec![Vec::new(); atlas.n_vertices()], maps: BTreeMap::new() }
    }

    pub fn rank(&self, i: usize) -> usize {
        self.modules[i].len()
    }

    pub fn degrees(&self, i: usize) -> Vec<i64> {
        self.modules[i].iter().map(|g| g.degree).collect()
    }

    pub fn map(&self, c: &Chain) -> Option<&Mat> {
        self.maps.get(c)
    }

    /// Shapes, charts and degree bookkeeping: `deg(row) = deg(col) + 2 − |I|`.
    pub fn check(&self, atlas: &Atlas) -> Result<(), SheafError> {
        if self.modules.len() != atlas.n_vertices() {
            return Err(SheafError::Shape(format!("{} modules for {} vertices", self.modules.len(), atlas.n_vertices())));
        }
        for (c, m) in &self.maps {
            let name = atlas.label(c);
            if !atlas.is_chain(c) {
                return Err(SheafError::Malformed(format!("{name} is not a chain")));
            }
            if m.chart != c.max() || m.rows != self.rank(c.max()) || m.cols != self.rank(c.min()) {
                return Err(SheafError::Shape(format!("structure map on {name}")));
            }
            let (dr, dc) = (self.degrees(c.max()), self.degrees(c.min()));
            for &(r, k) in m.entries.keys() {
                if dr[r] != dc[k] + 2 - c.len() as i64 {
                    return Err(SheafError::Degree(format!(
                        "structure map on {name}: entry ({r},{k}) joins degrees {} and {}",
                        dc[k], dr[r]
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn to_json(&self, atlas: &Atlas) -> SheafJson {
        SheafJson {
            modules: self
                .modules
                .iter()
                .enumerate()
                .map(|(i, g)| ModuleJson { vertex: atlas.id(i), generators: g.clone() })
                .collect(),
            maps: self
                .maps
                .iter()
                .filter(|(_, m)| !m.is_zero())
                .map(|(c, m)| MapJson { chain: ids(atlas, c), matrix: mat_to_json(m, atlas) })
                .collect(),
        }
    }

    pub fn from_json(j: &SheafJson, atlas: &Atlas) -> Result<TwistedSheaf, SheafError> {
        let mut s = TwistedSheaf::zero(atlas);
        let mut seen = BTreeSet::new();
        for m in &j.modules {
            let i = atlas
                .index_of(m.vertex)
                .ok_or_else(|| SheafError::Malformed(format!("unknown vertex {}", m.vertex)))?;
            if !seen.insert(i) {
                return Err(SheafError::Malformed(format!("vertex {} listed twice", m.vertex)));
            }
            s.modules[i] = m.generators.clone();
        }
        for m in &j.maps {
            let c = chain_from_ids(&m.chain, atlas)?;
            let what = format!("map {:?}", m.chain);
            let mat = mat_from_json(&m.matrix, s.rank(Chain::max(&c)), s.rank(Chain::min(&c)), Chain::max(&c), atlas, &what)?;
            if s.maps.insert(c, mat).is_some() {
                return Err(SheafError::Malformed(format!("{what} listed twice")));
            }
        }
        s.check(atlas)?;
        Ok(s)
    }

    pub fn from_json_str(text: &str, atlas: &Atlas) -> Result<TwistedSheaf, SheafError> {
        let j: SheafJson = serde_json::from_str(text)?;
        TwistedSheaf::from_json(&j, atlas)
    }

    /// Renames and reorders the generators at every vertex by `perm[i]`,
    /// where `perm[i][new] = old`.
    pub fn permuted(&self, perm: &[Vec<usize>]) -> TwistedSheaf {
        let inv: Vec<Vec<usize>> = perm
            .iter()
            .map(|p| {
                let mut v = vec![0; p.len()];
                for (new, &old) in p.iter().enumerate() {
                    v[old] = new;
                }
                v
            })
            .collect();
        TwistedSheaf {
            modules: perm.iter().enumerate().map(|(i, p)| p.iter().map(|&o| self.modules[i][o].clone()).collect()).collect(),
            maps: self
                .maps
                .iter()
                .map(|(c, m)| {
                    let mut out = Mat::zero(m.rows, m.cols, m.chart);
                    for (&(r, k), e) in &m.entries {
                        out.entries.insert((inv[c.max()][r], inv[c.min()][k]), e.clone());
                    }
                    (c.clone(), out)
                })
                .collect(),
        }
    }
}

/// A morphism of degree `degree` with components `T_I`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SheafMorphism {
    pub degree: i64,
    pub comps: BTreeMap<Chain, Mat>,
}

impl SheafMorphism {
    pub fn zero(degree: i64) -> SheafMorphism {
        SheafMorphism { degree, comps: BTreeMap::new() }
    }

    pub fn is_zero(&self) -> bool {
        self.comps.values().all(|m| m.is_zero())
    }

    /// Degree bookkeeping: `deg(row) − deg(col) = t + 1 − |I|`.
    pub fn check(&self, src: &TwistedSheaf, dst: &TwistedSheaf, atlas: &Atlas) -> Result<(), SheafError> {
        for (c, m) in &self.comps {
            let name = atlas.label(c);
            if m.chart != c.max() || m.rows != dst.rank(c.max()) || m.cols != src.rank(c.min()) {
                return Err(SheafError::Shape(format!("morphism component on {name}")));
            }
            let (dr, dc) = (dst.degrees(c.max()), src.degrees(c.min()));
            for &(r, k) in m.entries.keys() {
                if dr[r] - dc[k] != self.degree + 1 - c.len() as i64 {
                    return Err(SheafError::Degree(format!("morphism component on {name}, entry ({r},{k})")));
                }
            }
        }
        Ok(())
    }

    pub fn truncate(&self, atlas: &Atlas, e: Rat) -> SheafMorphism {
        SheafMorphism {
            degree: self.degree,
            comps: self
                .comps
                .iter()
                .map(|(c, m)| (c.clone(), m.truncate(atlas, e)))
                .filter(|(_, m)| !m.is_zero())
                .collect(),
        }
    }

    pub fn sub(&self, o: &SheafMorphism) -> SheafMorphism {
        let mut comps = self.comps.clone();
        for (c, m) in &o.comps {
            match comps.get_mut(c) {
                Some(x) => *x = x.sub(m),
                None => {
                    comps.insert(c.clone(), m.neg());
                }
            }
        }
        comps.retain(|_, m| !m.is_zero());
        SheafMorphism { degree: self.degree, comps }
    }

    pub fn scaled(&self, c: &Coeff) -> SheafMorphism {
        let one = |m: &Mat| MonomialUnit::one(unit_dim(m, m));
        SheafMorphism {
            degree: self.degree,
            comps: self
                .comps
                .iter()
                .map(|(k, m)| {
                    let mut z = Mat::zero(m.rows, m.cols, m.chart);
                    z.add_scaled(m, c, &one(m));
                    (k.clone(), z)
                })
                .filter(|(_, m)| !m.is_zero())
                .collect(),
        }
    }

    pub fn add(&self, o: &SheafMorphism) -> SheafMorphism {
        let mut out = self.clone();
        for (c, m) in &o.comps {
            match out.comps.get_mut(c) {
                Some(x) => {
                    let neg = m.neg();
                    *x = x.sub(&neg);
                }
                None => {
                    out.comps.insert(c.clone(), m.clone());
                }
            }
        }
        out.comps.retain(|_, m| !m.is_zero());
        out
    }

    pub fn vanishes_below(&self, atlas: &Atlas, e: Rat) -> bool {
        self.comps.values().all(|m| m.vanishes_below(atlas, e))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainResidual {
    pub chain: Vec<i64>,
    #[serde(with = "crate::rat::opt_str")]
    pub valuation: Option<Rat>,
    /// Leading monomials of the nonzero entries below the precision.
    pub defect: Vec<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SheafReport {
    pub checked: usize,
    pub failures: Vec<ChainResidual>,
}

impl SheafReport {
    pub fn ok(&self) -> bool {
        self.failures.is_empty()
    }
}

fn residual_entry(atlas: &Atlas, c: &Chain, m: &Mat, e: Rat) -> Option<ChainResidual> {
    let t = m.truncate(atlas, e);
    if t.is_zero() {
        return None;
    }
    let defect = t
        .entries
        .iter()
        .map(|((r, k), x)| {
            let lead = x
                .terms
                .iter()
                .min_by_key(|(key, _)| AffinoidElement::w(atlas, x.chart, key))
                .map(|((l, a), coeff)| {
                    let z: Vec<String> = a.iter().map(|v| v.to_string()).collect();
                    format!("{coeff}*T^{{{}}}*z^{{{}}}", fmt_rat(l), z.join(","))
                })
                .unwrap_or_default();
            format!("({r},{k}): {lead}")
        })
        .collect();
    Some(ChainResidual { chain: ids(atlas, c), valuation: t.valuation(atlas), defect })
}

/// The category of sheaves twisted by a fixed cocycle.
pub struct Category<'a> {
    pub atlas: &'a Atlas,
    pub alpha: TwistingCocycle,
    pub chains: Vec<Chain>,
}

impl<'a> Category<'a> {
    pub fn new(atlas: &'a Atlas, alpha: TwistingCocycle) -> Category<'a> {
        Category { atlas, alpha, chains: atlas.all_chains() }
    }

    pub fn field(&self) -> BaseField {
        self.atlas.field
    }

    fn sign(&self, k: i64) -> Coeff {
        self.field().sign(k)
    }

    fn dim(&self) -> usize {
        self.atlas.dimension
    }

    /// `LHS − RHS` of the quadratic equation on the chain `c`, in chart `max c`:
    /// `Σ_{i interior} (−1)^{|I≤i|+|a|} F_{I∖i} − Σ_{i∈I} α_{I≥i,I≤i} F_{I≥i} F_{I≤i}`.
    pub fn quadratic_residual(&self, f: &TwistedSheaf, c: &Chain) -> Mat {
        self.quadratic_residual_in(f, c, c.max())
    }

    /// The same residual with every factor moved to a chart `j ≥ max c`.
    pub fn quadratic_residual_in(&self, f: &TwistedSheaf, c: &Chain, j: usize) -> Mat {
        let top = c.max();
        let mut acc = Mat::zero(f.rank(top), f.rank(c.min()), j);
        let src = f.degrees(c.min());
        for (pos, i) in c.iter().enumerate() {
            if pos == 0 || pos + 1 == c.len() {
                continue;
            }
            if let Some(m) = f.map(&c.without(i)) {
                let signed = m.restrict(self.atlas, j).col_signed(&src, pos as i64 + 1);
                acc.add_scaled(&signed, &self.field().one(), &MonomialUnit::one(self.dim()));
            }
        }
        for i in c.iter() {
            let (hi, lo) = (c.ge(i), c.le(i));
            if let (Some(a), Some(b)) = (f.map(&hi), f.map(&lo)) {
                let p = a.restrict(self.atlas, j).mul(&b.restrict(self.atlas, j));
                let u = self.alpha.split_factor(c, i).restrict(self.atlas, top, j);
                acc.add_scaled(&p, &self.sign(1), &u);
            }
        }
        acc
    }

    /// Checks the quadratic equation on every chain at precision `e`.
    pub fn validate(&self, f: &TwistedSheaf, e: Rat) -> Result<SheafReport, SheafError> {
        f.check(self.atlas)?;
        let failures: Vec<ChainResidual> = self
            .chains
            .par_iter()
            .filter_map(|c| residual_entry(self.atlas, c, &self.quadratic_residual(f, c), e))
            .collect();
        Ok(SheafReport { checked: self.chains.len(), failures })
    }

    pub fn identity(&self, f: &TwistedSheaf) -> SheafMorphism {
        let mut comps = BTreeMap::new();
        for i in 0..self.atlas.n_vertices() {
            if f.rank(i) > 0 {
                comps.insert(Chain(vec![i]), Mat::identity(f.rank(i), i, self.field(), self.dim()));
            }
        }
        SheafMorphism { degree: 0, comps }
    }

    /// `μ¹(T)_I = Σ_i α (F′_{I≥i} T_{I≤i} + (−1)^{1+|T|} T_{I≥i} F_{I≤i})
    ///          + Σ_{i interior} (−1)^{|I≤i|+|a|+|T|} T_{I∖i}`, computed exactly.
    pub fn mu1(&self, t: &SheafMorphism, src: &TwistedSheaf, dst: &TwistedSheaf) -> SheafMorphism {
        let comps: BTreeMap<Chain, Mat> = self
            .chains
            .par_iter()
            .map(|c| (c.clone(), self.mu1_on(t, src, dst, c, c.max())))
            .filter(|(_, m)| !m.is_zero())
            .collect();
        SheafMorphism { degree: t.degree + 1, comps }
    }

    /// The component of `μ¹(T)` on `c`, computed in chart `j ≥ max c`.
    pub fn mu1_on(&self, t: &SheafMorphism, src: &TwistedSheaf, dst: &TwistedSheaf, c: &Chain, j: usize) -> Mat {
        let top = c.max();
        let mut acc = Mat::zero(dst.rank(top), src.rank(c.min()), j);
        let one = MonomialUnit::one(self.dim());
        for i in c.iter() {
            let (hi, lo) = (c.ge(i), c.le(i));
            let u = self.alpha.split_factor(c, i).restrict(self.atlas, top, j);
            if let (Some(a), Some(b)) = (dst.map(&hi), t.comps.get(&lo)) {
                let p = a.restrict(self.atlas, j).mul(&b.restrict(self.atlas, j));
                acc.add_scaled(&p, &self.field().one(), &u);
            }
            if let (Some(a), Some(b)) = (t.comps.get(&hi), src.map(&lo)) {
                let p = a.restrict(self.atlas, j).mul(&b.restrict(self.atlas, j));
                acc.add_scaled(&p, &self.sign(1 + t.degree), &u);
            }
        }
        let cols = src.degrees(c.min());
        for (pos, i) in c.iter().enumerate() {
            if pos == 0 || pos + 1 == c.len() {
                continue;
            }
            if let Some(m) = t.comps.get(&c.without(i)) {
                let signed = m.restrict(self.atlas, j).col_signed(&cols, pos as i64 + 1 + t.degree);
                acc.add_scaled(&signed, &self.field().one(), &one);
            }
        }
        acc
    }

    /// `μ²(S,T)_I = Σ_i α_{I≥i,I≤i} S_{I≥i} T_{I≤i}`, computed exactly.
    pub fn mu2(&self, s: &SheafMorphism, t: &SheafMorphism) -> SheafMorphism {
        let comps: BTreeMap<Chain, Mat> = self
            .chains
            .par_iter()
            .filter_map(|c| self.mu2_on(s, t, c).map(|m| (c.clone(), m)))
            .filter(|(_, m)| !m.is_zero())
            .collect();
        SheafMorphism { degree: s.degree + t.degree, comps }
    }

    fn mu2_on(&self, s: &SheafMorphism, t: &SheafMorphism, c: &Chain) -> Option<Mat> {
        let top = c.max();
        let mut acc: Option<Mat> = None;
        for i in c.iter() {
            if let (Some(a), Some(b)) = (s.comps.get(&c.ge(i)), t.comps.get(&c.le(i))) {
                let p = a.mul(&b.restrict(self.atlas, top));
                let u = self.alpha.split_factor(c, i);
                let slot = acc.get_or_insert_with(|| Mat::zero(p.rows, p.cols, top));
                slot.add_scaled(&p, &self.field().one(), &u);
            }
        }
        acc
    }

    /// Components of the morphism complex with their total degrees.
    pub fn hom_layout(&self, src: &TwistedSheaf, dst: &TwistedSheaf) -> Vec<Component> {
        let mut out = Vec::new();
        for c in &self.chains {
            for (r, y) in dst.modules[c.max()].iter().enumerate() {
                for (k, x) in src.modules[c.min()].iter().enumerate() {
                    out.push(Component {
                        chain: c.clone(),
                        row: r,
                        col: k,
                        degree: y.degree - x.degree + c.len() as i64 - 1,
                    });
                }
            }
        }
        out
    }

    /// Lattice window: exponents `A` with `min_c(−m_c(A)) < e`, where `m_c`
    /// is the support function of `P_c` around `q_c`.
    pub fn lattice_window(&self, e: Rat) -> Vec<Vec<i64>> {
        let n = self.dim();
        let inside = |a: &[i64]| (0..self.atlas.n_vertices()).any(|c| -self.atlas.min_pairing(c, a) < e);
        let mut out = Vec::new();
        let mut radius = 0i64;
        loop {
            let mut found = false;
            for a in box_shell(n, radius) {
                if inside(&a) {
                    found = true;
                    out.push(a);
                }
            }
            if !found && radius > 0 {
                break;
            }
            radius += 1;
            assert!(radius < 10_000, "lattice window is unbounded");
        }
        out.sort();
        out
    }

    /// The truncated morphism complex over `R/t^e` in the basis
    /// `b_{c,A} = T^{−m_{max I}(A)} z^A` on each component `c`.
    pub fn truncated_complex(&self, src: &TwistedSheaf, dst: &TwistedSheaf, e: Rat) -> Result<TruncatedComplex, SheafError> {
        src.check(self.atlas)?;
        dst.check(self.atlas)?;
        let comps = self.hom_layout(src, dst);
        let window = self.lattice_window(e);
        let mut basis = Vec::new();
        for (ci, c) in comps.iter().enumerate() {
            for a in &window {
                basis.push((ci, a.clone(), c.degree));
            }
        }
        let index: BTreeMap<(usize, &Vec<i64>), usize> =
            basis.iter().enumerate().map(|(k, (ci, a, _))| ((*ci, a), k)).collect();
        let comp_index: BTreeMap<(&Chain, usize, usize), usize> =
            comps.iter().enumerate().map(|(k, c)| ((&c.chain, c.row, c.col), k)).collect();
        let degrees: BTreeSet<i64> = comps.iter().map(|c| c.degree).collect();
        let mut diffs = BTreeMap::new();
        let mut warnings = Vec::new();
        for &t in &degrees {
            let sources: Vec<usize> = (0..basis.len()).filter(|&k| basis[k].2 == t).collect();
            let targets: Vec<usize> = (0..basis.len()).filter(|&k| basis[k].2 == t + 1).collect();
            let tpos: BTreeMap<usize, usize> = targets.iter().enumerate().map(|(p, &k)| (k, p)).collect();
            let cols: Vec<Result<BTreeMap<usize, NovikovScalar>, SheafError>> = sources
                .par_iter()
                .map(|&k| {
                    let (ci, a, _) = &basis[k];
                    let c = &comps[*ci];
                    let top = Chain::max(&c.chain);
                    let mut m = Mat::zero(dst.rank(top), src.rank(Chain::min(&c.chain)), top);
                    let lambda = -self.atlas.min_pairing(top, a);
                    m.set(c.row, c.col, AffinoidElement::monomial(top, self.field().one(), lambda, a.clone()));
                    let mut tm = SheafMorphism::zero(t);
                    tm.comps.insert(c.chain.clone(), m);
                    let d = self.mu1(&tm, src, dst);
                    let mut col: BTreeMap<usize, NovikovScalar> = BTreeMap::new();
                    for (chain, mat) in &d.comps {
                        for (&(r, kk), x) in &mat.entries {
                            let ti = comp_index[&(chain, r, kk)];
                            for ((l, a2), coeff) in &x.terms {
                                let s = l + self.atlas.min_pairing(chain.max(), a2);
                                if s < Rat::from_integer(0) {
                                    return Err(SheafError::Lattice(format!(
                                        "differential leaves the integral lattice on {} (exponent {})",
                                        self.atlas.label(chain),
                                        fmt_rat(&s)
                                    )));
                                }
                                if s >= e {
                                    continue;
                                }
                                if let Some(&b) = index.get(&(ti, a2)) {
                                    let slot = col.entry(tpos[&b]).or_insert_with(|| NovikovScalar::zero(self.field()));
                                    *slot = slot.add(&NovikovScalar::monomial(coeff.clone(), s));
                                }
                            }
                        }
                    }
                    col.retain(|_, v| !v.is_zero());
                    Ok(col)
                })
                .collect();
            let mut entries = BTreeMap::new();
            for (p, col) in cols.into_iter().enumerate() {
                for (r, v) in col? {
                    entries.insert((r, p), v);
                }
            }
            diffs.insert(t, SparseMatrix { rows: targets.len(), cols: sources.len(), entries });
        }
        if window.is_empty() {
            warnings.push("empty lattice window".to_string());
        }
        let dims = degrees.iter().map(|&t| (t, basis.iter().filter(|b| b.2 == t).count())).collect();
        Ok(TruncatedComplex { precision: e, dims, diffs, warnings })
    }

    /// Valuation barcode of `Hom(src, dst)` at precision `e`.
    pub fn barcode(&self, src: &TwistedSheaf, dst: &TwistedSheaf, e: Rat) -> Result<Barcode, SheafError> {
        let cx = self.truncated_complex(src, dst, e)?;
        Ok(barcode_of(&cx))
    }
}

fn box_shell(n: usize, r: i64) -> Vec<Vec<i64>> {
    let mut out = Vec::new();
    let mut cur = vec![-r; n];
    if n == 0 {
        return if r == 0 { vec![vec![]] } else { vec![] };
    }
    loop {
        if cur.iter().any(|x| x.abs() == r) {
            out.push(cur.clone());
        }
        let mut k = 0;
        loop {
            if k == n {
                return out;
            }
            if cur[k] < r {
                cur[k] += 1;
                break;
            }
            cur[k] = -r;
            k += 1;
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Component {
    #[serde(skip)]
    pub chain: Chain,
    pub row: usize,
    pub col: usize,
    pub degree: i64,
}

/// Sparse matrix over the truncated valuation ring; rows are targets.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SparseMatrix {
    pub rows: usize,
    pub cols: usize,
    pub entries: BTreeMap<(usize, usize), NovikovScalar>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TruncatedComplex {
    pub precision: Rat,
    /// Rank of each degree over `R/t^e`.
    pub dims: BTreeMap<i64, usize>,
    /// Differential out of each degree.
    pub diffs: BTreeMap<i64, SparseMatrix>,
    pub warnings: Vec<String>,
}

impl TruncatedComplex {
    /// Smallest lattice refinement containing every exponent.
    pub fn denominator(&self) -> i64 {
        let mut d = *self.precision.denom();
        for m in self.diffs.values() {
            for v in m.entries.values() {
                for (x, _) in v.terms() {
                    d = lcm(d, *x.denom());
                }
            }
        }
        d
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Barcode {
    pub precision: Rat,
    pub bars: BTreeMap<i64, Vec<(Rat, Rat)>>,
    pub warnings: Vec<String>,
}

impl Barcode {
    pub fn full_bars(&self, degree: i64) -> usize {
        self.bars.get(&degree).map_or(0, |v| v.iter().filter(|b| b.1 == self.precision).count())
    }

    pub fn finite_bars(&self, degree: i64) -> Vec<Rat> {
        self.bars
            .get(&degree)
            .map(|v| v.iter().filter(|b| b.1 < self.precision).map(|b| b.1 - b.0).collect())
            .unwrap_or_default()
    }

    pub fn to_json(&self) -> serde_json::Value {
        let mut m = serde_json::Map::new();
        for (d, bars) in &self.bars {
            let v: Vec<serde_json::Value> =
                bars.iter().map(|(b, e)| serde_json::json!([fmt_rat(b), fmt_rat(e)])).collect();
            m.insert(d.to_string(), serde_json::Value::Array(v));
        }
        serde_json::Value::Object(m)
    }
}

fn trunc(x: &NovikovScalar, e: Rat) -> NovikovScalar {
    NovikovScalar::from_terms(x.field(), x.terms().iter().filter(|t| t.0 < e).cloned(), None)
}

/// Pivot valuations of a matrix over `R/t^e`, by repeated elimination at an
/// entry of least valuation. Valuations at or above `e` count as zero.
pub fn pivot_valuations(m: &SparseMatrix, e: Rat) -> Vec<Rat> {
    let mut rows: BTreeMap<usize, BTreeMap<usize, NovikovScalar>> = BTreeMap::new();
    for (&(r, c), v) in &m.entries {
        let v = trunc(v, e);
        if !v.is_zero() {
            rows.entry(r).or_default().insert(c, v);
        }
    }
    let mut out = Vec::new();
    loop {
        let best = rows
            .iter()
            .flat_map(|(r, row)| row.iter().map(move |(c, v)| (v.val().unwrap(), *r, *c)))
            .min();
        let Some((v, pr, pc)) = best else { break };
        out.push(v);
        let prow = rows.remove(&pr).unwrap();
        let p = &prow[&pc];
        let unit = p.shift(-v);
        let uinv = trunc(&unit.invert_with(Some(e)).expect("pivot is nonzero"), e);
        let others: Vec<usize> = rows.iter().filter(|(_, row)| row.contains_key(&pc)).map(|(r, _)| *r).collect();
        for r in others {
            let row = rows.get_mut(&r).unwrap();
            let q = trunc(&row[&pc].shift(-v).mul(&uinv), e);
            for (c, x) in &prow {
                let cur = row.remove(c).unwrap_or_else(|| NovikovScalar::zero(x.field()));
                let nv = trunc(&cur.sub(&q.mul(x)), e);
                if !nv.is_zero() {
                    row.insert(*c, nv);
                }
            }
            row.remove(&pc);
            if row.is_empty() {
                rows.remove(&r);
            }
        }
    }
    out.sort();
    out
}

/// Bars from pivots: a pivot of valuation `v ∈ (0,e)` out of degree `t` gives
/// `[0,v)` in degree `t+1`; generators left unpaired give `[0,e)`.
pub fn barcode_of(cx: &TruncatedComplex) -> Barcode {
    let e = cx.precision;
    let mut bars: BTreeMap<i64, Vec<(Rat, Rat)>> = cx.dims.keys().map(|&d| (d, Vec::new())).collect();
    let mut paired: BTreeMap<i64, usize> = BTreeMap::new();
    let mut warnings = cx.warnings.clone();
    for (&t, m) in &cx.diffs {
        let piv = pivot_valuations(m, e);
        *paired.entry(t).or_default() += piv.len();
        *paired.entry(t + 1).or_default() += piv.len();
        for v in piv {
            if v > e / int(2) {
                warnings.push(format!("pivot valuation {} exceeds half the window in degree {}", fmt_rat(&v), t + 1));
            }
            if v > Rat::from_integer(0) {
                bars.entry(t + 1).or_default().push((Rat::from_integer(0), v));
            }
        }
    }
    for (&t, &n) in &cx.dims {
        let free = n - paired.get(&t).copied().unwrap_or(0);
        for _ in 0..free {
            bars.entry(t).or_default().push((Rat::from_integer(0), e));
        }
    }
    for v in bars.values_mut() {
        v.sort();
    }
    Barcode { precision: e, bars, warnings }
}

/// Rank-one sheaf with the given transition units on edges `(i,j)`, in chart `j`.
pub fn line_bundle_from(atlas: &Atlas, transitions: &BTreeMap<(usize, usize), MonomialUnit>) -> TwistedSheaf {
    let mut s = TwistedSheaf::zero(atlas);
    for m in s.modules.iter_mut() {
        m.push(Generator { label: "e".into(), degree: 0 });
    }
    for (&(i, j), u) in transitions {
        let mut m = Mat::zero(1, 1, j);
        m.set(0, 0, u.element(atlas.field, j));
        s.maps.insert(Chain(vec![i, j]), m);
    }
    s
}

/// Builds the line bundle and validates it; an incompatible choice of
/// transitions is returned with its defect.
pub fn line_bundle(cat: &Category, transitions: &BTreeMap<(usize, usize), MonomialUnit>, e: Rat) -> Result<TwistedSheaf, SheafError> {
    let s = line_bundle_from(cat.atlas, transitions);
    let rep = cat.validate(&s, e)?;
    if rep.ok() {
        Ok(s)
    } else {
        Err(SheafError::Invalid(rep))
    }
}

fn edges(atlas: &Atlas) -> Vec<(usize, usize)> {
    atlas.chains(2).into_iter().filter(|c| c.len() == 2).map(|c| (c.0[0], c.0[1])).collect()
}

/// Solves `δε = v` over GF(2) on the edges of the atlas.
pub fn solve_signs(atlas: &Atlas) -> Result<BTreeMap<(usize, usize), u8>, SheafError> {
    let es = edges(atlas);
    let pos: BTreeMap<(usize, usize), usize> = es.iter().enumerate().map(|(k, e)| (*e, k)).collect();
    let mut rows: Vec<(Vec<bool>, bool)> = Vec::new();
    for c in atlas.chains(3).into_iter().filter(|c| c.len() == 3) {
        let (i, j, k) = (c.0[0], c.0[1], c.0[2]);
        let mut r = vec![false; es.len()];
        for e in [(i, j), (j, k), (i, k)] {
            r[pos[&e]] ^= true;
        }
        rows.push((r, atlas.sign(i, j, k) == 1));
    }
    let mut pivots = Vec::new();
    let mut rank = 0;
    for col in 0..es.len() {
        let Some(p) = (rank..rows.len()).find(|&r| rows[r].0[col]) else { continue };
        rows.swap(rank, p);
        for r in 0..rows.len() {
            if r != rank && rows[r].0[col] {
                let (src, b) = (rows[rank].0.clone(), rows[rank].1);
                for (x, y) in rows[r].0.iter_mut().zip(&src) {
                    *x ^= *y;
                }
                rows[r].1 ^= b;
            }
        }
        pivots.push(col);
        rank += 1;
    }
    if rows[rank..].iter().any(|r| r.1) {
        return Err(SheafError::NoSolution("sign cochain is not a coboundary".into()));
    }
    let mut eps = vec![false; es.len()];
    for (r, &col) in pivots.iter().enumerate() {
        eps[col] = rows[r].1;
    }
    Ok(es.into_iter().zip(eps).map(|(e, b)| (e, b as u8)).collect())
}

/// Transition units `u_ij = ε_ij T^{a_ij} z^{B_ij}` with
/// `u_ik = α_ijk · u_jk · u_ij` for the cocycle of the atlas sections.
///
/// The fractional part of the section gradients is written as a difference
/// `b_j − b_i` along a spanning forest; the remaining integral part gives `B`.
pub fn solve_line_bundle(atlas: &Atlas) -> Result<BTreeMap<(usize, usize), MonomialUnit>, SheafError> {
    let eps = solve_signs(atlas)?;
    let es = edges(atlas);
    let n = atlas.dimension;
    let nv = atlas.n_vertices();
    let mut adj: Vec<Vec<(usize, usize, usize)>> = vec![Vec::new(); nv];
    for &(i, j) in &es {
        adj[i].push((j, i, j));
        adj[j].push((i, i, j));
    }
    let mut b: Vec<Option<Vec<Rat>>> = vec![None; nv];
    for root in 0..nv {
        if b[root].is_some() {
            continue;
        }
        b[root] = Some(vec![Rat::from_integer(0); n]);
        let mut queue = VecDeque::from([root]);
        while let Some(x) = queue.pop_front() {
            for &(y, i, j) in &adj[x] {
                if b[y].is_some() {
                    continue;
                }
                let g = atlas.section(i, j).gradient;
                let bx = b[x].clone().unwrap();
                let by: Vec<Rat> = if x == i {
                    bx.iter().zip(&g).map(|(p, q)| p + q).collect()
                } else {
                    bx.iter().zip(&g).map(|(p, q)| p - q).collect()
                };
                b[y] = Some(by);
                queue.push_back(y);
            }
        }
    }
    let b: Vec<Vec<Rat>> = b.into_iter().map(|x| x.unwrap()).collect();
    let mut out = BTreeMap::new();
    for (i, j) in es {
        let s = atlas.section(i, j);
        let mut a = Vec::with_capacity(n);
        for t in 0..n {
            let x = -(s.gradient[t] - b[j][t] + b[i][t]);
            if !x.is_integer() {
                return Err(SheafError::NoSolution(format!(
                    "section gradients are not integral up to a coboundary on {}",
                    atlas.label(&Chain(vec![i, j]))
                )));
            }
            a.push(x.to_integer());
        }
        let lambda = -s.value - crate::rat::dot_rr(&b[i], &atlas.lift(i, j));
        out.insert((i, j), MonomialUnit { sign: eps[&(i, j)], lambda, a });
    }
    Ok(out)
}

/// Gauge transform `u_ij ↦ φ_j · u_ij · φ_i^{-1}` by monomial units `φ_i` in chart `i`.
pub fn gauge(atlas: &Atlas, u: &BTreeMap<(usize, usize), MonomialUnit>, phi: &[MonomialUnit]) -> BTreeMap<(usize, usize), MonomialUnit> {
    u.iter()
        .map(|(&(i, j), x)| {
            let inv = phi[i].inverse().restrict(atlas, i, j);
            ((i, j), phi[j].mul(x).mul(&inv))
        })
        .collect()
}

/// Options for random morphisms.
#[derive(Clone, Debug)]
pub struct RandomSpec {
    /// Probability that an admissible entry is nonzero.
    pub density: f64,
    /// Exponents `λ` are drawn from `{0, 1/d, …}` below `max_energy`.
    pub denominator: i64,
    pub max_energy: i64,
    /// Range of each coordinate of `A`.
    pub max_z: i64,
    pub terms: usize,
}

impl Default for RandomSpec {
    fn default() -> Self {
        RandomSpec { density: 0.7, denominator: 1, max_energy: 2, max_z: 1, terms: 2 }
    }
}

pub fn random_element<R: Rng>(atlas: &Atlas, chart: usize, spec: &RandomSpec, rng: &mut R) -> AffinoidElement {
    let mut e = AffinoidElement::zero(atlas.field, chart);
    for _ in 0..spec.terms {
        let c = atlas.field.from_i64(rng.gen_range(1..=3) * if rng.gen_bool(0.5) { 1 } else { -1 });
        let l = rat(rng.gen_range(0..spec.max_energy * spec.denominator), spec.denominator);
        let a: Vec<i64> = (0..atlas.dimension).map(|_| rng.gen_range(-spec.max_z..=spec.max_z)).collect();
        e = e.add(&AffinoidElement::monomial(chart, c, l, a)).expect("same chart");
    }
    e
}

/// A random homogeneous morphism of degree `t`.
pub fn random_morphism<R: Rng>(
    cat: &Category,
    src: &TwistedSheaf,
    dst: &TwistedSheaf,
    t: i64,
    spec: &RandomSpec,
    rng: &mut R,
) -> SheafMorphism {
    let mut out = SheafMorphism::zero(t);
    for c in &cat.chains {
        let (top, bot) = (c.max(), c.min());
        let mut m = Mat::zero(dst.rank(top), src.rank(bot), top);
        for (r, y) in dst.modules[top].iter().enumerate() {
            for (k, x) in src.modules[bot].iter().enumerate() {
                if y.degree - x.degree == t + 1 - c.len() as i64 && rng.gen_bool(spec.density) {
                    m.set(r, k, random_element(cat.atlas, top, spec, rng));
                }
            }
        }
        if !m.is_zero() {
            out.comps.insert(c.clone(), m);
        }
    }
    out
}

/// Evaluates `⟨lift(q_j − q_i), A⟩`, the energy shift when moving `z^A` from chart `i` to `j`.
pub fn rebase_shift(atlas: &Atlas, i: usize, j: usize, a: &[i64]) -> Rat {
    dot(&atlas.lift(i, j), a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::affinoid::twisting_cocycle;
    use crate::fixtures;

    #[test]
    fn zero_sheaf_passes() {
        let a = fixtures::triangle();
        let cat = Category::new(&a, twisting_cocycle(&a).unwrap());
        let mut s = TwistedSheaf::zero(&a);
        s.modules[0].push(Generator { label: "x".into(), degree: 0 });
        assert!(cat.validate(&s, int(4)).unwrap().ok());
    }

    #[test]
    fn structure_sheaf_identity_is_closed() {
        let a = fixtures::circle();
        let cat = Category::new(&a, twisting_cocycle(&a).unwrap());
        let u = solve_line_bundle(&a).unwrap();
        let o = line_bundle(&cat, &u, int(5)).unwrap();
        let id = cat.identity(&o);
        assert!(cat.mu1(&id, &o, &o).is_zero());
    }

    #[test]
    fn single_pivot_bar() {
        let f = BaseField::Rationals;
        let mut entries = BTreeMap::new();
        entries.insert((0, 0), NovikovScalar::t_pow(f, int(2)));
        let cx = TruncatedComplex {
            precision: int(5),
            dims: BTreeMap::from([(0, 1), (1, 1)]),
            diffs: BTreeMap::from([(0, SparseMatrix { rows: 1, cols: 1, entries })]),
            warnings: vec![],
        };
        let b = barcode_of(&cx);
        assert_eq!(b.bars[&1], vec![(int(0), int(2))]);
        assert!(b.bars[&0].is_empty());
    }

    #[test]
    fn shells_cover_box() {
        let n: usize = (0..3).map(|r| box_shell(2, r).len()).sum();
        assert_eq!(n, 25);
    }
}
