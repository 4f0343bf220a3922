//! Chart rings of the rigid-analytic dual, restriction between charts, and
//! the twisting cocycle α^v.
//!
//! An element of `O_i` is a finite sum of terms `c T^λ z^A` in basepoint
//! normalized coordinates. Its polytope valuation is
//! `w_i(λ, A) = λ + min_{v ∈ P_i} ⟨v - q_i, A⟩`, evaluated at polytope vertices.

use crate::affine::{Atlas, Chain};
use crate::novikov::{BaseField, Coeff, NovikovError};
use crate::rat::{dot, fmt_rat, min_opt, Rat};
use num_traits::Zero;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AffinoidError {
    #[error("chart mismatch: {0} vs {1}")]
    ChartMismatch(usize, usize),
    #[error("cannot restrict from chart {from} to chart {to}: {why}")]
    Restriction { from: i64, to: i64, why: String },
    #[error("not recognizably a unit at this precision")]
    NotAUnit,
    #[error("non-integral lattice class on {0}")]
    NonIntegral(String),
    #[error(transparent)]
    Novikov(#[from] NovikovError),
}

pub type Key = (Rat, Vec<i64>);

/// Truncated Laurent series in the chart ring `O_i`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AffinoidElement {
    pub chart: usize,
    pub field: BaseField,
    pub terms: BTreeMap<Key, Coeff>,
    /// Terms with polytope valuation at or above the precision are unknown.
    pub precision: Option<Rat>,
}

impl AffinoidElement {
    pub fn zero(field: BaseField, chart: usize) -> Self {
        AffinoidElement { chart, field, terms: BTreeMap::new(), precision: None }
    }

    pub fn monomial(chart: usize, c: Coeff, lambda: Rat, a: Vec<i64>) -> Self {
        let field = c.field();
        let mut e = Self::zero(field, chart);
        if !c.is_zero() {
            e.terms.insert((lambda, a), c);
        }
        e
    }

    pub fn constant(chart: usize, c: Coeff, n: usize) -> Self {
        Self::monomial(chart, c, Rat::zero(), vec![0; n])
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn n_terms(&self) -> usize {
        self.terms.len()
    }

    fn insert(&mut self, k: Key, c: Coeff) {
        if c.is_zero() {
            return;
        }
        match self.terms.get_mut(&k) {
            Some(x) => {
                *x = x.add(&c);
                if x.is_zero() {
                    self.terms.remove(&k);
                }
            }
            None => {
                self.terms.insert(k, c);
            }
        }
    }

    /// Polytope valuation of one term in this element's chart.
    pub fn w(atlas: &Atlas, chart: usize, key: &Key) -> Rat {
        key.0 + atlas.min_pairing(chart, &key.1)
    }

    /// Smallest polytope valuation over the terms; `None` for zero.
    pub fn valuation(&self, atlas: &Atlas) -> Option<Rat> {
        self.terms.keys().map(|k| Self::w(atlas, self.chart, k)).min()
    }

    /// Drops every term with `w ≥ e` and records `e` as precision.
    pub fn truncate(&self, atlas: &Atlas, e: Option<Rat>) -> Self {
        let prec = min_opt(self.precision, e);
        let mut out = AffinoidElement { precision: prec, terms: BTreeMap::new(), ..self.clone() };
        for (k, c) in &self.terms {
            if prec.map_or(true, |p| Self::w(atlas, self.chart, k) < p) {
                out.terms.insert(k.clone(), c.clone());
            }
        }
        out
    }

    /// True when every term has `w ≥ e`.
    pub fn vanishes_below(&self, atlas: &Atlas, e: Rat) -> bool {
        self.terms.keys().all(|k| Self::w(atlas, self.chart, k) >= e)
    }

    pub fn add(&self, o: &Self) -> Result<Self, AffinoidError> {
        if self.chart != o.chart {
            return Err(AffinoidError::ChartMismatch(self.chart, o.chart));
        }
        let mut out = self.clone();
        out.precision = min_opt(self.precision, o.precision);
        for (k, c) in &o.terms {
            out.insert(k.clone(), c.clone());
        }
        Ok(out)
    }

    /// In-place `self += c·T^λ z^A·o` (exact, no truncation).
    pub fn add_scaled(&mut self, o: &Self, c: &Coeff, lambda: Rat, a: &[i64]) {
        debug_assert_eq!(self.chart, o.chart);
        for ((l, z), x) in &o.terms {
            let zz: Vec<i64> = z.iter().zip(a).map(|(p, q)| p + q).collect();
            self.insert((*l + lambda, zz), x.mul(c));
        }
        self.precision = min_opt(self.precision, o.precision);
    }

    pub fn neg(&self) -> Self {
        let mut out = self.clone();
        for c in out.terms.values_mut() {
            *c = c.neg();
        }
        out
    }

    pub fn sub(&self, o: &Self) -> Result<Self, AffinoidError> {
        self.add(&o.neg())
    }

    pub fn scale(&self, c: &Coeff) -> Self {
        let mut out = Self::zero(self.field, self.chart);
        out.precision = self.precision;
        for (k, x) in &self.terms {
            out.insert(k.clone(), x.mul(c));
        }
        out
    }

    /// Exact convolution, then truncation at the contracted precision.
    pub fn mul(&self, o: &Self, atlas: &Atlas) -> Result<Self, AffinoidError> {
        if self.chart != o.chart {
            return Err(AffinoidError::ChartMismatch(self.chart, o.chart));
        }
        let contract = |p: Option<Rat>, w: Option<Rat>| {
            p.map(|p| match w {
                Some(w) if w < Rat::zero() => p + w,
                _ => p,
            })
        };
        let prec = min_opt(contract(self.precision, o.valuation(atlas)), contract(o.precision, self.valuation(atlas)));
        let mut out = self.mul_exact(o);
        out.precision = None;
        Ok(out.truncate(atlas, prec))
    }

    /// Convolution without any truncation; precision is dropped.
    pub fn mul_exact(&self, o: &Self) -> Self {
        let mut out = Self::zero(self.field, self.chart);
        for ((l1, a1), c1) in &self.terms {
            for ((l2, a2), c2) in &o.terms {
                let a: Vec<i64> = a1.iter().zip(a2).map(|(x, y)| x + y).collect();
                out.insert((l1 + l2, a), c1.mul(c2));
            }
        }
        out
    }

    /// Rebases into chart `j` using `z_{q_i}^A = T^{⟨q_j - q_i, A⟩} z_{q_j}^A`.
    pub fn restrict(&self, atlas: &Atlas, j: usize) -> Result<Self, AffinoidError> {
        let i = self.chart;
        if i == j {
            return Ok(self.clone());
        }
        let err = |why: &str| AffinoidError::Restriction { from: atlas.id(i), to: atlas.id(j), why: why.into() };
        if i > j {
            return Err(err("restriction only goes to larger vertices"));
        }
        if !atlas.is_chain(&Chain(vec![i, j])) {
            return Err(err("vertices share no simplex"));
        }
        Ok(self.restrict_unchecked(atlas, j))
    }

    pub(crate) fn restrict_unchecked(&self, atlas: &Atlas, j: usize) -> Self {
        if self.chart == j {
            return self.clone();
        }
        let shift = atlas.lift(self.chart, j);
        let mut out = Self::zero(self.field, j);
        out.precision = self.precision;
        for ((l, a), c) in &self.terms {
            out.terms.insert((l + dot(&shift, a), a.clone()), c.clone());
        }
        out
    }

    /// Inverse of a recognizable unit: some term dominates the rest at every
    /// polytope vertex. For exact input the series is cut at `cutoff`.
    pub fn unit_invert(&self, atlas: &Atlas, cutoff: Rat) -> Result<Self, AffinoidError> {
        let verts = atlas.chart_vertices(self.chart);
        let n = atlas.dimension;
        let val_at = |v: &[Rat], k: &Key| k.0 + dot(v, &k.1);
        let dominant = self.terms.keys().find(|m| {
            self.terms.keys().filter(|k| k != m).all(|k| verts.iter().all(|v| val_at(v, m) < val_at(v, k)))
        });
        let m = dominant.ok_or(AffinoidError::NotAUnit)?.clone();
        let cm = self.terms[&m].clone();
        let cinv = cm.inv().ok_or(AffinoidError::NotAUnit)?;
        let minv_key: Key = (-m.0, m.1.iter().map(|x| -x).collect());
        let w_minv = Self::w(atlas, self.chart, &minv_key);
        // result known up to E + 2 w(m^{-1})
        let e = self.precision.unwrap_or(cutoff);
        let target = e + w_minv + w_minv;
        let minv = Self::monomial(self.chart, cinv.clone(), minv_key.0, minv_key.1.clone());
        // u = m^{-1}(a - m)
        let mut rest = self.clone();
        rest.terms.remove(&m);
        rest.precision = None;
        let u = minv.mul_exact(&rest);
        if u.is_zero() {
            let mut r = minv;
            r.precision = self.precision.map(|_| target);
            return Ok(r);
        }
        // relative cutoff so that m^{-1}·(series) is correct below target
        let rel = target - w_minv;
        let neg_u = u.neg().truncate(atlas, Some(rel));
        let mut sum = Self::constant(self.chart, self.field.one(), n);
        let mut power = sum.clone();
        loop {
            power = power.mul_exact(&neg_u);
            power.precision = None;
            power = power.truncate(atlas, Some(rel));
            power.precision = None;
            if power.is_zero() {
                break;
            }
            sum = sum.add(&power)?;
        }
        let mut out = minv.mul_exact(&sum);
        out.precision = None;
        Ok(out.truncate(atlas, Some(target)))
    }

    pub fn to_json(&self, atlas: &Atlas) -> ElementJson {
        ElementJson {
            chart: atlas.id(self.chart),
            precision: self.precision,
            terms: self
                .terms
                .iter()
                .map(|((l, a), c)| TermJson { t: *l, z: a.clone(), c: c.to_string() })
                .collect(),
        }
    }

    pub fn from_json(j: &ElementJson, atlas: &Atlas) -> Result<Self, AffinoidError> {
        let chart = atlas
            .index_of(j.chart)
            .ok_or_else(|| AffinoidError::NonIntegral(format!("unknown chart {}", j.chart)))?;
        Self::from_terms_json(&j.terms, chart, j.precision, atlas)
    }

    pub fn from_terms_json(
        terms: &[TermJson],
        chart: usize,
        precision: Option<Rat>,
        atlas: &Atlas,
    ) -> Result<Self, AffinoidError> {
        let mut e = Self::zero(atlas.field, chart);
        e.precision = precision;
        for t in terms {
            if t.z.len() != atlas.dimension {
                return Err(AffinoidError::NonIntegral(format!("term z has length {}", t.z.len())));
            }
            e.insert((t.t, t.z.clone()), atlas.field.parse_coeff(&t.c)?);
        }
        Ok(e)
    }

    pub fn display(&self) -> String {
        format!("{self}")
    }
}

impl fmt::Display for AffinoidElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            write!(f, "0")?;
        }
        for (k, ((l, a), c)) in self.terms.iter().enumerate() {
            if k > 0 {
                write!(f, " + ")?;
            }
            let z: Vec<String> = a.iter().map(|x| x.to_string()).collect();
            write!(f, "{}*T^{{{}}}*z^{{{}}}", c, fmt_rat(l), z.join(","))?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TermJson {
    #[serde(with = "crate::rat::as_str")]
    pub t: Rat,
    pub z: Vec<i64>,
    pub c: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ElementJson {
    pub chart: i64,
    #[serde(with = "crate::rat::opt_str", default)]
    pub precision: Option<Rat>,
    pub terms: Vec<TermJson>,
}

/// `(-1)^sign T^λ z^A`, a monomial unit.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct MonomialUnit {
    pub sign: u8,
    pub lambda: Rat,
    pub a: Vec<i64>,
}

impl MonomialUnit {
    pub fn one(n: usize) -> Self {
        MonomialUnit { sign: 0, lambda: Rat::zero(), a: vec![0; n] }
    }

    pub fn is_one(&self) -> bool {
        self.sign == 0 && self.lambda.is_zero() && self.a.iter().all(|x| *x == 0)
    }

    pub fn inverse(&self) -> Self {
        MonomialUnit { sign: self.sign, lambda: -self.lambda, a: self.a.iter().map(|x| -x).collect() }
    }

    pub fn mul(&self, o: &Self) -> Self {
        MonomialUnit {
            sign: (self.sign + o.sign) % 2,
            lambda: self.lambda + o.lambda,
            a: self.a.iter().zip(&o.a).map(|(x, y)| x + y).collect(),
        }
    }

    /// Moves the unit from chart `i` to chart `j`.
    pub fn restrict(&self, atlas: &Atlas, i: usize, j: usize) -> Self {
        MonomialUnit { lambda: self.lambda + dot(&atlas.lift(i, j), &self.a), ..self.clone() }
    }

    pub fn coeff(&self, field: BaseField) -> Coeff {
        field.sign(self.sign as i64)
    }

    pub fn element(&self, field: BaseField, chart: usize) -> AffinoidElement {
        AffinoidElement::monomial(chart, self.coeff(field), self.lambda, self.a.clone())
    }
}

impl fmt::Display for MonomialUnit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let z: Vec<String> = self.a.iter().map(|x| x.to_string()).collect();
        write!(
            f,
            "{}T^{{{}}}z^{{{}}}",
            if self.sign == 1 { "-" } else { "" },
            fmt_rat(&self.lambda),
            z.join(",")
        )
    }
}

/// Units `α_{ijk}` in chart `k`, one per 3-chain. Degenerate index triples
/// (repeated vertices) evaluate to one.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TwistingCocycle {
    pub dimension: usize,
    pub entries: BTreeMap<(usize, usize, usize), MonomialUnit>,
}

impl TwistingCocycle {
    pub fn trivial(atlas: &Atlas) -> Self {
        TwistingCocycle { dimension: atlas.dimension, entries: BTreeMap::new() }
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> MonomialUnit {
        if i == j || j == k {
            return MonomialUnit::one(self.dimension);
        }
        self.entries.get(&(i, j, k)).cloned().unwrap_or_else(|| MonomialUnit::one(self.dimension))
    }

    /// The factor `α_{I≥_i, I≤_i} = α_{min I, i, max I}` in chart `max I`.
    pub fn split_factor(&self, chain: &Chain, i: usize) -> MonomialUnit {
        self.get(chain.min(), i, chain.max())
    }

    /// Same signs, inverted monomials.
    pub fn inverse(&self) -> Self {
        TwistingCocycle {
            dimension: self.dimension,
            entries: self.entries.iter().map(|(k, v)| (*k, v.inverse())).collect(),
        }
    }

    pub fn is_trivial(&self) -> bool {
        self.entries.values().all(|u| u.is_one())
    }
}

/// `α^v_{ijk} = (-1)^{v_ijk} T^{g(q_k)} z_{q_k}^{dg}` with `g = f_ij + f_jk - f_ik`,
/// evaluated for any increasing triple.
pub fn alpha_triple(atlas: &Atlas, i: usize, j: usize, k: usize) -> Result<MonomialUnit, AffinoidError> {
    let (val, grad) = atlas.g_triple(i, j, k);
    let mut a = Vec::with_capacity(grad.len());
    for g in &grad {
        if !g.is_integer() {
            return Err(AffinoidError::NonIntegral(atlas.label(&Chain(vec![i, j, k]))));
        }
        a.push(g.to_integer());
    }
    Ok(MonomialUnit { sign: atlas.sign(i, j, k), lambda: val, a })
}

/// The cocycle on every 3-chain of the atlas.
pub fn twisting_cocycle(atlas: &Atlas) -> Result<TwistingCocycle, AffinoidError> {
    let mut entries = BTreeMap::new();
    for c in atlas.chains(3).into_iter().filter(|c| c.len() == 3) {
        let (i, j, k) = (c.0[0], c.0[1], c.0[2]);
        entries.insert((i, j, k), alpha_triple(atlas, i, j, k)?);
    }
    Ok(TwistingCocycle { dimension: atlas.dimension, entries })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CocycleFailure {
    pub chain: Vec<i64>,
    /// `g_jkl - g_ikl + g_ijl - g_ijk` at `q_l`.
    #[serde(with = "crate::rat::as_str")]
    pub witness_value: Rat,
    pub witness_gradient: Vec<i64>,
    pub sign_failure: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CocycleReport {
    pub checked: usize,
    pub failures: Vec<CocycleFailure>,
}

impl CocycleReport {
    pub fn ok(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Checks `α_jkl α_ijl = α_ikl α_ijk` in chart `l` on every 4-chain.
pub fn cocycle_check(c: &TwistingCocycle, atlas: &Atlas) -> CocycleReport {
    let mut rep = CocycleReport::default();
    for ch in atlas.chains(4).into_iter().filter(|c| c.len() == 4) {
        let (i, j, k, l) = (ch.0[0], ch.0[1], ch.0[2], ch.0[3]);
        rep.checked += 1;
        let lhs = c.get(j, k, l).mul(&c.get(i, j, l));
        let rhs = c.get(i, k, l).mul(&c.get(i, j, k).restrict(atlas, k, l));
        if lhs != rhs {
            let witness_value = lhs.lambda - rhs.lambda;
            let witness_gradient = lhs.a.iter().zip(&rhs.a).map(|(x, y)| x - y).collect();
            rep.failures.push(CocycleFailure {
                chain: ch.iter().map(|x| atlas.id(x)).collect(),
                witness_value,
                witness_gradient,
                sign_failure: lhs.sign != rhs.sign,
            });
        }
    }
    rep
}

/// `Π` of the α-factors relating the two conventions for structure maps:
/// `G_I = F_I · Π_{i_0 < i_a < i_b} α_{i_0 i_a i_b}` restricted to chart `max I`.
///
/// The category in this crate works with the `F` convention throughout; this
/// helper exposes the conversion factor for chains of any length.
pub fn convention_factor(c: &TwistingCocycle, atlas: &Atlas, chain: &Chain) -> MonomialUnit {
    let mut out = MonomialUnit::one(atlas.dimension);
    let top = chain.max();
    let v = &chain.0;
    for a in 1..v.len() {
        for b in (a + 1)..v.len() {
            out = out.mul(&c.get(v[0], v[a], v[b]).restrict(atlas, v[b], top));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::rat::{int, rat};

    const Q: BaseField = BaseField::Rationals;

    #[test]
    fn monomial_products() {
        let a = fixtures::circle();
        let z = AffinoidElement::monomial(0, Q.one(), int(0), vec![1]);
        let zi = AffinoidElement::monomial(0, Q.one(), int(0), vec![-1]);
        assert_eq!(z.mul(&zi, &a).unwrap(), AffinoidElement::constant(0, Q.one(), 1));
        let h = AffinoidElement::monomial(0, Q.one(), rat(1, 2), vec![1]);
        assert_eq!(h.mul(&h, &a).unwrap(), AffinoidElement::monomial(0, Q.one(), int(1), vec![2]));
    }

    #[test]
    fn truncation_drops_high_terms() {
        let a = fixtures::circle();
        // chart 0: P_0 - q_0 = [-2/3, 1]; w(λ, 1) = λ - 2/3
        let mut x = AffinoidElement::monomial(0, Q.one(), int(3), vec![1]);
        x.precision = Some(int(4));
        let y = x.mul(&x, &a).unwrap();
        // w(6, 2) = 6 - 4/3 ≥ 4
        assert!(y.is_zero());
    }

    #[test]
    fn restriction_example() {
        let a = fixtures::circle();
        let z = AffinoidElement::monomial(0, Q.one(), int(0), vec![1]);
        let r = z.restrict(&a, 1).unwrap();
        assert_eq!(r, AffinoidElement::monomial(1, Q.one(), rat(1, 3), vec![1]));
        let five = AffinoidElement::constant(0, Q.from_i64(5), 1);
        assert_eq!(five.restrict(&a, 2).unwrap(), AffinoidElement::constant(2, Q.from_i64(5), 1));
        assert!(r.restrict(&a, 0).is_err());
    }

    #[test]
    fn unit_inverses() {
        let a = fixtures::circle();
        let m = AffinoidElement::monomial(1, Q.one(), rat(1, 2), vec![2]);
        let mi = m.unit_invert(&a, int(5)).unwrap();
        assert_eq!(mi, AffinoidElement::monomial(1, Q.one(), rat(-1, 2), vec![-2]));
        // chart 1: P_1 - q_1 = [-1/3, 2/3]; w(1, 1) = 2/3 > 0
        let one = AffinoidElement::constant(1, Q.one(), 1);
        let u = one.add(&AffinoidElement::monomial(1, Q.one(), int(1), vec![1])).unwrap();
        let ui = u.unit_invert(&a, int(3)).unwrap();
        let prod = ui.mul_exact(&u).sub(&one).unwrap();
        assert!(prod.vanishes_below(&a, int(3)));
        assert_eq!(ui.terms.get(&(int(1), vec![1])), Some(&Q.from_i64(-1)));
        // symmetric chart: z + z^{-1} has no dominating term
        let s = fixtures::interval();
        let zz = AffinoidElement::monomial(0, Q.one(), int(0), vec![1])
            .add(&AffinoidElement::monomial(0, Q.one(), int(0), vec![-1]))
            .unwrap();
        assert_eq!(zz.unit_invert(&s, int(3)), Err(AffinoidError::NotAUnit));
    }

    #[test]
    fn cocycle_zero_sections() {
        let a = fixtures::tetrahedron();
        let c = twisting_cocycle(&a).unwrap();
        assert!(c.is_trivial());
        assert!(cocycle_check(&c, &a).ok());
    }

    #[test]
    fn cocycle_circle_example() {
        let mut a = fixtures::circle();
        a.sections.insert((0, 2), crate::affine::Section { gradient: vec![int(1)], value: int(0) });
        // the circle has no 3-chains; the triple is evaluated directly
        assert!(twisting_cocycle(&a).unwrap().entries.is_empty());
        // f_01 = f_12 = 0 so g = -f_02 and α_012 = z^{-1}
        let u = alpha_triple(&a, 0, 1, 2).unwrap();
        assert_eq!(u, MonomialUnit { sign: 0, lambda: int(0), a: vec![-1] });
        a.sign_cocycle.insert((0, 1, 2), 1);
        assert_eq!(alpha_triple(&a, 0, 1, 2).unwrap().sign, 1);
    }

    #[test]
    fn corrupted_value_fails() {
        let a = fixtures::tetrahedron();
        let mut c = twisting_cocycle(&a).unwrap();
        c.entries.get_mut(&(0, 1, 2)).unwrap().lambda += rat(1, 7);
        let r = cocycle_check(&c, &a);
        assert!(!r.ok());
        assert!(r.failures.iter().all(|f| !f.witness_value.is_zero()));
    }
}
