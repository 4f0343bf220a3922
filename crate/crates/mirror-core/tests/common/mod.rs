#![allow(dead_code)]

use mirror_core::affine::{Atlas, Chain};
use mirror_core::affinoid::{twisting_cocycle, AffinoidElement, MonomialUnit};
use mirror_core::category::*;
use mirror_core::fixtures;
use mirror_core::novikov::{BaseField, Coeff};
use mirror_core::rat::Rat;
use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Atlas with random integral-up-to-coboundary sections and a random
/// coboundary sign cochain.
pub fn twisted_atlas(name: &str, seed: u64) -> Atlas {
    let mut a = fixtures::by_name(name).unwrap();
    let mut r = rng(seed);
    fixtures::randomize_sections(&mut a, &mut r);
    fixtures::randomize_signs(&mut a, &mut r, true);
    a
}

/// Cone of the identity of a line bundle: generators `a` (degree 0) and
/// `b` (degree 1), `F_i = e_{ba}`, `F_ij = diag(u_ij, −u_ij)`.
pub fn cone(atlas: &Atlas, u: &BTreeMap<(usize, usize), MonomialUnit>) -> TwistedSheaf {
    let f = atlas.field;
    let n = atlas.dimension;
    let mut s = TwistedSheaf::zero(atlas);
    for i in 0..atlas.n_vertices() {
        s.modules[i] = vec![
            Generator { label: "a".into(), degree: 0 },
            Generator { label: "b".into(), degree: 1 },
        ];
        let mut m = Mat::zero(2, 2, i);
        m.set(1, 0, AffinoidElement::constant(i, f.one(), n));
        s.maps.insert(Chain(vec![i]), m);
    }
    for (&(i, j), x) in u {
        let e = x.element(f, j);
        let mut m = Mat::zero(2, 2, j);
        m.set(0, 0, e.clone());
        m.set(1, 1, e.neg());
        s.maps.insert(Chain(vec![i, j]), m);
    }
    s
}

/// Block sum of two sheaves, generators of `x` first.
pub fn direct_sum(x: &TwistedSheaf, y: &TwistedSheaf) -> TwistedSheaf {
    let mut s = TwistedSheaf { modules: Vec::new(), maps: BTreeMap::new() };
    for (p, q) in x.modules.iter().zip(&y.modules) {
        s.modules.push(p.iter().chain(q).cloned().collect());
    }
    let keys: std::collections::BTreeSet<Chain> = x.maps.keys().chain(y.maps.keys()).cloned().collect();
    for c in keys {
        let (top, bot) = (c.0[c.len() - 1], c.0[0]);
        let (xr, xc) = (x.rank(top), x.rank(bot));
        let mut m = Mat::zero(xr + y.rank(top), xc + y.rank(bot), top);
        if let Some(a) = x.maps.get(&c) {
            for (&(r, k), e) in &a.entries {
                m.set(r, k, e.clone());
            }
        }
        if let Some(b) = y.maps.get(&c) {
            for (&(r, k), e) in &b.entries {
                m.set(xr + r, xc + k, e.clone());
            }
        }
        s.maps.insert(c, m);
    }
    s
}

/// Line bundle gauge-transformed by monomials `z^{A_i}` with random `A_i`.
pub fn gauged(atlas: &Atlas, u: &BTreeMap<(usize, usize), MonomialUnit>, seed: u64) -> BTreeMap<(usize, usize), MonomialUnit> {
    use rand::Rng;
    let mut r = rng(seed);
    let phi: Vec<MonomialUnit> = (0..atlas.n_vertices())
        .map(|_| MonomialUnit {
            sign: r.gen_range(0..2),
            lambda: Rat::zero(),
            a: (0..atlas.dimension).map(|_| r.gen_range(-1..=1)).collect(),
        })
        .collect();
    gauge(atlas, u, &phi)
}

/// A family of validated sheaves on one twisted atlas.
pub fn family(atlas: &Atlas, seed: u64) -> Vec<TwistedSheaf> {
    let u = solve_line_bundle(atlas).unwrap();
    let v = gauged(atlas, &u, seed);
    vec![line_bundle_from(atlas, &u), line_bundle_from(atlas, &v), cone(atlas, &u)]
}

pub fn category(atlas: &Atlas) -> Category<'_> {
    Category::new(atlas, twisting_cocycle(atlas).unwrap())
}

fn q(c: &Coeff) -> BigRational {
    match c {
        Coeff::Q(x) => x.clone(),
        _ => panic!("oracle works over the rationals"),
    }
}

/// Rank over ℚ of a sparse matrix given as rows of `col → value`.
pub fn rank(mut rows: Vec<BTreeMap<usize, BigRational>>) -> usize {
    rows.retain(|r| !r.is_empty());
    let mut rank = 0;
    let mut pivots: BTreeMap<usize, BTreeMap<usize, BigRational>> = BTreeMap::new();
    for mut row in rows {
        loop {
            let Some((&c, _)) = row.iter().next() else { break };
            match pivots.get(&c) {
                Some(p) => {
                    let f = row[&c].clone() / p[&c].clone();
                    for (k, v) in p {
                        let nv = row.get(k).cloned().unwrap_or_else(BigRational::zero) - &f * v;
                        if nv.is_zero() {
                            row.remove(k);
                        } else {
                            row.insert(*k, nv);
                        }
                    }
                }
                None => {
                    pivots.insert(c, row);
                    rank += 1;
                    break;
                }
            }
        }
    }
    rank
}

/// Rank over 𝐤 of `m` acting on `(R/t^s)^cols`, exponents on the grid `(1/d)ℤ`.
pub fn truncated_rank(m: &SparseMatrix, d: i64, steps: i64) -> usize {
    let mut rows: Vec<BTreeMap<usize, BigRational>> = Vec::new();
    let mut by_row: BTreeMap<usize, Vec<(usize, Vec<(i64, BigRational)>)>> = BTreeMap::new();
    for (&(r, c), x) in &m.entries {
        let terms = x
            .terms()
            .iter()
            .map(|(e, k)| {
                let g = *e * Rat::from_integer(d);
                assert!(g.is_integer());
                (g.to_integer(), q(k))
            })
            .collect();
        by_row.entry(r).or_default().push((c, terms));
    }
    for entries in by_row.values() {
        for mu in 0..steps {
            let mut row = BTreeMap::new();
            for (c, terms) in entries {
                for (g, k) in terms {
                    let lambda = mu - g;
                    if lambda >= 0 {
                        *row.entry(c * steps as usize + lambda as usize).or_insert_with(BigRational::zero) += k;
                    }
                }
            }
            row.retain(|_, v: &mut BigRational| !v.is_zero());
            rows.push(row);
        }
    }
    rank(rows)
}

/// Pivot valuations recovered from `𝐤`-ranks of all truncations.
pub fn oracle_pivots(m: &SparseMatrix, e: Rat) -> Vec<Rat> {
    let mut d = *e.denom();
    for x in m.entries.values() {
        for (t, _) in x.terms() {
            d = num_integer::lcm(d, *t.denom());
        }
    }
    let steps = (e * Rat::from_integer(d)).to_integer();
    let r: Vec<usize> = (0..=steps).map(|s| truncated_rank(m, d, s)).collect();
    let mut out = Vec::new();
    let mut prev = 0;
    for s in 0..steps {
        let at_most = r[s as usize + 1] - r[s as usize];
        for _ in prev..at_most {
            out.push(Rat::new(s, d));
        }
        prev = at_most;
    }
    out
}

/// Bars assembled from oracle pivots.
pub fn oracle_bars(cx: &TruncatedComplex) -> BTreeMap<i64, Vec<(Rat, Rat)>> {
    let e = cx.precision;
    let mut bars: BTreeMap<i64, Vec<(Rat, Rat)>> = cx.dims.keys().map(|&k| (k, Vec::new())).collect();
    let mut paired: BTreeMap<i64, usize> = BTreeMap::new();
    for (&t, m) in &cx.diffs {
        let p = oracle_pivots(m, e);
        *paired.entry(t).or_default() += p.len();
        *paired.entry(t + 1).or_default() += p.len();
        for v in p {
            if !v.is_zero() {
                bars.entry(t + 1).or_default().push((Rat::zero(), v));
            }
        }
    }
    for (&t, &n) in &cx.dims {
        for _ in 0..n - paired.get(&t).copied().unwrap_or(0) {
            bars.entry(t).or_default().push((Rat::zero(), e));
        }
    }
    for v in bars.values_mut() {
        v.sort();
    }
    bars
}

/// The structure sheaf of the Tate curve on the circle atlas.
pub fn tate(atlas: &Atlas) -> TwistedSheaf {
    let u: BTreeMap<(usize, usize), MonomialUnit> = [(0, 1), (1, 2), (0, 2)]
        .into_iter()
        .map(|e| (e, MonomialUnit::one(1)))
        .collect();
    line_bundle_from(atlas, &u)
}

pub fn one() -> Coeff {
    BaseField::Rationals.one()
}

pub fn is_one(c: &BigRational) -> bool {
    c.is_one()
}

/// Rescales every transition by a power of `T` so that it has valuation
/// zero on its chart. Only meaningful without 3-chains.
pub fn normalized(atlas: &Atlas, u: &BTreeMap<(usize, usize), MonomialUnit>) -> BTreeMap<(usize, usize), MonomialUnit> {
    u.iter()
        .map(|(&(i, j), x)| ((i, j), MonomialUnit { lambda: -atlas.min_pairing(j, &x.a), ..x.clone() }))
        .collect()
}
