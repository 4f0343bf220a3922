mod common;

use common::rng;
use mirror_core::affine::{Atlas, Chain};
use mirror_core::category::*;
use mirror_core::fixtures;
use mirror_core::functor::*;
use mirror_core::novikov::NovikovScalar;
use mirror_core::rat::Rat;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use std::collections::BTreeMap;

fn r(n: i64) -> Rat {
    Rat::from_integer(n)
}

fn precision() -> Rat {
    r(4)
}

#[derive(Default)]
struct E {
    chain: Vec<i64>,
    brane: Option<&'static str>,
    input: Option<&'static str>,
    out: Option<&'static str>,
    floer: Option<&'static str>,
    inputs: Option<Vec<&'static str>>,
    energy: Rat,
    boundary: Option<Vec<i64>>,
    count: &'static str,
}

fn entry(family: Family, e: E) -> CountEntry {
    CountEntry {
        family,
        chain: e.chain,
        brane: e.brane.map(String::from),
        labels: Labels {
            input: e.input.map(String::from),
            out: e.out.map(String::from),
            floer: e.floer.map(String::from),
            inputs: e.inputs.map(|v| v.into_iter().map(String::from).collect()),
        },
        energy: e.energy,
        boundary: e.boundary,
        count: e.count.into(),
    }
}

fn point(label: &str, degree: i64) -> Point {
    Point { label: label.into(), degree, gradient: vec![], value: Rat::from_integer(0) }
}

/// One point of the given degree per vertex, on `L` only.
fn single_brane(atlas: &Atlas, degree: i64, floer: &[(&str, i64)]) -> IntersectionData {
    let pts = (0..atlas.n_vertices()).map(|i| vec![point(&format!("p{}", atlas.id(i)), degree)]).collect();
    IntersectionData {
        branes: BTreeMap::from([(SOURCE.to_string(), pts)]),
        floer: floer.iter().map(|(l, d)| Generator { label: l.to_string(), degree: *d }).collect(),
    }
}

fn identity(name: &str) -> (Atlas, IntersectionData, Vec<CountEntry>) {
    let a = fixtures::by_name(name).unwrap();
    let (d, e) = identity_ledger(&a, composition_sign_for(a.dimension)).unwrap();
    (a, d, e)
}

#[test]
fn empty_ledger_passes() {
    let a = fixtures::interval();
    let f = FunctorData::new(&a, single_brane(&a, 0, &[]), vec![], precision()).unwrap();
    let rep = f.check_all(1).unwrap();
    assert!(rep.ok(), "{rep:?}");
    assert_eq!(rep.ledger.checked, 0);
}

#[test]
fn strip_between_equal_degrees_is_rejected() {
    let a = fixtures::interval();
    let strip = entry(Family::Strip, E { chain: vec![0], input: Some("p0"), out: Some("p0"), count: "1", ..E::default() });
    let f = FunctorData::new(&a, single_brane(&a, 0, &[]), vec![strip], precision()).unwrap();
    let rep = f.check_all(1).unwrap();
    assert!(!rep.ok());
    assert_eq!(rep.ledger.failures.len(), 1);
    assert_eq!(rep.ledger.failures[0].family, Family::Strip);
    assert!(rep.ledger.failures[0].reason.contains("degree filter"), "{}", rep.ledger.failures[0].reason);
    // Rejected entries do not reach the evaluators.
    assert!(f.sheaf(SOURCE).unwrap().maps.is_empty());
}

#[test]
fn input_on_an_edge_with_all_degrees_zero_is_rejected() {
    let a = fixtures::interval();
    let e = entry(
        Family::Input,
        E { chain: vec![0, 1], input: Some("p0"), out: Some("p1"), floer: Some("x"), count: "1", ..E::default() },
    );
    let f = FunctorData::new(&a, single_brane(&a, 0, &[("x", 0)]), vec![e], precision()).unwrap();
    let fails = &f.ledger_report().failures;
    assert_eq!(fails.len(), 1);
    assert!(fails[0].reason.contains("= 1"), "{}", fails[0].reason);
    // Same entry on a vertex is admissible.
    let ok = entry(Family::Input, E { chain: vec![0], input: Some("p0"), out: Some("p0"), floer: Some("x"), count: "1", ..E::default() });
    let f = FunctorData::new(&a, single_brane(&a, 0, &[("x", 0)]), vec![ok], precision()).unwrap();
    assert!(f.ledger_report().failures.is_empty());
}

#[test]
fn malformed_entries_are_reported() {
    let a = fixtures::circle();
    let data = single_brane(&a, 0, &[("x", 0)]);
    let d = a.effective_denominator();
    let base = E { chain: vec![0], input: Some("p0"), out: Some("p0"), floer: Some("x"), count: "1", ..E::default() };
    let cases = vec![
        entry(Family::Input, E { energy: r(-1), ..base_clone(&base) }),
        entry(Family::Input, E { energy: Rat::new(1, 7 * d), ..base_clone(&base) }),
        entry(Family::Input, E { floer: Some("nope"), ..base_clone(&base) }),
        entry(Family::Input, E { chain: vec![0, 0], ..base_clone(&base) }),
        entry(Family::Input, E { boundary: Some(vec![0, 0]), ..base_clone(&base) }),
        entry(Family::Disc, E { inputs: Some(vec![]), out: Some("x"), ..E::default() }),
        entry(Family::Strip, E { chain: vec![0, 1], input: Some("p0"), out: Some("p1"), count: "1", ..E::default() }),
    ];
    let n = cases.len();
    let f = FunctorData::new(&a, data, cases, precision()).unwrap();
    let idx: Vec<usize> = f.ledger_report().failures.iter().map(|x| x.index).collect();
    assert_eq!(idx, (0..n).collect::<Vec<_>>());
}

fn base_clone(e: &E) -> E {
    E {
        chain: e.chain.clone(),
        brane: e.brane,
        input: e.input,
        out: e.out,
        floer: e.floer,
        inputs: e.inputs.clone(),
        energy: e.energy,
        boundary: e.boundary.clone(),
        count: e.count,
    }
}

#[test]
fn identity_ledgers_have_no_residuals() {
    for name in ["interval", "triangle", "circle", "torus", "tetrahedron"] {
        let (a, d, e) = identity(name);
        let f = FunctorData::new(&a, d, e, precision()).unwrap();
        let rep = f.check_all(composition_sign_for(a.dimension)).unwrap();
        assert!(rep.ok(), "{name}: {:?}", rep.residuals.first());
    }
}

#[test]
fn identity_ledger_generators_follow_cohomology() {
    let degrees = |name: &str| identity(name).1.floer.iter().map(|g| g.degree).collect::<Vec<_>>();
    assert_eq!(degrees("interval"), vec![0]);
    assert_eq!(degrees("circle"), vec![0, 1]);
    assert_eq!(degrees("torus"), vec![0, 1, 1, 2]);
    assert_eq!(degrees("tetrahedron"), vec![0]);
}

#[test]
fn composition_sign_depends_on_dimension() {
    assert_eq!(composition_sign_for(1), 1);
    assert_eq!(composition_sign_for(2), -1);
    assert_eq!(composition_sign_for(3), -1);
    assert_eq!(composition_sign_for(4), 1);
    for name in ["circle", "torus"] {
        let (a, d, e) = identity(name);
        let s = composition_sign_for(a.dimension);
        let f = FunctorData::new(&a, d, e, precision()).unwrap();
        assert_eq!(f.composition_sign(), s);
        assert!(f.composition_residuals(s).is_empty());
        let wrong = f.composition_residuals(-s);
        assert_eq!(wrong.len(), f.data.floer.len(), "{name}");
        for x in &wrong {
            assert_eq!(x.valuation, Some(r(0)));
            assert_eq!(x.defect.len(), 1);
        }
    }
}

#[test]
fn annulus_homotopy_enters_composition() {
    // d a = b, h b = a: dh + hd is the identity, so 0 ≃ −Id.
    let a = fixtures::interval();
    let data = single_brane(&a, 0, &[("a", 0), ("b", 1)]);
    let entries = vec![
        entry(Family::Disc, E { inputs: Some(vec!["a"]), out: Some("b"), count: "1", ..E::default() }),
        entry(Family::Annulus, E { input: Some("b"), out: Some("a"), count: "1", ..E::default() }),
    ];
    let f = FunctorData::new(&a, data, entries, precision()).unwrap();
    assert!(f.ledger_report().failures.is_empty());
    assert!(f.composition_residuals(-1).is_empty());
    let res = f.composition_residuals(1);
    assert_eq!(res.len(), 2);
    assert_eq!(res[0].defect, vec!["a: -2*T^{0}".to_string()]);
    assert_eq!(res[1].defect, vec!["b: -2*T^{0}".to_string()]);
}

/// Relations for `μ¹a = c·b`, `μ²(a,a) = a`, `μ²(b,a) = x·b`, `μ²(a,b) = y·b`:
/// by hand, `(a,a) ↦ c(1+y−x)b`, `(b,a,a) ↦ (x−x²)b`, `(a,a,b) ↦ (y²+y)b`,
/// every other tuple vanishes.
fn floer_oracle(c: i64, x: i64, y: i64) -> BTreeMap<Vec<String>, i64> {
    let mut m = BTreeMap::new();
    let v = |s: &[&str]| s.iter().map(|x| x.to_string()).collect::<Vec<_>>();
    for (k, val) in [(v(&["a", "a"]), c * (1 + y - x)), (v(&["b", "a", "a"]), x - x * x), (v(&["a", "a", "b"]), y * y + y)] {
        if val != 0 {
            m.insert(k, val);
        }
    }
    m
}

#[test]
fn floer_relations_match_hand_computation() {
    let a = fixtures::interval();
    for (c, x, y) in [(1, 1, 0), (1, 0, -1), (1, 2, 0), (3, 1, 1), (2, -1, 2)] {
        let (cs, xs, ys) = (c.to_string(), x.to_string(), y.to_string());
        let leak = |s: String| -> &'static str { Box::leak(s.into_boxed_str()) };
        let mut entries = vec![
            entry(Family::Disc, E { inputs: Some(vec!["a"]), out: Some("b"), count: leak(cs), energy: r(1), ..E::default() }),
            entry(Family::Disc, E { inputs: Some(vec!["a", "a"]), out: Some("a"), count: "1", ..E::default() }),
        ];
        if x != 0 {
            entries.push(entry(Family::Disc, E { inputs: Some(vec!["b", "a"]), out: Some("b"), count: leak(xs), ..E::default() }));
        }
        if y != 0 {
            entries.push(entry(Family::Disc, E { inputs: Some(vec!["a", "b"]), out: Some("b"), count: leak(ys), ..E::default() }));
        }
        let f = FunctorData::new(&a, single_brane(&a, 0, &[("a", 0), ("b", 1)]), entries, precision()).unwrap();
        assert!(f.ledger_report().failures.is_empty());
        let got: BTreeMap<Vec<String>, String> =
            f.ainfty_relations(3).into_iter().map(|res| (res.generators, res.defect.join(";"))).collect();
        let want = floer_oracle(c, x, y);
        assert_eq!(got.keys().collect::<Vec<_>>(), want.keys().collect::<Vec<_>>(), "c={c} x={x} y={y}");
        for (k, v) in want {
            // (a,a) carries the energy of μ¹.
            let e = if k.len() == 2 { 1 } else { 0 };
            assert_eq!(got[&k], format!("b: {v}*T^{{{e}}}"));
        }
    }
}

#[test]
fn one_generator_algebra() {
    let a = fixtures::interval();
    for count in ["1", "2", "-5/3"] {
        let e = entry(Family::Disc, E { inputs: Some(vec!["e", "e"]), out: Some("e"), count, ..E::default() });
        let f = FunctorData::new(&a, single_brane(&a, 0, &[("e", 0)]), vec![e], precision()).unwrap();
        assert!(f.ainfty_relations(3).is_empty());
    }
    let bad = entry(Family::Disc, E { inputs: Some(vec!["e"]), out: Some("e"), count: "1", ..E::default() });
    let f = FunctorData::new(&a, single_brane(&a, 0, &[("e", 0)]), vec![bad], precision()).unwrap();
    assert_eq!(f.ledger_report().failures.len(), 1);
}

/// Is `a ∪ b` a chain of the atlas?
fn compatible(atlas: &Atlas, a: &Chain, b: &Chain) -> bool {
    let mut v: Vec<usize> = a.iter().chain(b.iter()).collect();
    v.sort();
    v.dedup();
    atlas.is_chain(&Chain(v))
}

fn chain_of(atlas: &Atlas, ids: &[i64]) -> Chain {
    Chain(ids.iter().map(|i| atlas.index_of(*i).unwrap()).collect())
}

/// Whether a residual can be caused by deleting `e`.
fn attributable(atlas: &Atlas, e: &CountEntry, res: &Residual) -> bool {
    let k = chain_of(atlas, &e.chain);
    let rc = res.chain.as_ref().map(|c| chain_of(atlas, c));
    let contains_k = || rc.as_ref().is_some_and(|c| k.is_subset(c));
    let floer = e.labels.floer.clone().unwrap_or_default();
    match e.family {
        Family::Strip | Family::Continuation => {
            let b = e.brane();
            match res.check.as_str() {
                "sheaf L" => b == SOURCE && contains_k(),
                "sheaf L'" => b == TARGET && contains_k(),
                "cech chain map" => contains_k(),
                "floer map chain map" => compatible(atlas, rc.as_ref().unwrap(), &k),
                c if c.starts_with("A∞ functor") => b == SOURCE && contains_k(),
                _ => false,
            }
        }
        Family::Input => {
            (res.check == "cech chain map" && contains_k() && res.generators == vec![floer.clone()])
                || (res.check == "composition" && res.generators == vec![floer])
        }
        Family::Output => {
            (res.check == "floer map chain map" && rc.as_ref().unwrap().is_subset(&k))
                || (res.check == "composition" && res.defect.iter().all(|x| x.starts_with(&format!("{floer}:"))))
        }
        Family::DiscK => res.check.starts_with("A∞ functor") && contains_k(),
        Family::Disc => res.check.starts_with("A∞"),
        Family::Annulus => res.check == "composition",
    }
}

#[test]
fn deletions_are_detected_and_localized() {
    let (a, d, e) = identity("torus");
    let s = composition_sign_for(a.dimension);
    let mut order: Vec<usize> = (0..e.len()).collect();
    order.shuffle(&mut rng(2024));
    let mut missed = Vec::new();
    for &i in order.iter().take(50) {
        let mut fewer = e.clone();
        let gone = fewer.remove(i);
        let f = FunctorData::new(&a, d.clone(), fewer, precision()).unwrap();
        let rep = f.check_all(s).unwrap();
        assert!(rep.ledger.failures.is_empty());
        if rep.residuals.is_empty() {
            missed.push(gone.clone());
        }
        for res in &rep.residuals {
            assert!(attributable(&a, &gone, res), "deleting {gone:?} produced {res:?}");
        }
    }
    assert!(missed.is_empty(), "undetected deletions: {missed:?}");
}

/// Random extra count of the given family scaled by `k`.
fn scale_counts(e: &[CountEntry], family: Family, k: i64) -> Vec<CountEntry> {
    e.iter()
        .map(|x| {
            let mut y = x.clone();
            if y.family == family {
                let c: Rat = y.count.parse::<Rat>().unwrap() * r(k);
                y.count = mirror_core::rat::fmt_rat(&c);
            }
            y
        })
        .collect()
}

/// Identity ledger with one continuation of `L` removed so that the
/// chain-map residual of `𝒞` is nonzero.
fn broken_circle() -> (Atlas, IntersectionData, Vec<CountEntry>) {
    let (a, d, mut e) = identity("circle");
    let pos = e.iter().position(|x| x.family == Family::Continuation && x.brane() == SOURCE).unwrap();
    e.remove(pos);
    (a, d, e)
}

#[test]
fn cech_defect_is_linear_in_input_counts() {
    let (a, d, e) = broken_circle();
    let base = FunctorData::new(&a, d.clone(), e.clone(), precision()).unwrap();
    let cat = base.category();
    let (src, dst) = (base.sheaf(SOURCE).unwrap(), base.sheaf(TARGET).unwrap());
    let tripled = FunctorData::new(&a, d.clone(), scale_counts(&e, Family::Input, 3), precision()).unwrap();
    // Split the input entries into two halves.
    let inputs: Vec<usize> = (0..e.len()).filter(|&i| e[i].family == Family::Input).collect();
    let (left, right): (Vec<usize>, Vec<usize>) = inputs.iter().partition(|&&i| i % 2 == 0);
    let without = |drop: &[usize]| -> Vec<CountEntry> {
        e.iter().enumerate().filter(|(i, _)| !drop.contains(i)).map(|(_, x)| x.clone()).collect()
    };
    let fl = FunctorData::new(&a, d.clone(), without(&right), precision()).unwrap();
    let fr = FunctorData::new(&a, d.clone(), without(&left), precision()).unwrap();
    let mut nonzero = 0;
    for k in 0..d.floer.len() {
        let x = base.cech_defect(&cat, &src, &dst, k);
        nonzero += usize::from(!x.is_zero());
        let three = a.field.from_i64(3);
        assert_eq!(tripled.cech_defect(&cat, &src, &dst, k), x.scaled(&three));
        let sum = fl.cech_defect(&cat, &src, &dst, k).add(&fr.cech_defect(&cat, &src, &dst, k));
        assert_eq!(sum, x);
    }
    assert!(nonzero > 0);
}

#[test]
fn floer_map_is_linear_in_output_counts() {
    let (a, d, e) = identity("torus");
    let f1 = FunctorData::new(&a, d.clone(), e.clone(), precision()).unwrap();
    let f2 = FunctorData::new(&a, d.clone(), scale_counts(&e, Family::Output, -2), precision()).unwrap();
    let cat = f1.category();
    let (src, dst) = (f1.sheaf(SOURCE).unwrap(), f1.sheaf(TARGET).unwrap());
    let mut g = rng(5);
    for t in 0..3 {
        let m = random_morphism(&cat, &src, &dst, t, &RandomSpec::default(), &mut g);
        let p1 = f1.floer_map(&m);
        let p2 = f2.floer_map(&m);
        let scaled: BTreeMap<usize, NovikovScalar> =
            p1.iter().map(|(k, v)| (*k, v.scale(&a.field.from_i64(-2)))).collect();
        assert_eq!(p2, scaled);
    }
}

#[test]
fn d1_functor_equation_is_signed_chain_map_residual() {
    // Single brane: the d = 1 components of the functor are the input counts.
    // Drop the input and d = 1 counts of h0 on one vertex so 𝒞(h0) is no cocycle.
    let (a, mut d, e) = identity("circle");
    d.branes.remove(TARGET);
    let hit = |x: &CountEntry| {
        x.chain == vec![0]
            && (x.labels.floer.as_deref() == Some("h0") || x.labels.inputs.as_deref() == Some(&["h0".to_string()][..]))
    };
    let e: Vec<CountEntry> = e.into_iter().filter(|x| x.brane() != TARGET && !hit(x)).collect();
    let f = FunctorData::new(&a, d.clone(), e, precision()).unwrap();
    let cat = f.category();
    let s = f.sheaf(SOURCE).unwrap();
    let mut nonzero = 0;
    for k in 0..d.floer.len() {
        let c = f.cech_defect(&cat, &s, &s, k);
        let a1 = f.functor_defect(&cat, &s, &[k]);
        assert_eq!(a1, c.scaled(&a.field.sign(d.floer[k].degree)));
        nonzero += usize::from(!c.is_zero());
    }
    assert!(nonzero > 0);
}

/// Output counts with nonzero boundary classes and energies on random chains.
fn output_ledger(a: &Atlas, seed: u64) -> Vec<CountEntry> {
    let (_, d, _) = identity("torus");
    let label = |deg: i64| d.floer.iter().find(|g| g.degree == deg).unwrap().label.clone();
    let mut g = rng(seed);
    let chains = a.all_chains();
    let mut out = Vec::new();
    for _ in 0..12 {
        use rand::Rng;
        let c = chains.choose(&mut g).unwrap();
        let ids: Vec<i64> = c.iter().map(|i| a.id(i)).collect();
        let p = |i: usize| Box::leak(format!("p{}", a.id(i)).into_boxed_str()) as &'static str;
        let fl = Box::leak(label(c.len() as i64 - 1).into_boxed_str()) as &'static str;
        out.push(entry(
            Family::Output,
            E {
                chain: ids,
                input: Some(p(Chain::min(c))),
                out: Some(p(Chain::max(c))),
                floer: Some(fl),
                energy: r(g.gen_range(0..3)),
                boundary: Some(vec![g.gen_range(-1..=1), g.gen_range(-1..=1)]),
                count: ["1", "-1", "2"][g.gen_range(0..3)],
                ..E::default()
            },
        ));
    }
    out
}

#[test]
fn floer_map_is_chart_independent() {
    let a = fixtures::torus();
    let (_, d, _) = identity("torus");
    for seed in 0..5 {
        let f = FunctorData::new(&a, d.clone(), output_ledger(&a, seed), precision()).unwrap();
        assert!(f.ledger_report().failures.is_empty(), "{:?}", f.ledger_report().failures);
        let cat = f.category();
        let (src, dst) = (f.sheaf(SOURCE).unwrap(), f.sheaf(TARGET).unwrap());
        let chains = a.all_chains();
        // For every chain pick the largest vertex of some chain containing it.
        let far = |c: &Chain| -> usize {
            chains.iter().filter(|j| c.is_subset(j)).map(|j| Chain::max(j)).max().unwrap()
        };
        let mut g = rng(100 + seed);
        for t in 0..3 {
            let m = random_morphism(&cat, &src, &dst, t, &RandomSpec::default(), &mut g);
            assert_eq!(f.floer_map(&m), f.floer_map_in(&m, &far), "seed {seed} t {t}");
        }
    }
}

#[test]
fn single_output_count_selects_its_class() {
    let a = fixtures::torus();
    let (_, d, _) = identity("torus");
    let gamma = vec![1, 0];
    let e = entry(
        Family::Output,
        E {
            chain: vec![0],
            input: Some("p0"),
            out: Some("p0"),
            floer: Some("h0"),
            energy: r(2),
            boundary: Some(gamma.clone()),
            count: "3",
            ..E::default()
        },
    );
    let f = FunctorData::new(&a, d, vec![e], precision()).unwrap();
    let mut n_hits = 0;
    for (c, _, _, g, t) in f.probes().unwrap() {
        let p = f.floer_map(&t);
        if c == Chain(vec![0]) && g == gamma {
            n_hits += 1;
            assert_eq!(p.len(), 1);
            assert_eq!(p[&0], NovikovScalar::monomial(a.field.from_i64(3), r(2)));
        } else {
            assert!(p.is_empty(), "chain {c:?} class {g:?}");
        }
    }
    assert_eq!(n_hits, 1);
}

#[test]
fn counts_file_round_trip() {
    let (a, d, e) = identity("torus");
    let f = FunctorData::new(&a, d, e, precision()).unwrap();
    let text = serde_json::to_string_pretty(&f.to_json()).unwrap();
    let g = FunctorData::from_json_str(&a, &text, None, precision()).unwrap();
    assert_eq!(g.data, f.data);
    assert_eq!(g.entries, f.entries);
    // A bare list needs the intersection data separately.
    let bare = serde_json::to_string(&f.entries).unwrap();
    assert!(FunctorData::from_json_str(&a, &bare, None, precision()).is_err());
    let inter = serde_json::to_string(&f.data.to_json(&a)).unwrap();
    let h = FunctorData::from_json_str(&a, &bare, Some(&inter), precision()).unwrap();
    assert_eq!(h.entries, f.entries);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn floer_map_is_additive(seed in 0u64..10_000) {
        let a = fixtures::torus();
        let (_, d, _) = identity("torus");
        let f = FunctorData::new(&a, d, output_ledger(&a, seed), precision()).unwrap();
        let cat = f.category();
        let (src, dst) = (f.sheaf(SOURCE).unwrap(), f.sheaf(TARGET).unwrap());
        let mut g = rng(seed);
        let t = (seed % 3) as i64;
        let m1 = random_morphism(&cat, &src, &dst, t, &RandomSpec::default(), &mut g);
        let m2 = random_morphism(&cat, &src, &dst, t, &RandomSpec::default(), &mut g);
        let mut sum = f.floer_map(&m1);
        for (k, v) in f.floer_map(&m2) {
            let x = sum.remove(&k).map_or(v.clone(), |u| u.add(&v));
            if !x.is_zero() {
                sum.insert(k, x);
            }
        }
        prop_assert_eq!(f.floer_map(&m1.add(&m2)), sum);
    }

    #[test]
    fn rescaling_all_counts_of_a_family_scales_relation_residuals(k in 2i64..5) {
        // Relations of μ² alone are homogeneous of degree 2 in the counts.
        let a = fixtures::interval();
        let e = vec![entry(Family::Disc, E { inputs: Some(vec!["a", "a"]), out: Some("a"), count: "1", ..E::default() }),
                     entry(Family::Disc, E { inputs: Some(vec!["b", "a"]), out: Some("b"), count: "2", ..E::default() })];
        let data = single_brane(&a, 0, &[("a", 0), ("b", 1)]);
        let f1 = FunctorData::new(&a, data.clone(), e.clone(), precision()).unwrap();
        let f2 = FunctorData::new(&a, data, scale_counts(&e, Family::Disc, k), precision()).unwrap();
        let r1 = f1.ainfty_relations(3);
        let r2 = f2.ainfty_relations(3);
        prop_assert_eq!(r1.len(), 1);
        prop_assert_eq!(r2.len(), 1);
        // (b,a,a): x − x² with x = 2 for counts 1 and 2; k² (x − x²) after rescaling both μ² counts by k.
        prop_assert_eq!(&r1[0].defect[0], "b: -2*T^{0}");
        prop_assert_eq!(r2[0].defect[0].clone(), format!("b: {}*T^{{0}}", -2 * k * k));
    }
}

/// Gradients `g_i` with `df_ij − g_j + g_i` integral, by a spanning forest.
fn primitive_gradients(a: &Atlas) -> Vec<Vec<Rat>> {
    let n = a.dimension;
    let mut g: Vec<Option<Vec<Rat>>> = vec![None; a.n_vertices()];
    g[0] = Some(vec![r(0); n]);
    let edges: Vec<Chain> = a.all_chains().into_iter().filter(|c| c.len() == 2).collect();
    let mut changed = true;
    while changed {
        changed = false;
        for c in &edges {
            let (i, j) = (Chain::min(c), Chain::max(c));
            let df = a.section(i, j).gradient;
            match (g[i].clone(), g[j].clone()) {
                (Some(x), None) => {
                    g[j] = Some(x.iter().zip(&df).map(|(p, q)| p + q).collect());
                    changed = true;
                }
                (None, Some(y)) => {
                    g[i] = Some(y.iter().zip(&df).map(|(p, q)| p - q).collect());
                    changed = true;
                }
                _ => {}
            }
        }
    }
    g.into_iter().map(|x| x.unwrap()).collect()
}

#[test]
fn continuation_prefactors_solve_the_twisted_equation() {
    for name in ["circle", "torus", "tetrahedron"] {
        for seed in 0..4 {
            let mut a = fixtures::by_name(name).unwrap();
            fixtures::randomize_sections(&mut a, &mut rng(seed));
            let g = primitive_gradients(&a);
            // g_i(q_i) = −3i keeps the rebased energies g_i(q_j) − g_j(q_j) positive.
            let v = |i: usize| r(-3 * i as i64);
            let pts: Vec<Vec<Point>> = (0..a.n_vertices())
                .map(|i| vec![Point { label: "y".into(), degree: 0, gradient: g[i].clone(), value: v(i) }])
                .collect();
            let data = IntersectionData { branes: BTreeMap::from([(SOURCE.to_string(), pts)]), floer: vec![] };
            let entries: Vec<CountEntry> = a
                .all_chains()
                .into_iter()
                .filter(|c| c.len() == 2)
                .map(|c| {
                    let ids: Vec<i64> = c.iter().map(|i| a.id(i)).collect();
                    let (i, j) = (Chain::min(&c), Chain::max(&c));
                    let lift = a.lift(i, j);
                    let energy = v(i) - v(j) + g[i].iter().zip(&lift).map(|(x, y)| x * y).sum::<Rat>();
                    entry(Family::Continuation, E { chain: ids, input: Some("y"), out: Some("y"), count: "1", energy, ..E::default() })
                })
                .collect();
            let f = FunctorData::new(&a, data.clone(), entries.clone(), precision()).unwrap();
            assert!(f.ledger_report().failures.is_empty(), "{:?}", f.ledger_report().failures);
            let s = f.sheaf(SOURCE).unwrap();
            let rep = f.category().validate(&s, precision()).unwrap();
            assert!(rep.ok(), "{name} seed {seed}: {:?}", rep.failures.first());
            assert!(f.sheaf_residuals().unwrap().is_empty());

            // Without the primitives the prefactor is not a monomial.
            let mut flat = data.clone();
            for p in flat.branes.get_mut(SOURCE).unwrap() {
                p[0].gradient.clear();
            }
            let integral = a
                .all_chains()
                .iter()
                .filter(|c| c.len() == 2)
                .all(|c| a.section(Chain::min(c), Chain::max(c)).gradient.iter().all(|x| x.is_integer()));
            let f = FunctorData::new(&a, flat, entries, precision()).unwrap();
            assert_eq!(f.sheaf(SOURCE).is_ok(), integral, "{name} seed {seed}");
        }
    }
}
