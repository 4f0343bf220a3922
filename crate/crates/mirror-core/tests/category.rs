mod common;

use common::*;
use mirror_core::affine::Chain;
use mirror_core::affinoid::{AffinoidElement, MonomialUnit, TwistingCocycle};
use mirror_core::category::*;
use mirror_core::fixtures;
use mirror_core::novikov::{BaseField, NovikovScalar};
use mirror_core::rat::{int, Rat};
use proptest::prelude::*;
use std::collections::BTreeMap;

const E: i64 = 8;

fn spec() -> RandomSpec {
    RandomSpec::default()
}

fn check_dg(name: &str, seed: u64) {
    let atlas = twisted_atlas(name, seed);
    let cat = category(&atlas);
    let fam = family(&atlas, seed + 1);
    for s in &fam {
        assert!(cat.validate(s, int(E)).unwrap().ok(), "{name} seed {seed}");
    }
    let mut r = rng(seed);
    let t0 = seed as i64 % 3 - 1;
    let (a, b, c) = (&fam[seed as usize % 3], &fam[(seed as usize + 1) % 3], &fam[(seed as usize + 2) % 3]);
    let t = random_morphism(&cat, a, b, t0, &spec(), &mut r);
    let s = random_morphism(&cat, b, c, 1 - t0, &spec(), &mut r);
    let q = random_morphism(&cat, c, a, 0, &spec(), &mut r);
    t.check(a, b, &atlas).unwrap();

    let dt = cat.mu1(&t, a, b);
    assert_eq!(dt.degree, t.degree + 1);
    dt.check(a, b, &atlas).unwrap();
    assert!(cat.mu1(&dt, a, b).vanishes_below(&atlas, int(E)), "μ¹μ¹ on {name} seed {seed}");

    let st = cat.mu2(&s, &t);
    assert_eq!(st.degree, s.degree + t.degree);
    let lhs = cat.mu1(&st, a, c);
    let sign = BaseField::Rationals.sign(s.degree);
    let rhs = cat.mu2(&cat.mu1(&s, b, c), &t).add(&cat.mu2(&s, &dt).scaled(&sign));
    assert!(lhs.sub(&rhs).vanishes_below(&atlas, int(E)), "Leibniz on {name} seed {seed}");

    let left = cat.mu2(&cat.mu2(&q, &s), &t);
    let right = cat.mu2(&q, &cat.mu2(&s, &t));
    assert!(left.sub(&right).vanishes_below(&atlas, int(E)), "associativity on {name} seed {seed}");
}

#[test]
fn dg_identities_circle() {
    for seed in 0..20 {
        check_dg("circle", seed);
    }
}

#[test]
fn dg_identities_torus() {
    for seed in 0..20 {
        check_dg("torus", 100 + seed);
    }
}

#[test]
fn dg_identities_triangle() {
    for seed in 0..10 {
        check_dg("triangle", 200 + seed);
    }
}

#[test]
fn identity_is_unit() {
    let atlas = twisted_atlas("torus", 7);
    let cat = category(&atlas);
    let fam = family(&atlas, 8);
    let t = random_morphism(&cat, &fam[2], &fam[0], 0, &spec(), &mut rng(3));
    assert_eq!(cat.mu2(&cat.identity(&fam[0]), &t), t);
    assert_eq!(cat.mu2(&t, &cat.identity(&fam[2])), t);
    for s in &fam {
        assert!(cat.mu1(&cat.identity(s), s, s).is_zero());
    }
}

#[test]
fn zero_object_validates() {
    let atlas = fixtures::torus();
    let cat = category(&atlas);
    assert!(cat.validate(&TwistedSheaf::zero(&atlas), int(4)).unwrap().ok());
}

#[test]
fn solved_line_bundle_is_valid() {
    for seed in 0..10 {
        let atlas = twisted_atlas("triangle", seed);
        let cat = category(&atlas);
        let u = solve_line_bundle(&atlas).unwrap();
        for c in atlas.chains(3).into_iter().filter(|c| c.len() == 3) {
            let (i, j, k) = (c.0[0], c.0[1], c.0[2]);
            let rhs = cat.alpha.get(i, j, k).mul(&u[&(j, k)]).mul(&u[&(i, j)].restrict(&atlas, j, k));
            assert_eq!(u[&(i, k)], rhs);
        }
        assert!(line_bundle(&cat, &u, int(E)).is_ok());
    }
}

#[test]
fn trivial_transitions_with_trivial_cocycle() {
    let atlas = fixtures::triangle();
    let cat = Category::new(&atlas, TwistingCocycle::trivial(&atlas));
    let u: BTreeMap<_, _> = [(0, 1), (1, 2), (0, 2)].into_iter().map(|e| (e, MonomialUnit::one(2))).collect();
    assert!(line_bundle(&cat, &u, int(E)).is_ok());
}

#[test]
fn perturbed_transition_fails_at_valuation_one() {
    let atlas = twisted_atlas("triangle", 4);
    let cat = category(&atlas);
    let u = solve_line_bundle(&atlas).unwrap();
    let mut s = line_bundle_from(&atlas, &u);
    let c01 = Chain(vec![0, 1]);
    let m = s.maps.get_mut(&c01).unwrap();
    let x = m.get(0, 0).unwrap().clone();
    let mut y = x.clone();
    y.add_scaled(&x, &one(), int(1), &[0, 0]);
    m.set(0, 0, y);
    let rep = cat.validate(&s, int(E)).unwrap();
    assert_eq!(rep.failures.len(), 1);
    let f = &rep.failures[0];
    assert_eq!(f.chain, vec![0, 1, 2]);
    let u02 = u[&(0, 2)].element(atlas.field, 2);
    assert_eq!(f.valuation, Some(int(1) + u02.valuation(&atlas).unwrap()));
}

#[test]
fn incompatible_units_report_defect() {
    let atlas = twisted_atlas("triangle", 5);
    let cat = category(&atlas);
    let mut u = solve_line_bundle(&atlas).unwrap();
    u.get_mut(&(0, 2)).unwrap().sign ^= 1;
    match line_bundle(&cat, &u, int(E)) {
        Err(SheafError::Invalid(r)) => {
            assert_eq!(r.failures.len(), 1);
            assert!(!r.failures[0].defect.is_empty());
        }
        other => panic!("expected a defect, got {other:?}"),
    }
}

#[test]
fn shape_and_degree_errors() {
    let atlas = fixtures::circle();
    let mut s = tate(&atlas);
    s.maps.get_mut(&Chain(vec![0, 1])).unwrap().rows = 2;
    assert!(matches!(s.check(&atlas), Err(SheafError::Shape(_))));
    let mut s = tate(&atlas);
    let mut m = Mat::zero(1, 1, 0);
    m.set(0, 0, AffinoidElement::constant(0, one(), 1));
    s.maps.insert(Chain(vec![0]), m);
    assert!(matches!(s.check(&atlas), Err(SheafError::Degree(_))));
}

#[test]
fn hom_layout_examples() {
    let atlas = fixtures::circle();
    let cat = category(&atlas);
    let o = tate(&atlas);
    let layout = cat.hom_layout(&o, &o);
    assert_eq!(layout.len(), 6);
    for c in &layout {
        assert_eq!(c.degree, c.chain.len() as i64 - 1);
    }
    assert!(cat.hom_layout(&TwistedSheaf::zero(&atlas), &o).is_empty());
}

#[test]
fn mu1_of_vertex_component_has_no_vertex_part() {
    let atlas = fixtures::circle();
    let cat = category(&atlas);
    let o = tate(&atlas);
    let mut t = SheafMorphism::zero(0);
    let mut m = Mat::zero(1, 1, 1);
    m.set(0, 0, AffinoidElement::monomial(1, one(), int(0), vec![1]));
    t.comps.insert(Chain(vec![1]), m);
    let d = cat.mu1(&t, &o, &o);
    assert!(d.comps.keys().all(|c| c.len() == 2));
    assert!(!d.is_zero());
}

#[test]
fn sheaf_json_round_trip() {
    let atlas = twisted_atlas("torus", 11);
    let fam = family(&atlas, 12);
    for s in &fam {
        let text = serde_json::to_string(&s.to_json(&atlas)).unwrap();
        assert_eq!(&TwistedSheaf::from_json_str(&text, &atlas).unwrap(), s);
    }
}

#[test]
fn sheaf_json_rejects_unknown_vertex() {
    let atlas = fixtures::circle();
    let text = r#"{"modules":[{"vertex":7,"generators":[]}],"maps":[]}"#;
    assert!(matches!(TwistedSheaf::from_json_str(text, &atlas), Err(SheafError::Malformed(_))));
}

fn tate_complex() -> (TruncatedComplex, Barcode) {
    let atlas = fixtures::circle();
    let cat = category(&atlas);
    let o = tate(&atlas);
    let cx = cat.truncated_complex(&o, &o, int(5)).unwrap();
    let b = cat.barcode(&o, &o, int(5)).unwrap();
    (cx, b)
}

#[test]
fn tate_curve_barcode_matches_oracle() {
    let (cx, b) = tate_complex();
    assert_eq!(cx.dims[&0], 3 * 29);
    assert_eq!(b.full_bars(0), 1);
    assert_eq!(b.full_bars(1), 1);
    assert_eq!(b.bars, oracle_bars(&cx));
}

#[test]
fn twisted_line_bundle_barcodes_match_oracle() {
    for seed in 0..3 {
        let atlas = twisted_atlas("circle", 300 + seed);
        let cat = category(&atlas);
        let u = solve_line_bundle(&atlas).unwrap();
        let l = line_bundle_from(&atlas, &normalized(&atlas, &u));
        let l2 = line_bundle_from(&atlas, &normalized(&atlas, &gauged(&atlas, &u, seed)));
        assert!(cat.validate(&l2, int(3)).unwrap().ok());
        let cx = cat.truncated_complex(&l, &l2, int(3)).unwrap();
        assert_eq!(barcode_of(&cx).bars, oracle_bars(&cx), "seed {seed}");
    }
}

#[test]
fn zero_differential_gives_full_bars() {
    let cx = TruncatedComplex {
        precision: int(3),
        dims: BTreeMap::from([(0, 2), (1, 1)]),
        diffs: BTreeMap::from([(0, SparseMatrix { rows: 1, cols: 2, entries: BTreeMap::new() })]),
        warnings: vec![],
    };
    let b = barcode_of(&cx);
    assert_eq!(b.full_bars(0), 2);
    assert_eq!(b.full_bars(1), 1);
}

#[test]
fn single_entry_gives_finite_bar() {
    let mut entries = BTreeMap::new();
    entries.insert((0, 0), NovikovScalar::t_pow(BaseField::Rationals, int(2)));
    let cx = TruncatedComplex {
        precision: int(5),
        dims: BTreeMap::from([(0, 1), (1, 1)]),
        diffs: BTreeMap::from([(0, SparseMatrix { rows: 1, cols: 1, entries })]),
        warnings: vec![],
    };
    let b = barcode_of(&cx);
    assert_eq!(b.bars[&1], vec![(int(0), int(2))]);
    assert_eq!(b.full_bars(0) + b.full_bars(1), 0);
    assert!(b.warnings.is_empty());
    assert_eq!(b.to_json(), serde_json::json!({"0": [], "1": [["0", "2"]]}));
}

#[test]
fn barcode_warns_on_deep_pivot() {
    let mut entries = BTreeMap::new();
    entries.insert((0, 0), NovikovScalar::t_pow(BaseField::Rationals, int(4)));
    let cx = TruncatedComplex {
        precision: int(5),
        dims: BTreeMap::from([(0, 1), (1, 1)]),
        diffs: BTreeMap::from([(0, SparseMatrix { rows: 1, cols: 1, entries })]),
        warnings: vec![],
    };
    assert_eq!(barcode_of(&cx).warnings.len(), 1);
}

#[test]
fn barcode_permutation_invariant() {
    let atlas = fixtures::circle();
    let cat = category(&atlas);
    let mut u: BTreeMap<_, _> = [(0, 1), (1, 2), (0, 2)].into_iter().map(|e| (e, MonomialUnit::one(1))).collect();
    let o = line_bundle_from(&atlas, &u);
    u.get_mut(&(0, 1)).unwrap().a = vec![1];
    let l = line_bundle_from(&atlas, &normalized(&atlas, &u));
    let s = direct_sum(&o, &l);
    let swapped = s.permuted(&vec![vec![1, 0]; 3]);
    assert_ne!(s, swapped);
    let e = int(3);
    assert!(matches!(
        cat.truncated_complex(&line_bundle_from(&atlas, &u), &o, e),
        Err(SheafError::Lattice(_))
    ));
    let b1 = cat.barcode(&s, &s, e).unwrap();
    let b2 = cat.barcode(&swapped, &swapped, e).unwrap();
    assert_eq!(b1.bars, b2.bars);
}

#[test]
fn barcode_gauge_invariant() {
    let atlas = fixtures::circle();
    let cat = category(&atlas);
    let o = tate(&atlas);
    let c = [2i64, -3, 5];
    let mut g = o.clone();
    for (ch, m) in g.maps.iter_mut() {
        let (i, j) = (ch.0[0], ch.0[1]);
        let f = BaseField::Rationals.from_rat(&Rat::new(c[j], c[i]));
        let mut n = Mat::zero(1, 1, j);
        n.add_scaled(m, &f, &MonomialUnit::one(1));
        *m = n;
    }
    assert!(cat.validate(&g, int(5)).unwrap().ok());
    assert_eq!(cat.barcode(&o, &o, int(5)).unwrap().bars, cat.barcode(&g, &g, int(5)).unwrap().bars);
    assert_eq!(cat.barcode(&o, &o, int(5)).unwrap().bars, cat.barcode(&o, &g, int(5)).unwrap().bars);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]
    #[test]
    fn mu1_squares_to_zero(seed in 0u64..10_000, t in -1i64..=2) {
        let atlas = twisted_atlas("triangle", seed);
        let cat = category(&atlas);
        let fam = family(&atlas, seed);
        let mut r = rng(seed);
        let x = random_morphism(&cat, &fam[2], &fam[(seed % 3) as usize], t, &spec(), &mut r);
        let (a, b) = (&fam[2], &fam[(seed % 3) as usize]);
        let d = cat.mu1(&x, a, b);
        prop_assert_eq!(d.degree, t + 1);
        prop_assert!(cat.mu1(&d, a, b).is_zero());
    }

    #[test]
    fn gauge_preserves_validity(seed in 0u64..10_000) {
        let atlas = twisted_atlas("torus", seed);
        let cat = category(&atlas);
        let u = solve_line_bundle(&atlas).unwrap();
        let v = gauged(&atlas, &u, seed ^ 0x55);
        prop_assert!(line_bundle(&cat, &v, int(E)).is_ok());
    }
}

#[test]
fn pivot_valuations_are_exact_on_grid() {
    let f = BaseField::Rationals;
    let mut entries = BTreeMap::new();
    entries.insert((0, 0), NovikovScalar::t_pow(f, Rat::new(1, 3)));
    entries.insert((0, 1), NovikovScalar::t_pow(f, int(1)));
    entries.insert((1, 1), NovikovScalar::t_pow(f, Rat::new(2, 3)));
    let m = SparseMatrix { rows: 2, cols: 2, entries };
    assert_eq!(pivot_valuations(&m, int(2)), oracle_pivots(&m, int(2)));
}
