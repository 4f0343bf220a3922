use clap::{Args, Parser, Subcommand, ValueEnum};
use mirror_core::adams::{
    adams_path_eval, barycenter, cell_hasse, degenerate_annulus_fibre, singleton_product_check, AdamsCube,
};
use mirror_core::affine::{Atlas, BarycentricChain, Chain};
use mirror_core::affinoid::{cocycle_check, twisting_cocycle, TwistingCocycle};
use mirror_core::category::{solve_line_bundle, line_bundle_from, Category, TwistedSheaf};
use mirror_core::fixtures;
use mirror_core::functor::{composition_sign_for, identity_ledger, CountsJson, FunctorData};
use mirror_core::rat::{fmt_rat, parse_rat, Rat};
use num_traits::{One, Signed};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "mirror", version, about = "Rigid-analytic mirrors of integral affine tori: constructions and checks")]
struct Cli {
    #[command(flatten)]
    cfg: Global,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Global {
    /// Atlas JSON file, or the name of a built-in fixture
    #[arg(long, global = true)]
    atlas: Option<String>,
    /// Sheaf JSON file; for `functor check` with a bare entry list, the intersection data
    #[arg(long, global = true)]
    sheaf: Option<PathBuf>,
    /// Count ledger JSON file
    #[arg(long, global = true)]
    counts: Option<PathBuf>,
    /// Working precision E (rational, positive)
    #[arg(long, global = true, default_value = "5")]
    precision: String,
    /// Exponent lattice denominator D, overriding the atlas
    #[arg(long, global = true)]
    denominator: Option<i64>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Worker threads
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Seed for randomized data; MIRROR_ATLAS_SEED takes precedence
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Dot,
    Text,
}

#[derive(Subcommand)]
enum Cmd {
    /// Chart summary, twisting cocycle and cocycle check
    Build,
    /// Print a built-in atlas as JSON
    Fixture { name: String },
    /// Twisted sheaves: validation, Hom barcodes, line bundles
    #[command(subcommand)]
    Sheaf(SheafCmd),
    /// Adams path samples and cube strata
    #[command(subcommand)]
    Adams(AdamsCmd),
    /// Pairs-barycentric cells and degenerate annuli
    #[command(subcommand)]
    Annuli(AnnuliCmd),
    /// Count ledgers and functor residuals
    #[command(subcommand)]
    Functor(FunctorCmd),
}

#[derive(Subcommand)]
enum SheafCmd {
    /// Check the twisted quadratic equation below the precision
    Validate {
        /// Twist by the inverse cocycle, as for Floer-theoretic sheaves
        #[arg(long)]
        inverse: bool,
    },
    /// Valuation barcode of Hom(F, G)
    Cohomology {
        /// Target sheaf G (defaults to F)
        #[arg(long)]
        target: Option<PathBuf>,
        #[arg(long)]
        inverse: bool,
    },
    /// A line bundle solving the twisted equation with monomial transitions
    LineBundle,
}

#[derive(Subcommand)]
enum AdamsCmd {
    /// Evaluate the Adams path, or draw random samples
    Sample {
        #[arg(long)]
        d: usize,
        /// Comma-separated parameters r_1, …, r_{d−1}
        #[arg(long)]
        r: Option<String>,
        #[arg(long)]
        s: Option<String>,
        /// Number of random samples when --r is absent
        #[arg(long, default_value_t = 10)]
        count: usize,
    },
    /// Strata of a cube with their facets and product decompositions
    Strata {
        /// Plain cube on a chain, e.g. 0,1,2,3
        #[arg(long, conflicts_with = "vk")]
        chain: Option<String>,
        /// Barycentric chain for input/output cubes, e.g. "0;0,1;0,1,2"
        #[arg(long)]
        vk: Option<String>,
        #[arg(long, value_enum, default_value_t = Kind::Input)]
        kind: Kind,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Kind {
    Input,
    Output,
}

#[derive(Subcommand)]
enum AnnuliCmd {
    /// Pairs barycentric cells with their degenerate annulus fibres
    Cells,
}

#[derive(Subcommand)]
enum FunctorCmd {
    /// All residuals of a count ledger
    Check {
        /// Composition sign (defaults to (−1)^{n(n−1)/2})
        #[arg(long, allow_hyphen_values = true)]
        sign: Option<i64>,
    },
    /// Synthetic ledger for the identity functor on a trivially twisted atlas
    Identity,
}

/// Malformed input: exit 2.
struct InputError {
    kind: &'static str,
    message: String,
}

fn bad(kind: &'static str, message: impl ToString) -> InputError {
    InputError { kind, message: message.to_string() }
}

struct Outcome {
    text: String,
    ok: bool,
}

impl Global {
    fn precision(&self) -> Result<Rat, InputError> {
        let e = parse_rat(&self.precision).map_err(|e| bad("precision", e))?;
        if !e.is_positive() {
            return Err(bad("precision", "precision must be positive"));
        }
        Ok(e)
    }

    fn seed(&self) -> Option<u64> {
        std::env::var("MIRROR_ATLAS_SEED").ok().and_then(|s| s.parse().ok()).or(self.seed)
    }

    fn atlas(&self) -> Result<Atlas, InputError> {
        let name = self.atlas.as_ref().ok_or_else(|| bad("usage", "--atlas is required"))?;
        let mut atlas = if std::path::Path::new(name).exists() {
            let text = read(&PathBuf::from(name))?;
            Atlas::from_json_str(&text).map_err(|e| bad("atlas", e))?
        } else {
            fixtures::by_name(name).ok_or_else(|| bad("atlas", format!("no file or fixture named {name}")))?
        };
        if let Some(d) = self.denominator {
            if d < 1 {
                return Err(bad("denominator", "denominator must be at least 1"));
            }
            atlas.lattice_denominator = d;
        }
        if let Some(seed) = self.seed() {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            fixtures::randomize_sections(&mut atlas, &mut rng);
            fixtures::randomize_signs(&mut atlas, &mut rng, true);
        }
        Ok(atlas)
    }

    fn valid_atlas(&self) -> Result<Atlas, InputError> {
        let a = self.atlas()?;
        let rep = a.validate();
        if !rep.ok() {
            let v = &rep.violations[0];
            return Err(bad("atlas", format!("{} at {}: {}", v.kind, v.cell, v.detail)));
        }
        Ok(a)
    }

    fn sheaf(&self, atlas: &Atlas) -> Result<TwistedSheaf, InputError> {
        let p = self.sheaf.as_ref().ok_or_else(|| bad("usage", "--sheaf is required"))?;
        TwistedSheaf::from_json_str(&read(p)?, atlas).map_err(|e| bad("sheaf", e))
    }
}

fn read(p: &PathBuf) -> Result<String, InputError> {
    std::fs::read_to_string(p).map_err(|e| bad("io", format!("{}: {e}", p.display())))
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json values serialize");
    s.push('\n');
    s
}

fn pass(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

fn rats(v: &[Rat]) -> Vec<String> {
    v.iter().map(fmt_rat).collect()
}

fn parse_list(s: &str) -> Result<Vec<Rat>, InputError> {
    s.split(',').map(|x| parse_rat(x.trim()).map_err(|e| bad("argument", e))).collect()
}

fn parse_chain(atlas: Option<&Atlas>, s: &str) -> Result<Chain, InputError> {
    let mut v = Vec::new();
    for x in s.split(',') {
        let id: i64 = x.trim().parse().map_err(|_| bad("argument", format!("not a vertex: {x}")))?;
        let i = match atlas {
            Some(a) => a.index_of(id).ok_or_else(|| bad("argument", format!("unknown vertex {id}")))?,
            None => usize::try_from(id).map_err(|_| bad("argument", format!("not a vertex: {id}")))?,
        };
        v.push(i);
    }
    let c = Chain::new(v);
    if c.len() != s.split(',').count() {
        return Err(bad("argument", "repeated vertex in chain"));
    }
    Ok(c)
}

fn category_for(atlas: &Atlas, inverse: bool) -> Result<Category<'_>, InputError> {
    let alpha = twisting_cocycle(atlas).map_err(|e| bad("atlas", e))?;
    Ok(Category::new(atlas, if inverse { alpha.inverse() } else { alpha }))
}

fn cocycle_json(atlas: &Atlas, c: &TwistingCocycle) -> Value {
    let entries: Vec<Value> = c
        .entries
        .iter()
        .map(|(&(i, j, k), u)| {
            json!({
                "chain": [atlas.id(i), atlas.id(j), atlas.id(k)],
                "sign": u.sign,
                "energy": fmt_rat(&u.lambda),
                "exponent": u.a,
            })
        })
        .collect();
    Value::Array(entries)
}

fn build(g: &Global) -> Result<Outcome, InputError> {
    let atlas = g.atlas()?;
    let e = g.precision()?;
    let validation = atlas.validate();
    let alpha = twisting_cocycle(&atlas).map_err(|x| bad("atlas", x))?;
    let check = cocycle_check(&alpha, &atlas);
    let ok = validation.ok() && check.ok();
    let text = match g.format {
        Format::Json => {
            let charts: Vec<Value> = atlas
                .vertices
                .iter()
                .map(|v| json!({"id": v.id, "basepoint": rats(&v.basepoint), "polytope": v.polytope.iter().map(|p| rats(p)).collect::<Vec<_>>()}))
                .collect();
            pretty(&json!({
                "dimension": atlas.dimension,
                "field": atlas.field.to_string(),
                "precision": fmt_rat(&e),
                "effective_denominator": atlas.effective_denominator(),
                "charts": charts,
                "alpha": cocycle_json(&atlas, &alpha),
                "validation": validation,
                "cocycle": check,
                "ok": ok,
            }))
        }
        Format::Text => {
            let mut s = String::new();
            let _ = writeln!(
                s,
                "atlas: dimension {}, {} vertices, {} simplices, lattice 1/{}",
                atlas.dimension,
                atlas.n_vertices(),
                atlas.simplices.len(),
                atlas.effective_denominator()
            );
            let _ = writeln!(s, "{:<6} {:<20} polytope", "chart", "basepoint");
            for v in &atlas.vertices {
                let poly: Vec<String> = v.polytope.iter().map(|p| format!("({})", rats(p).join(", "))).collect();
                let _ = writeln!(s, "{:<6} {:<20} {}", v.id, format!("({})", rats(&v.basepoint).join(", ")), poly.join(" "));
            }
            for (&(i, j, k), u) in &alpha.entries {
                let _ = writeln!(s, "alpha[{},{},{}] = {}", atlas.id(i), atlas.id(j), atlas.id(k), u);
            }
            for n in &validation.notes {
                let _ = writeln!(s, "note: {n}");
            }
            for v in &validation.violations {
                let _ = writeln!(s, "violation: {} at {}: {}", v.kind, v.cell, v.detail);
            }
            let _ = writeln!(s, "validation: {}", pass(validation.ok()));
            let _ = writeln!(s, "cocycle: {} ({} chains checked)", pass(check.ok()), check.checked);
            s
        }
        Format::Dot => return Err(bad("format", "build has no DOT output")),
    };
    Ok(Outcome { text, ok })
}

fn sheaf(g: &Global, cmd: &SheafCmd) -> Result<Outcome, InputError> {
    let atlas = g.valid_atlas()?;
    let e = g.precision()?;
    match cmd {
        SheafCmd::Validate { inverse } => {
            let f = g.sheaf(&atlas)?;
            let cat = category_for(&atlas, *inverse)?;
            let rep = cat.validate(&f, e).map_err(|x| bad("sheaf", x))?;
            let text = match g.format {
                Format::Json => pretty(&serde_json::to_value(&rep).unwrap()),
                _ => {
                    let mut s = String::new();
                    for x in &rep.failures {
                        let _ = writeln!(s, "chain {:?}: {}", x.chain, x.defect.join(", "));
                    }
                    let _ = writeln!(s, "sheaf: {} ({} chains checked)", pass(rep.ok()), rep.checked);
                    s
                }
            };
            Ok(Outcome { text, ok: rep.ok() })
        }
        SheafCmd::Cohomology { target, inverse } => {
            let f = g.sheaf(&atlas)?;
            let h = match target {
                Some(p) => TwistedSheaf::from_json_str(&read(p)?, &atlas).map_err(|x| bad("sheaf", x))?,
                None => f.clone(),
            };
            let cat = category_for(&atlas, *inverse)?;
            for s in [&f, &h] {
                let rep = cat.validate(s, e).map_err(|x| bad("sheaf", x))?;
                if !rep.ok() {
                    return Ok(Outcome { text: pretty(&json!({"invalid_sheaf": rep})), ok: false });
                }
            }
            let cx = cat.truncated_complex(&f, &h, e).map_err(|x| bad("sheaf", x))?;
            let bc = mirror_core::category::barcode_of(&cx);
            let text = match g.format {
                Format::Json => {
                    let dims: serde_json::Map<String, Value> = cx.dims.iter().map(|(d, n)| (d.to_string(), json!(n))).collect();
                    pretty(&json!({
                        "precision": fmt_rat(&bc.precision),
                        "dims": dims,
                        "bars": bc.to_json(),
                        "warnings": bc.warnings,
                    }))
                }
                _ => {
                    let mut s = String::new();
                    for (d, bars) in &bc.bars {
                        let fin: Vec<String> = bc.finite_bars(*d).iter().map(fmt_rat).collect();
                        let _ = writeln!(
                            s,
                            "degree {d}: rank {}, full bars {}, finite bars [{}]",
                            cx.dims[d],
                            bc.full_bars(*d),
                            fin.join(", ")
                        );
                        let _ = bars;
                    }
                    for w in &bc.warnings {
                        let _ = writeln!(s, "warning: {w}");
                    }
                    s
                }
            };
            Ok(Outcome { text, ok: true })
        }
        SheafCmd::LineBundle => {
            let u = solve_line_bundle(&atlas).map_err(|x| bad("atlas", x))?;
            let f = line_bundle_from(&atlas, &u);
            let cat = category_for(&atlas, false)?;
            let rep = cat.validate(&f, e).map_err(|x| bad("sheaf", x))?;
            let text = pretty(&serde_json::to_value(f.to_json(&atlas)).unwrap());
            Ok(Outcome { text, ok: rep.ok() })
        }
    }
}

fn on_simplex(p: &[Rat]) -> bool {
    p.iter().all(|x| !x.is_negative()) && p.iter().copied().sum::<Rat>() == Rat::one()
}

fn adams(g: &Global, cmd: &AdamsCmd) -> Result<Outcome, InputError> {
    match cmd {
        AdamsCmd::Sample { d, r, s, count } => {
            if *d < 1 {
                return Err(bad("argument", "d must be at least 1"));
            }
            let mut samples = Vec::new();
            if let Some(r) = r {
                let r = if r.trim().is_empty() { vec![] } else { parse_list(r)? };
                if r.len() + 1 != *d {
                    return Err(bad("argument", format!("--r needs {} parameters for d = {d}", d - 1)));
                }
                let s = parse_rat(s.as_deref().ok_or_else(|| bad("usage", "--s is required with --r"))?)
                    .map_err(|e| bad("argument", e))?;
                let p = adams_path_eval(&r, s).map_err(|e| bad("argument", e))?;
                samples.push((r, s, p));
            } else {
                let mut rng = ChaCha8Rng::seed_from_u64(g.seed().unwrap_or(0));
                let mut draw = |hi: i64| Rat::new(rng.gen_range(0..=hi * 12), 12);
                for _ in 0..*count {
                    let r: Vec<Rat> = (1..*d).map(|_| draw(1)).collect();
                    let total: Rat = r.iter().copied().sum::<Rat>() + Rat::one();
                    let s = (total * draw(1)).min(total);
                    let p = adams_path_eval(&r, s).map_err(|e| bad("argument", e))?;
                    samples.push((r, s, p));
                }
            }
            let ok = samples.iter().all(|(_, _, p)| on_simplex(p));
            let text = match g.format {
                Format::Json => {
                    let v: Vec<Value> = samples
                        .iter()
                        .map(|(r, s, p)| json!({"r": rats(r), "s": fmt_rat(s), "point": rats(p)}))
                        .collect();
                    pretty(&json!({"d": d, "samples": v, "on_simplex": ok}))
                }
                _ => samples.iter().map(|(_, _, p)| rats(p).join(" ") + "\n").collect(),
            };
            Ok(Outcome { text, ok })
        }
        AdamsCmd::Strata { chain, vk, kind } => {
            let (cube, expected) = match (chain, vk) {
                (Some(c), _) => {
                    let k = parse_chain(None, c)?;
                    let n = k.len();
                    (AdamsCube::plain_chain(&k), 2 * n.saturating_sub(2))
                }
                (None, Some(v)) => {
                    let parts: Vec<Chain> = v.split(';').map(|p| parse_chain(None, p)).collect::<Result<_, _>>()?;
                    let n = parts.len();
                    let b = BarycentricChain::new(parts).ok_or_else(|| bad("argument", "not a chain of nested chains"))?;
                    let cube = match kind {
                        Kind::Input => AdamsCube::input(&b),
                        Kind::Output => AdamsCube::output(&b),
                    };
                    (cube, 2 * (n - 1))
                }
                (None, None) => return Err(bad("usage", "give --chain or --vk")),
            };
            let strata = cube.strata();
            let facets = cube.facets();
            let products: Vec<(String, Result<(), String>)> =
                strata.iter().map(|s| (cube.stratum_label(s), cube.verify_product(s))).collect();
            let ok = facets.len() == expected && products.iter().all(|p| p.1.is_ok());
            let text = match g.format {
                Format::Dot => cube.hasse().to_dot(&cube.name()),
                Format::Json => {
                    let st: Vec<Value> = strata.iter().map(|s| json!({"label": cube.stratum_label(s), "dim": s.dim()})).collect();
                    let fc: Vec<String> = facets.iter().map(|f| f.describe()).collect();
                    let bad_products: Vec<Value> = products
                        .iter()
                        .filter_map(|(l, r)| r.as_ref().err().map(|e| json!({"stratum": l, "error": e})))
                        .collect();
                    pretty(&json!({
                        "cube": cube.name(),
                        "dim": cube.dim(),
                        "strata": st,
                        "facets": fc,
                        "expected_facets": expected,
                        "product_failures": bad_products,
                        "ok": ok,
                    }))
                }
                Format::Text => {
                    let mut s = String::new();
                    let _ = writeln!(s, "{}: dimension {}, {} strata", cube.name(), cube.dim(), strata.len());
                    for f in &facets {
                        let _ = writeln!(s, "facet {}", f.describe());
                    }
                    for (l, r) in &products {
                        if let Err(e) = r {
                            let _ = writeln!(s, "product decomposition fails at {l}: {e}");
                        }
                    }
                    let _ = writeln!(s, "facets: {} (expected {expected}) {}", facets.len(), pass(facets.len() == expected));
                    let _ = writeln!(s, "products: {}", pass(products.iter().all(|p| p.1.is_ok())));
                    s
                }
            };
            Ok(Outcome { text, ok })
        }
    }
}

fn annuli(g: &Global) -> Result<Outcome, InputError> {
    let atlas = g.valid_atlas()?;
    let cells = atlas.pairs_barycentric_cells();
    let mut rows = Vec::new();
    let mut ok = true;
    for c in &cells {
        let fibre = degenerate_annulus_fibre(c, &barycenter(c)).map_err(|e| bad("cell", e))?;
        let expected = 2 * c.inner.len();
        let split = if c.inner.len() == 1 { singleton_product_check(c) } else { Ok(()) };
        let good = fibre.count() == expected && split.is_ok();
        ok &= good;
        rows.push((c, fibre, expected, split, good));
    }
    let text = match g.format {
        Format::Dot => cell_hasse(&cells).to_dot("pairs barycentric cells"),
        Format::Json => {
            let v: Vec<Value> = rows
                .iter()
                .map(|(c, f, e, sp, good)| {
                    json!({
                        "cell": c.to_string(),
                        "dim": c.dim(),
                        "components": f.count(),
                        "non_constant": f.non_constant(),
                        "expected": e,
                        "split_error": sp.as_ref().err(),
                        "ok": good,
                    })
                })
                .collect();
            pretty(&json!({"cells": v, "ok": ok}))
        }
        Format::Text => {
            let mut s = String::new();
            for (c, f, e, sp, good) in &rows {
                let _ = write!(s, "{c} [{}]: {} strips ({} non-constant), expected {e}", c.dim(), f.count(), f.non_constant());
                if let Err(x) = sp {
                    let _ = write!(s, ", split fails: {x}");
                }
                let _ = writeln!(s, " {}", pass(*good));
            }
            let _ = writeln!(s, "cells: {} {}", cells.len(), pass(ok));
            s
        }
    };
    Ok(Outcome { text, ok })
}

fn functor(g: &Global, cmd: &FunctorCmd) -> Result<Outcome, InputError> {
    let atlas = g.valid_atlas()?;
    let e = g.precision()?;
    match cmd {
        FunctorCmd::Identity => {
            let s = composition_sign_for(atlas.dimension);
            let (data, entries) = identity_ledger(&atlas, s).map_err(|x| bad("atlas", x))?;
            let counts = CountsJson::Full { intersections: data.to_json(&atlas), entries };
            Ok(Outcome { text: pretty(&serde_json::to_value(&counts).unwrap()), ok: true })
        }
        FunctorCmd::Check { sign } => {
            let p = g.counts.as_ref().ok_or_else(|| bad("usage", "--counts is required"))?;
            let counts = read(p)?;
            let inter = g.sheaf.as_ref().map(read).transpose()?;
            let f = FunctorData::from_json_str(&atlas, &counts, inter.as_deref(), e).map_err(|x| bad("counts", x))?;
            let s = sign.unwrap_or_else(|| composition_sign_for(atlas.dimension));
            if s != 1 && s != -1 {
                return Err(bad("argument", "--sign must be 1 or -1"));
            }
            let rep = f.check_all(s).map_err(|x| bad("counts", x))?;
            let text = match g.format {
                Format::Json => pretty(&serde_json::to_value(&rep).unwrap()),
                _ => {
                    let mut s = String::new();
                    for x in &rep.ledger.failures {
                        let _ = writeln!(s, "entry {} ({}): {}", x.index, x.family.name(), x.reason);
                    }
                    for x in &rep.residuals {
                        let at = x.chain.as_ref().map(|c| format!(" on {c:?}")).unwrap_or_default();
                        let val = x.valuation.as_ref().map(fmt_rat).unwrap_or_else(|| "-".into());
                        let _ = writeln!(s, "{}{at} at ({}): valuation {val}: {}", x.check, x.generators.join(", "), x.defect.join("; "));
                    }
                    let _ = writeln!(
                        s,
                        "ledger: {} entries, {} rejected; residuals: {}; composition sign {}",
                        rep.ledger.checked,
                        rep.ledger.failures.len(),
                        rep.residuals.len(),
                        rep.composition_sign
                    );
                    let _ = writeln!(s, "functor: {}", pass(rep.ok()));
                    s
                }
            };
            Ok(Outcome { text, ok: rep.ok() })
        }
    }
}

fn run(cli: &Cli) -> Result<Outcome, InputError> {
    if let Some(j) = cli.cfg.jobs {
        if j == 0 {
            return Err(bad("jobs", "--jobs must be positive"));
        }
        rayon::ThreadPoolBuilder::new().num_threads(j).build_global().map_err(|e| bad("jobs", e))?;
    }
    match &cli.cmd {
        Cmd::Build => build(&cli.cfg),
        Cmd::Fixture { name } => {
            let a = fixtures::by_name(name).ok_or_else(|| bad("atlas", format!("no fixture named {name}")))?;
            Ok(Outcome { text: pretty(&serde_json::to_value(a.to_json()).unwrap()), ok: true })
        }
        Cmd::Sheaf(c) => sheaf(&cli.cfg, c),
        Cmd::Adams(c) => adams(&cli.cfg, c),
        Cmd::Annuli(AnnuliCmd::Cells) => annuli(&cli.cfg),
        Cmd::Functor(c) => functor(&cli.cfg, c),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if matches!(e.kind(), clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            println!("{}", json!({"error": "usage", "message": e.to_string().trim()}));
            return ExitCode::from(2);
        }
    };
    match run(&cli) {
        Ok(o) => {
            print!("{}", o.text);
            if o.ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            println!("{}", json!({"error": e.kind, "message": e.message}));
            ExitCode::from(2)
        }
    }
}

