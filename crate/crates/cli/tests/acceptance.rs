//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Criteria that cannot pass as stated are listed in [`EXPECTED_FAILURES`]
//! with the reason; the test fails if the set of failing criteria differs
//! from that list in either direction.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::Arc;
use std::time::{Duration, Instant};

use gkm_cli::golden::{self, Status, Table, Tier};
use gkm_cli::sheaf_file;
use gkm_core::algebra::AmbientSpec;
use gkm_core::freemod::ModElem;
use gkm_core::linalg::{rank, Matrix};
use gkm_core::pipeline::{duality_report, table_row, CSelector, Context, PipelineRequest};
use gkm_core::poly::Poly;
use gkm_core::series;
use gkm_core::{monomial, Rational, RootSystem, Submodule};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde::Deserialize;

/// Every numeric comparison in this suite is exact.
const TOLERANCE: i64 = 0;
const SMALL_ROW_LIMIT: Duration = Duration::from_secs(30);
const A3_REGULAR_LIMIT: Duration = Duration::from_secs(5 * 60);
const A3_WEYL_LIMIT: Duration = Duration::from_secs(30 * 60);
const CLOSED_FORM_LIMIT: Duration = Duration::from_secs(5);
const SHEAF_LIMIT: Duration = Duration::from_secs(5);
const A3_MIN_REGULAR_D: u32 = 30;
const A3_MIN_WEYL_D: u32 = 36;
const RANDOM_SUBMODULES: usize = 120;
const RANDOM_SEED: u64 = 0x5eed_0f_c0ffee;

/// The Weyl-table G2 row has half-integer coefficients (1/2 t^6 ...), which
/// no Hilbert series can have; the computed row is recorded in the ledger.
const EXPECTED_FAILURES: &[u32] = &[2];

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

#[derive(Deserialize)]
#[serde(rename_all = "kebab-case")]
struct Expectations {
    freeness: Freeness,
    closed_form: Vec<ClosedForm>,
    sheaf: Vec<SheafCase>,
}

#[derive(Deserialize)]
#[serde(rename_all = "kebab-case")]
struct Freeness {
    free_types: Vec<String>,
    not_free_type: String,
    not_free_orbit_size: usize,
    not_free_truncation: u32,
    not_free_expr: String,
}

#[derive(Deserialize)]
struct ClosedForm {
    group: String,
    c: String,
    expr: String,
}

#[derive(Deserialize)]
#[serde(rename_all = "kebab-case")]
struct SheafCase {
    file: String,
    expr: String,
    #[serde(default)]
    generator_degrees: Option<Vec<u32>>,
}

fn expectations() -> Expectations {
    toml::from_str(&std::fs::read_to_string(fixtures().join("acceptance.toml")).unwrap()).unwrap()
}

fn ints(expr: &str) -> Vec<i64> {
    series::to_ints(&golden::expand(expr).unwrap()).expect("integral expression")
}

fn exact_eq(a: &[i64], b: &[i64]) -> bool {
    let n = a.len().max(b.len());
    (0..n).all(|i| (a.get(i).copied().unwrap_or(0) - b.get(i).copied().unwrap_or(0)).abs() <= TOLERANCE)
}

struct Outcome {
    pass: bool,
    detail: String,
}

fn table_criterion(table: Table, limits: &dyn Fn(&str) -> (Duration, u32)) -> Outcome {
    let file = golden::load(&fixtures().join("golden_tables.toml")).unwrap();
    let rows: Vec<_> = file.row.iter().filter(|r| r.table == table).cloned().collect();
    let sub = golden::GoldenFile { row: rows };
    let reports = golden::verify(&sub, &[Tier::Mandatory]).unwrap();
    let mut notes = Vec::new();
    let mut pass = true;
    for r in reports.iter().filter(|r| r.status != Status::Skipped) {
        let group = r.row.split('/').nth(1).unwrap();
        let (limit, min_d) = limits(group);
        let d = r.computed.as_ref().map_or(0, |c| c.truncation);
        let ok = r.status == Status::Match && r.seconds <= limit.as_secs_f64() && d >= min_d;
        pass &= ok;
        let first = r.issues.first().map(|s| format!(" ({s})")).unwrap_or_default();
        notes.push(format!("{} {} D={} {:.1}s{}", r.row, if ok { "ok" } else { "FAILED" }, d, r.seconds, first));
    }
    Outcome { pass, detail: notes.join("; ") }
}

fn criterion_1() -> Outcome {
    table_criterion(Table::Regular, &|g| if g == "A3" { (A3_REGULAR_LIMIT, A3_MIN_REGULAR_D) } else { (SMALL_ROW_LIMIT, 0) })
}

fn criterion_2() -> Outcome {
    table_criterion(Table::Weyl, &|g| if g == "A3" { (A3_WEYL_LIMIT, A3_MIN_WEYL_D) } else { (SMALL_ROW_LIMIT, 0) })
}

fn context(group: &str, g: usize) -> Context {
    Context::new(Arc::new(RootSystem::build(group).unwrap()), g).unwrap()
}

fn criterion_3(exp: &Expectations) -> Outcome {
    let f = &exp.freeness;
    let mut pass = true;
    let mut notes = Vec::new();
    for k in &f.free_types {
        let c = context(k, 1);
        let d = c.default_truncation();
        let all_free = (0..c.sys.t2_size()).all(|chi| c.sections(chi, d).certify_free(d).is_free());
        pass &= all_free;
        notes.push(format!("{k} all {} characters free: {all_free}", c.sys.t2_size()));
    }
    let c = context(&f.not_free_type, 1);
    let orbit = c.sys.char_orbits().into_iter().find(|o| o.members.len() == f.not_free_orbit_size).unwrap();
    let s = c.sections(orbit.representative, f.not_free_truncation);
    let h = s.hilbert_numerator(f.not_free_truncation);
    let cert = s.certify_free(f.not_free_truncation);
    let ok = exact_eq(&h.trimmed(), &ints(&f.not_free_expr)) && cert.is_not_free() && h.stable;
    pass &= ok;
    notes.push(format!("{} orbit of size {} numerator {} not free: {ok}", f.not_free_type, f.not_free_orbit_size, series::int::render(&h.trimmed())));
    Outcome { pass, detail: notes.join("; ") }
}

fn criterion_4(exp: &Expectations) -> Outcome {
    let mut pass = true;
    let mut notes = Vec::new();
    for cf in &exp.closed_form {
        for g in 1..=3usize {
            let start = Instant::now();
            let row = table_row(&PipelineRequest::new(&cf.group, g, CSelector::parse(&cf.c))).unwrap();
            let want = ints(&cf.expr.replace("{g}", &g.to_string()));
            let ok = exact_eq(&row.total.coefficients, &want) && row.stable && start.elapsed() <= CLOSED_FORM_LIMIT;
            pass &= ok;
            if !ok {
                notes.push(format!("{} c={} g={g} got {}", cf.group, cf.c, series::int::render(&row.total.coefficients)));
            }
        }
    }
    notes.insert(0, format!("{} closed forms x g=1..3", exp.closed_form.len()));
    Outcome { pass, detail: notes.join("; ") }
}

/// Sections of one edge joining two rank-one stalks in degree 0 with
/// identity map: pairs `(f, h)` with `f − h ∈ (x)`, so degree 0 has one
/// dimension and every positive even degree two.
fn single_edge_dims(d: u32) -> Vec<usize> {
    (0..=d).map(|k| if k == 0 { 1 } else if k % 2 == 0 { 2 } else { 0 }).collect()
}

fn criterion_5(exp: &Expectations) -> Outcome {
    let mut pass = true;
    let mut notes = Vec::new();
    for case in &exp.sheaf {
        let start = Instant::now();
        let desc = sheaf_file::load(&fixtures().join(&case.file)).unwrap();
        let report = sheaf_file::run(&desc, None).unwrap();
        let mut ok = exact_eq(&report.numerator.coefficients, &ints(&case.expr)) && report.numerator.stable;
        if let Some(gd) = &case.generator_degrees {
            ok &= &report.generator_degrees == gd;
            let model = desc.model().unwrap();
            let d = report.numerator.truncation;
            ok &= gkm_core::sheaf::global_sections(&model, d).slice_dims(d) == single_edge_dims(d);
        }
        ok &= start.elapsed() <= SHEAF_LIMIT;
        pass &= ok;
        notes.push(format!("{} {}", case.file, if ok { "ok" } else { "FAILED" }));
    }
    Outcome { pass, detail: notes.join("; ") }
}

fn free_numerator(degrees: &[u32]) -> Vec<i64> {
    let mut v = vec![0i64; degrees.iter().max().map_or(0, |&d| d as usize + 1)];
    for &d in degrees {
        v[d as usize] += 1;
    }
    v
}

fn random_submodule(rng: &mut StdRng) -> (Submodule, AmbientSpec) {
    let g = rng.gen_range(0..=1usize);
    let amb = AmbientSpec::standard(2, g);
    let module = Arc::new(amb.free_module());
    let n = rng.gen_range(1..=3);
    let gens: Vec<ModElem> = (0..n)
        .map(|_| loop {
            let deg = rng.gen_range(0..=6u32);
            let piece = module.piece(deg, None);
            if piece.len() == 0 {
                continue;
            }
            let v: Vec<Rational> = (0..piece.len())
                .map(|_| if rng.gen_bool(0.4) { Rational::from_int(rng.gen_range(-2..=2)) } else { Rational::zero() })
                .collect();
            if v.iter().all(|x| x.is_zero()) {
                continue;
            }
            break ModElem::from_dense(&piece, &v);
        })
        .collect();
    (Submodule::new(module, gens, "random"), amb)
}

/// Rank of all monomial multiples of the generators, degree by degree.
fn brute_force_dims(m: &Submodule, d: u32) -> Vec<usize> {
    let module = m.module();
    (0..=d)
        .map(|deg| {
            let piece = module.piece(deg, None);
            let mut cols = Vec::new();
            for gen in m.generators() {
                if gen.degree > deg || (deg - gen.degree) % 2 == 1 {
                    continue;
                }
                for e in monomial::list(2, (deg - gen.degree) / 2).iter() {
                    cols.push(gen.mul_poly(&Poly::monomial(e.clone(), Rational::one())).to_dense(&piece));
                }
            }
            if cols.is_empty() || piece.len() == 0 {
                0
            } else {
                rank(&Matrix::from_columns(piece.len(), &cols))
            }
        })
        .collect()
}

/// Top exterior coefficient of every product of two minimal generators is
/// divisible by the product of positive roots; no freeness needed.
fn products_project_into_ideal(c: &Context, s: &Submodule, d: u32) -> bool {
    let gens = s.minimal_generators(d);
    let root_product = c.root_product();
    let top = c.ambient.top_index();
    gens.iter().all(|x| {
        gens.iter().all(|y| {
            let p = c.ambient.mul_elems(x, y).coefficient(c.ambient.rank, top);
            p.is_zero() || p.divide(&root_product).is_some()
        })
    })
}

fn criterion_6() -> Outcome {
    let mut notes = Vec::new();
    let mut pass = true;

    // (a) freeness and tensor powers
    let mut a = true;
    for k in ["A2", "B2", "G2"] {
        let c1 = context(k, 1);
        let c2 = context(k, 2);
        let d1 = c1.default_truncation();
        let d2 = c2.default_truncation();
        for o in c1.sys.char_orbits() {
            let s1 = c1.sections(o.representative, d1);
            let cert = s1.certify_free(d1);
            let n1 = s1.hilbert_numerator(d1).trimmed();
            a &= cert.is_free() && exact_eq(&n1, &free_numerator(&s1.generator_degrees(d1)));
            let n2 = c2.sections(o.representative, d2).hilbert_numerator(d2).trimmed();
            a &= exact_eq(&n2, &series::int::pow(&n1, 2));
        }
    }
    notes.push(format!("(a) {a}"));
    pass &= a;

    // (b) and (c): products project into the root-product ideal; pairing
    let mut b = true;
    let mut cc = true;
    for k in ["A2", "B2", "G2", "A3"] {
        let c = context(k, 1);
        let d = c.default_truncation();
        let dim = c.dim_group();
        for o in c.sys.char_orbits() {
            let s = c.sections(o.representative, d);
            b &= products_project_into_ideal(&c, &s, d);
            if k != "A3" {
                let rep = duality_report(&c, &s, d).unwrap();
                b &= rep.containment;
                let mut deg = rep.generator_degrees.clone();
                deg.sort_unstable();
                let n = deg.len();
                let paired = (0..n).all(|i| deg[i] + deg[n - 1 - i] == dim);
                cc &= rep.unipotent_triangular && rep.nondegenerate && paired;
            }
        }
    }
    notes.push(format!("(b) {b}"));
    notes.push(format!("(c) {cc}"));
    pass &= b && cc;

    // (d) Weyl generators carry isotypical sections onto each other
    let mut dd = true;
    for (k, d) in [("A2", 10), ("B2", 12), ("G2", 16), ("A3", 14)] {
        let c = context(k, 1);
        let all: Vec<Submodule> = (0..c.sys.t2_size()).map(|chi| c.sections(chi, d)).collect();
        for &w in &c.sys.generators {
            for chi in 0..c.sys.t2_size() {
                let target = &all[c.sys.act_char(w, chi) as usize];
                let moved: Vec<ModElem> = all[chi as usize].generators().iter().map(|x| c.act(w, x)).collect();
                dd &= target.contains_all(&moved) && target.slice_dims(d) == all[chi as usize].slice_dims(d);
            }
        }
    }
    notes.push(format!("(d) {dd}"));
    pass &= dd;

    // (e) slice dimensions against brute-force spans
    let mut rng = StdRng::seed_from_u64(RANDOM_SEED);
    let mut agree = 0;
    for _ in 0..RANDOM_SUBMODULES {
        let (m, _) = random_submodule(&mut rng);
        if m.slice_dims(8) == brute_force_dims(&m, 8) {
            agree += 1;
        }
    }
    let e = agree == RANDOM_SUBMODULES;
    notes.push(format!("(e) {agree}/{RANDOM_SUBMODULES}"));
    pass &= e;
    Outcome { pass, detail: notes.join(" ") }
}

fn gkm(args: &[&str], workers: &str) -> (bool, Vec<u8>) {
    let out = Command::new(env!("CARGO_BIN_EXE_gkm")).args(args).env("GKM_WORKERS", workers).output().unwrap();
    (out.status.success(), out.stdout)
}

fn criterion_8() -> Outcome {
    let runs: &[&[&str]] = &[
        &["compute", "--group", "A2", "--format", "json"],
        &["compute", "--group", "B2", "--format", "json"],
        &["compute", "--group", "G2", "--format", "json"],
        &["compute", "--group", "A3", "--truncation", "30", "--format", "json"],
        &["compute", "--group", "B2", "--c", "identity", "--format", "json"],
        &["compute", "--group", "A2", "--c", "identity", "--chars", "reps", "--format", "json"],
    ];
    let mut pass = true;
    for args in runs {
        let (ok1, a) = gkm(args, "1");
        let (ok4, b) = gkm(args, "4");
        pass &= ok1 && ok4 && a == b && !a.is_empty();
    }
    Outcome { pass, detail: format!("{} commands, GKM_WORKERS 1 vs 4", runs.len()) }
}

fn criterion_7() -> Option<Outcome> {
    if std::env::var("GKM_EXTENDED").is_err() {
        return None;
    }
    let file = golden::load(&fixtures().join("golden_tables.toml")).unwrap();
    let reports = golden::verify(&file, &[Tier::Extended]).unwrap();
    let run: Vec<_> = reports.iter().filter(|r| r.tier == Tier::Extended).collect();
    let detail = run.iter().map(|r| format!("{} {:?} {:.0}s", r.row, r.status, r.seconds)).collect::<Vec<_>>().join("; ");
    Some(Outcome { pass: run.iter().all(|r| r.status == Status::Match), detail })
}

#[test]
fn acceptance() {
    let exp = expectations();
    let mut failed = BTreeSet::new();
    let mut report = |n: u32, title: &str, o: Outcome| {
        println!("criterion {n} [{}] {title}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        if !o.pass {
            failed.insert(n);
        }
    };
    report(1, "regular-c table, mandatory tier", criterion_1());
    report(2, "Weyl-invariants table, mandatory tier", criterion_2());
    report(3, "freeness verdicts", criterion_3(&exp));
    report(4, "rank-one closed forms", criterion_4(&exp));
    report(5, "generic sheaf fixtures", criterion_5(&exp));
    report(6, "property suites", criterion_6());
    match criterion_7() {
        Some(o) => report(7, "extended tier (not gating)", o),
        None => println!("criterion 7 [SKIP] extended tier (not gating): set GKM_EXTENDED=1 to run"),
    }
    report(8, "determinism across worker counts", criterion_8());
    failed.remove(&7);
    let expected: BTreeSet<u32> = EXPECTED_FAILURES.iter().copied().collect();
    assert_eq!(failed, expected, "failing criteria differ from the documented set");
}
