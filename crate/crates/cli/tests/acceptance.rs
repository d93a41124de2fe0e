//! Acceptance criteria 1-10, one PASS/FAIL line each.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde_json::{json, Value};

use relucert::engine::Engine;
use relucert::gate::{exactness_gate, GateOutcome};
use relucert::kernel::certs::{check_dual, check_farkas, DualBoundCertificate, FarkasCertificate};
use relucert::kernel::model::{forward_eval, validate_witness, Problem};
use relucert::kernel::prooflog::{check_proof, check_proof_str, recheck_with_lemmas, Descriptor, ProofLog, SplitKind};
use relucert::kernel::store::{NormalizedSystem, Origin, PhaseAssignment, RowId, Store};
use relucert::kernel::{q, Rational, SparseRow};
use relucert::learn::Knowledge;
use relucert::oracle::{oracle_verify, OracleError, OracleVerdict};
use relucert::propagate::{
    hull_insert, propagate, stabilize, templates, tgct, Mode, NodeStatus, PropagateConfig, TemplateSet,
};
use relucert::search::{hsrv_verify, icl_verify, SearchConfig, Verification, VerifyResult};

const SEED: u64 = 0x5eed_0001;
const SUITE_SIZE: usize = 120;
const ORACLE_CAP: usize = 6;
const MUTATIONS: usize = 200;

const LIMIT_FARKAS: Duration = Duration::from_millis(10);
const LIMIT_END_TO_END: Duration = Duration::from_secs(1);
const LIMIT_SUITE: Duration = Duration::from_secs(300);
const MAX_COST_SLOPE: f64 = 1.2;

type Outcome = Result<String, String>;

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

fn relucert(args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_relucert")).args(args).output().expect("binary runs");
    (out.status.code().unwrap_or(-1), String::from_utf8_lossy(&out.stdout).into_owned())
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, limit: Duration, what: &str) -> Result<(), String> {
    ensure(elapsed <= limit, || format!("{what} took {elapsed:?}, limit {limit:?}"))
}

fn worked(threshold: &str) -> Problem {
    let text = std::fs::read_to_string(data("worked.json")).unwrap();
    let mut p = Problem::from_json_str(&text).unwrap();
    p.property.threshold = threshold.parse().unwrap();
    p
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    // v = (z1, z2, y)
    let rows = [
        (vec![(0, q(1, 1))], q(1, 1)),
        (vec![(1, q(-1, 1))], q(0, 1)),
        (vec![(0, q(-1, 1)), (1, q(1, 1)), (2, q(1, 1))], q(0, 1)),
        (vec![(2, q(-1, 1))], q(-11, 10)),
    ];
    let mut sys = NormalizedSystem::new(3);
    let mut combo = vec![q(0, 1); 3];
    let mut rhs = q(0, 1);
    for (i, (row, b)) in rows.iter().enumerate() {
        sys.push(RowId { constraint: i, negated: false }, SparseRow::from_entries(row.clone()), b.clone());
        for (j, c) in row {
            combo[*j] += c;
        }
        rhs += b;
    }
    let lambda = (0..4).map(|i| (RowId { constraint: i, negated: false }, q(1, 1))).collect();
    let accepted = check_farkas(&sys, &FarkasCertificate { lambda });
    let elapsed = start.elapsed();
    ensure(combo.iter().all(Rational::is_zero), || format!("λᵀA = {combo:?}"))?;
    ensure(rhs == q(-1, 10), || format!("λᵀb = {rhs}"))?;
    accepted.map_err(|e| e.to_string())?;
    within(elapsed, LIMIT_FARKAS, "check")?;
    Ok(format!("λᵀA = (0,0,0), λᵀb = {rhs}, accepted in {elapsed:?}"))
}

fn criterion_2(dir: &Path) -> Outcome {
    let problem = data("worked.json");
    let problem = problem.to_str().unwrap();
    let mut notes = Vec::new();
    for strategy in ["icl", "hsrv"] {
        let proof = dir.join(format!("worked_{strategy}.proof"));
        let start = Instant::now();
        let (code, out) =
            relucert(&["verify", problem, "--strategy", strategy, "--emit-proof", proof.to_str().unwrap()]);
        let elapsed = start.elapsed();
        ensure(code == 0, || format!("{strategy}: verify exit {code}\n{out}"))?;
        within(elapsed, LIMIT_END_TO_END, strategy)?;
        let (code, out) = relucert(&["check", problem, proof.to_str().unwrap()]);
        ensure(code == 0, || format!("{strategy}: check exit {code}\n{out}"))?;
        notes.push(format!("{strategy} {elapsed:?}"));
    }
    Ok(format!("exit 0 and proof accepted ({})", notes.join(", ")))
}

fn criterion_3(dir: &Path) -> Outcome {
    let p = worked("1/2");
    let path = dir.join("worked_half.json");
    std::fs::write(&path, p.to_json_pretty()).unwrap();
    let witness = dir.join("witness.json");
    let start = Instant::now();
    let (code, out) = relucert(&["verify", path.to_str().unwrap(), "--witness", witness.to_str().unwrap()]);
    let elapsed = start.elapsed();
    ensure(code == 1, || format!("verify exit {code}\n{out}"))?;
    within(elapsed, LIMIT_END_TO_END, "verify")?;
    let w: Value = serde_json::from_str(&std::fs::read_to_string(&witness).unwrap()).unwrap();
    let x: Vec<Rational> = w["x"].as_array().unwrap().iter().map(|v| v.as_str().unwrap().parse().unwrap()).collect();
    let y = forward_eval(&p.network, &x).map_err(|e| e.to_string())?.outputs()[0].clone();
    ensure(y >= q(1, 2), || format!("forward_eval gives y = {y} at x = {x:?}"))?;
    Ok(format!("exit 1, x = {}, y = {y} in {elapsed:?}", x[0]))
}

fn criterion_4() -> Outcome {
    let p = worked("1");
    let v = hsrv_verify(&p, &SearchConfig { force_root_split: true, ..SearchConfig::default() });
    let VerifyResult::Unsat(log) = &v.result else { return Err(format!("{:?}", v.result)) };
    check_proof(&p, log).map_err(|e| format!("{e:?}"))?;
    ensure(log.lemmas.len() == 1, || format!("{} lemmas", log.lemmas.len()))?;
    let lemma = &log.lemmas[0];
    let half = SplitKind::Domain { dim: 0, at: q(1, 2) };
    ensure(lemma.split == half, || format!("split {:?}", lemma.split))?;
    let betas: Vec<Rational> = lemma.children.iter().map(|c| c.beta.clone()).collect();
    ensure(betas == [q(0, 1), q(1, 1)], || format!("child bounds {betas:?}"))?;
    let aux = p.layout().aux().unwrap();
    ensure(lemma.template == SparseRow::unit(aux) && lemma.bound == q(1, 1), || {
        format!("lemma {:?} ≤ {}", lemma.template, lemma.bound)
    })?;
    // Each child certificate against its own store.
    let engine = Engine::new(&p);
    let cfg = PropagateConfig { mode: Mode::Hsrv, ..PropagateConfig::default() };
    let children = Descriptor::root(&p).split(&p, &half).unwrap();
    for (child, beta) in children.iter().zip(&betas) {
        let prop =
            propagate(&engine, &child.region, &child.alpha, &Knowledge::new(), &cfg).map_err(|e| e.to_string())?;
        let NodeStatus::BoundPruned(cert) = &prop.status else { return Err(format!("child status {:?}", prop.status)) };
        ensure(cert.beta == *beta, || format!("child β {} vs logged {beta}", cert.beta))?;
        check_dual(&prop.store.normalize(), cert).map_err(|e| e.to_string())?;
    }
    Ok("β₁ = 0, β₂ = 1, merged lemma y ≤ 1, both child certificates pass check_dual".into())
}

/// A random net and its oracle verdict.
struct Case {
    problem: Problem,
    truth: OracleVerdict,
    unstable: usize,
}

fn frac(rng: &mut StdRng) -> String {
    q(rng.gen_range(-8..=8), rng.gen_range(1..=8)).to_string()
}

fn random_problem(rng: &mut StdRng) -> Problem {
    let input = rng.gen_range(1..=2);
    let hidden = rng.gen_range(1..=3);
    let mut widths: Vec<usize> = (0..hidden).map(|_| rng.gen_range(1..=4)).collect();
    widths.push(1);
    let (mut weights, mut biases, mut acts) = (Vec::new(), Vec::new(), Vec::new());
    let mut prev = input;
    for (i, w) in widths.iter().enumerate() {
        weights.push((0..*w).map(|_| (0..prev).map(|_| frac(rng)).collect::<Vec<_>>()).collect::<Vec<_>>());
        biases.push((0..*w).map(|_| frac(rng)).collect::<Vec<_>>());
        acts.push(if i < hidden { "relu" } else { "identity" });
        prev = *w;
    }
    let text = json!({
        "weights": weights, "biases": biases, "activations": acts,
        "input_lower": vec!["-1"; input], "input_upper": vec!["1"; input],
        "margin": {"0": "1"}, "threshold": "0", "epsilon": "1/8",
    });
    let mut p = Problem::from_json_str(&text.to_string()).expect("generated problem parses");
    // Threshold near the sampled maximum so both verdicts occur.
    let mut best: Option<Rational> = None;
    for k in 0..=4 {
        for j in 0..=4 {
            let x: Vec<Rational> = (0..input).map(|d| q(2 * if d == 0 { k } else { j } - 4, 4)).collect();
            let y = forward_eval(&p.network, &x).unwrap().outputs()[0].clone();
            best = Some(match best {
                Some(b) if b >= y => b,
                _ => y,
            });
        }
    }
    p.property.threshold = best.unwrap() + q(rng.gen_range(-2..=2), 4);
    p
}

fn suite() -> Vec<Case> {
    let mut rng = StdRng::seed_from_u64(SEED);
    let mut out = Vec::new();
    while out.len() < SUITE_SIZE {
        let problem = random_problem(&mut rng);
        match oracle_verify(&problem, ORACLE_CAP) {
            Ok(r) => out.push(Case { problem, truth: r.verdict, unstable: r.unstable }),
            Err(OracleError::CapExceeded { .. }) => continue,
            Err(e) => panic!("oracle failed: {e}"),
        }
    }
    out
}

struct Runs {
    icl: Vec<Verification>,
    hsrv: Vec<Verification>,
    elapsed: Duration,
}

fn run_suite(cases: &[Case]) -> Runs {
    let start = Instant::now();
    let cfg = SearchConfig::default();
    let icl = cases.iter().map(|c| icl_verify(&c.problem, &cfg)).collect();
    let hsrv = cases.iter().map(|c| hsrv_verify(&c.problem, &cfg)).collect();
    Runs { icl, hsrv, elapsed: start.elapsed() }
}

fn criterion_5(cases: &[Case], runs: &Runs) -> Outcome {
    let (mut sat, mut unsat) = (0, 0);
    for (i, c) in cases.iter().enumerate() {
        for (name, v) in [("icl", &runs.icl[i]), ("hsrv", &runs.hsrv[i])] {
            match (&v.result, &c.truth) {
                (VerifyResult::Sat(x), OracleVerdict::Sat(_)) => {
                    ensure(validate_witness(&c.problem, x).is_accepted(), || {
                        format!("case {i} {name}: bad witness {x:?}")
                    })?;
                    sat += 1;
                }
                (VerifyResult::Unsat(log), OracleVerdict::Unsat) => {
                    check_proof(&c.problem, log).map_err(|e| format!("case {i} {name}: {e:?}"))?;
                    unsat += 1;
                }
                (r, t) => {
                    return Err(format!("case {i} {name}: {r:?} vs oracle {t:?}\n{}", c.problem.to_json_pretty()))
                }
            }
        }
    }
    within(runs.elapsed, LIMIT_SUITE, "suite")?;
    Ok(format!("{} nets, {sat} sat and {unsat} unsat runs agree with the oracle in {:?}", cases.len(), runs.elapsed))
}

fn hull_store(p: &Problem) -> Store {
    let mut store = Store::build_initial(p, &p.region, &PhaseAssignment::new(), &[]);
    stabilize(&mut store);
    for u in store.unstable() {
        hull_insert(&mut store, u);
    }
    store
}

fn criterion_6(cases: &[Case]) -> Outcome {
    let (mut first_rows, mut iterations) = (0, 0);
    for (i, c) in cases.iter().enumerate() {
        for mode in [Mode::Icl, Mode::Hsrv] {
            let engine = Engine::new(&c.problem);
            let mut store = hull_store(&c.problem);
            let ts = templates(&store, TemplateSet::Default);
            let first = tgct(&engine, &mut store, &ts, mode).map_err(|e| e.to_string())?;
            let second = tgct(&engine, &mut store, &ts, mode).map_err(|e| e.to_string())?;
            ensure(first.added <= 2 * ts.len(), || {
                format!("case {i}: {} rows from {} templates", first.added, ts.len())
            })?;
            ensure(second.added == 0, || format!("case {i} {mode:?}: second pass added {}", second.added))?;
            first_rows += first.added;
            let cfg = PropagateConfig { mode, ..PropagateConfig::default() };
            let prop = propagate(&engine, &c.problem.region, &PhaseAssignment::new(), &Knowledge::new(), &cfg)
                .map_err(|e| e.to_string())?;
            for (added, t) in prop.tgct_rows.iter().zip(&prop.templates) {
                ensure(*added <= 2 * t, || format!("case {i}: iteration added {added} rows from {t} templates"))?;
                iterations += 1;
            }
        }
    }
    Ok(format!("second pass adds 0 rows ({first_rows} from first passes); {iterations} iterations within 2|G|"))
}

fn criterion_7(cases: &[Case], runs: &Runs) -> Outcome {
    let (mut gates, mut refinements, mut max_ratio) = (0, 0, (0, 1));
    for (i, c) in cases.iter().enumerate() {
        let engine = Engine::new(&c.problem);
        let store = hull_store(&c.problem);
        let r = exactness_gate(&engine, &store, &c.problem.region, &Knowledge::new(), None, false)
            .map_err(|e| e.to_string())?;
        ensure(r.refinements <= r.unstable, || {
            format!("case {i}: {} refinements, |U| = {}", r.refinements, r.unstable)
        })?;
        ensure(r.eliminations == r.refinements, || {
            format!("case {i}: {} of {} refinements eliminated the prior point", r.eliminations, r.refinements)
        })?;
        let agrees = matches!(
            (&r.outcome, &c.truth),
            (GateOutcome::Sat(_), OracleVerdict::Sat(_))
                | (GateOutcome::Prune(_), OracleVerdict::Unsat)
                | (GateOutcome::Defer(_), _)
        );
        ensure(agrees, || format!("case {i}: gate {:?} vs oracle {:?}", r.outcome, c.truth))?;
        gates += 1;
        refinements += r.refinements;
        if r.unstable > 0 && r.refinements * max_ratio.1 > max_ratio.0 * r.unstable {
            max_ratio = (r.refinements, r.unstable);
        }
    }
    for (i, v) in runs.icl.iter().chain(&runs.hsrv).enumerate() {
        ensure(v.stats.gate_bound_violations == 0, || {
            format!("run {i}: {} gate calls over |U|", v.stats.gate_bound_violations)
        })?;
    }
    let in_search: u64 = runs.icl.iter().chain(&runs.hsrv).map(|v| v.stats.gate_invocations).sum();
    Ok(format!(
        "{gates} root gates, {refinements} refinements, worst {}/{} of |U|, each excluding its witness; {in_search} in-search gates within |U|",
        max_ratio.0, max_ratio.1
    ))
}

/// Ring `v_i − v_{i+1} + w_i − w_{i+1} ≤ 0` closed by one row with rhs `−1/10`.
fn ring(m: usize) -> (NormalizedSystem, Vec<(RowId, Rational)>) {
    let mut sys = NormalizedSystem::new(2 * m);
    let mut lambda = Vec::new();
    for i in 0..m {
        let j = (i + 1) % m;
        let row = SparseRow::from_entries([(i, q(1, 1)), (j, q(-1, 1)), (m + i, q(2, 1)), (m + j, q(-2, 1))]);
        let rhs = if i + 1 == m { q(-1, 10) } else { q(0, 1) };
        let id = RowId { constraint: i, negated: false };
        sys.push(id, row, rhs);
        lambda.push((id, q(1, 1)));
    }
    (sys, lambda)
}

fn slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let (sx, sy) = points.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x.ln(), b + y.ln()));
    let (mx, my) = (sx / n, sy / n);
    let cov: f64 = points.iter().map(|(x, y)| (x.ln() - mx) * (y.ln() - my)).sum();
    let var: f64 = points.iter().map(|(x, _)| (x.ln() - mx).powi(2)).sum();
    cov / var
}

fn criterion_8() -> Outcome {
    let (mut farkas, mut dual) = (Vec::new(), Vec::new());
    for m in [10usize, 100, 1000] {
        let (sys, lambda) = ring(m);
        let nnz = (4 * m) as f64;
        let stats = check_farkas(&sys, &FarkasCertificate { lambda: lambda.clone() }).map_err(|e| e.to_string())?;
        ensure(stats.multiplications == 5 * m as u64, || {
            format!("farkas m = {m}: {} multiplications", stats.multiplications)
        })?;
        farkas.push((nnz, stats.multiplications as f64));
        // Dropping the closing row leaves v_0 − v_{m−1} + 2w_0 − 2w_{m−1} ≤ 0.
        let open = lambda[..m - 1].to_vec();
        let g = SparseRow::from_entries([(0, q(1, 1)), (m - 1, q(-1, 1)), (m, q(2, 1)), (2 * m - 1, q(-2, 1))]);
        let stats =
            check_dual(&sys, &DualBoundCertificate { g, beta: q(0, 1), lambda: open }).map_err(|e| e.to_string())?;
        ensure(stats.multiplications == 5 * (m as u64 - 1), || {
            format!("dual m = {m}: {} multiplications", stats.multiplications)
        })?;
        dual.push((nnz - 4.0, stats.multiplications as f64));
    }
    let (sf, sd) = (slope(&farkas), slope(&dual));
    ensure(sf <= MAX_COST_SLOPE && sd <= MAX_COST_SLOPE, || format!("log-log slopes farkas {sf:.3}, dual {sd:.3}"))?;
    Ok(format!(
        "log-log slope farkas {sf:.3}, dual {sd:.3} (limit {MAX_COST_SLOPE}); ops = nnz + rows at m = 10, 100, 1000"
    ))
}

fn rational_pointers(v: &Value, path: String, out: &mut Vec<String>) {
    match v {
        Value::String(s) if is_fraction(s) => out.push(path),
        Value::Array(items) => {
            for (i, item) in items.iter().enumerate() {
                rational_pointers(item, format!("{path}/{i}"), out);
            }
        }
        Value::Object(map) => {
            for (k, item) in map {
                rational_pointers(item, format!("{path}/{}", k.replace('~', "~0").replace('/', "~1")), out);
            }
        }
        _ => {}
    }
}

fn is_fraction(s: &str) -> bool {
    let Some((n, d)) = s.split_once('/') else { return false };
    let n = n.strip_prefix('-').unwrap_or(n);
    !n.is_empty() && !d.is_empty() && n.bytes().chain(d.bytes()).all(|b| b.is_ascii_digit())
}

/// Bumps the last digit of the numerator.
fn flip_digit(s: &str) -> String {
    let (n, d) = s.split_once('/').unwrap();
    let mut bytes = n.as_bytes().to_vec();
    let last = bytes.last_mut().unwrap();
    *last = b'0' + (*last - b'0' + 1) % 10;
    format!("{}/{d}", String::from_utf8(bytes).unwrap())
}

fn unsat_logs<'a>(cases: &'a [Case], runs: &'a Runs) -> impl Iterator<Item = (&'a Problem, &'a ProofLog)> {
    cases.iter().enumerate().flat_map(move |(i, c)| {
        [&runs.icl[i], &runs.hsrv[i]].into_iter().filter_map(move |v| match &v.result {
            VerifyResult::Unsat(log) => Some((&c.problem, log.as_ref())),
            _ => None,
        })
    })
}

fn criterion_9(cases: &[Case], runs: &Runs) -> Outcome {
    let mut rng = StdRng::seed_from_u64(SEED ^ 9);
    let mut pool = Vec::new();
    for (p, log) in unsat_logs(cases, runs) {
        let v: Value = serde_json::from_str(&log.to_json_pretty()).unwrap();
        let mut ptrs = Vec::new();
        rational_pointers(&v, String::new(), &mut ptrs);
        for ptr in ptrs {
            pool.push((p, v.clone(), ptr));
        }
    }
    ensure(pool.len() >= MUTATIONS, || format!("only {} mutable fields", pool.len()))?;
    let mut tried = 0;
    while tried < MUTATIONS {
        let (p, v, ptr) = &pool[rng.gen_range(0..pool.len())];
        let mut m = v.clone();
        let field = m.pointer_mut(ptr).unwrap();
        let mutated = flip_digit(field.as_str().unwrap());
        *field = Value::String(mutated.clone());
        let text = serde_json::to_string(&m).unwrap();
        ensure(check_proof_str(p, &text).is_err(), || format!("mutation {ptr} -> {mutated} accepted"))?;
        tried += 1;
    }
    Ok(format!("{tried} single-field mutations drawn from {} rational fields, all rejected", pool.len()))
}

fn criterion_10(cases: &[Case], runs: &Runs) -> Outcome {
    let split = SearchConfig { force_root_split: true, ..SearchConfig::default() };
    let merge = worked("1");
    let mut extra = vec![(&merge, hsrv_verify(&merge, &split))];
    for c in cases.iter().filter(|c| c.truth == OracleVerdict::Unsat) {
        extra.push((&c.problem, hsrv_verify(&c.problem, &split)));
    }
    let suite_runs =
        cases.iter().enumerate().flat_map(|(i, c)| [(&c.problem, &runs.icl[i]), (&c.problem, &runs.hsrv[i])]);
    let (mut logs, mut lemmas, mut injected) = (0, 0, 0);
    for (p, v) in extra.iter().map(|(p, v)| (*p, v)).chain(suite_runs) {
        let VerifyResult::Unsat(log) = &v.result else { continue };
        let root = Store::build_initial(p, &p.region, &PhaseAssignment::new(), &v.lemmas);
        for l in v.lemmas.iter().filter(|l| l.covers(&p.region, &PhaseAssignment::new())) {
            let present = root.active_ids().map(|i| root.constraint(i)).any(|c| c.row == l.row && c.rhs <= l.rhs);
            ensure(present, || format!("lemma {} missing from the root store", l.id))?;
            injected += 1;
        }
        ensure(
            root.active_ids().all(|i| {
                !matches!(root.constraint(i).origin, Origin::Lemma { .. })
                    || v.lemmas.iter().any(|l| l.row == root.constraint(i).row)
            }),
            || "stray lemma row".into(),
        )?;
        recheck_with_lemmas(p, log).map_err(|e| format!("{e:?}"))?;
        logs += 1;
        lemmas += log.lemmas.len();
    }
    ensure(lemmas > 0, || "no lemmas were learned".into())?;
    Ok(format!("{logs} logs with {lemmas} lemmas re-check after injection; {injected} root-valid lemmas present in fresh root stores"))
}

fn main() {
    let dir = tempfile::tempdir().unwrap();
    let cases = suite();
    let runs = run_suite(&cases);
    let unstable = cases.iter().map(|c| c.unstable).max().unwrap_or(0);
    println!("suite: {} nets, seed {SEED:#x}, max {unstable} unstable at the root", cases.len());
    let results: Vec<(usize, Outcome)> = vec![
        (1, criterion_1()),
        (2, criterion_2(dir.path())),
        (3, criterion_3(dir.path())),
        (4, criterion_4()),
        (5, criterion_5(&cases, &runs)),
        (6, criterion_6(&cases)),
        (7, criterion_7(&cases, &runs)),
        (8, criterion_8()),
        (9, criterion_9(&cases, &runs)),
        (10, criterion_10(&cases, &runs)),
    ];
    let mut failed = 0;
    for (n, r) in &results {
        match r {
            Ok(detail) => println!("PASS criterion {n}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL criterion {n}: {why}");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
