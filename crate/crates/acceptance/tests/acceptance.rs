//! Acceptance run: one line per criterion, non-zero exit if any fails.
//!
//! The corpus is every well-formed program up to `QSTAR_ACCEPTANCE_SIZE`
//! nodes (default 6), a seeded random sample up to 12 nodes, and the named
//! examples.

use std::io::Write;
use std::time::{Duration, Instant};

use qstar_cli::{run, EXIT_OK};
use qstar_core::harness::{
    check_geometric, check_measurement_algebra, check_terms, corpus, example_programs,
    generate_corpus, CorpusMode, CorpusSummary, Suite,
};
use qstar_core::quantum::GateRegistry;
use qstar_core::syntax::Term;
use serde_json::Value;

const DIST_TOL: f64 = 1e-9;
const JOIN_TOL: f64 = 1e-10;
const DEPTH: usize = 64;
const DEFAULT_EXHAUSTIVE: usize = 6;
const SAMPLE_SEED: u64 = 1;
const SAMPLE_SIZE: usize = 12;
const SAMPLE_COUNT: usize = 20_000;
const REGISTERS: usize = 1000;
const ROUNDS: usize = 10;

struct Outcome {
    passed: bool,
    line: String,
}

fn verdict(id: u8, name: &str, passed: bool, detail: String) -> Outcome {
    let tag = if passed { "PASS" } else { "FAIL" };
    Outcome {
        passed,
        line: format!("[{tag}] {id} {name}: {detail}"),
    }
}

fn example_distribution() -> Outcome {
    let mut f = tempfile::NamedTempFile::new().unwrap();
    write!(f, "{}", corpus::HADAMARD_SOURCE).unwrap();
    let start = Instant::now();
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = run(
        ["qstar", "dist", "--json", f.path().to_str().unwrap()],
        &mut out,
        &mut err,
    );
    let elapsed = start.elapsed();
    let v: Value = serde_json::from_slice(&out).unwrap_or(Value::Null);
    let leaves = v["outcomes"].as_array().cloned().unwrap_or_default();
    let mut seen: Vec<(String, f64, u64)> = leaves
        .iter()
        .map(|l| {
            (
                l["config"]["term"].as_str().unwrap_or("").to_string(),
                l["probability"].as_f64().unwrap_or(f64::NAN),
                l["count"].as_u64().unwrap_or(0),
            )
        })
        .collect();
    seen.sort_by(|a, b| a.0.cmp(&b.0));
    let prob_any = v["prob_any"].as_f64().unwrap_or(f64::NAN);
    let passed = code == EXIT_OK
        && seen.len() == 2
        && seen[0].0 == "0"
        && seen[1].0 == "1"
        && seen
            .iter()
            .all(|(_, p, n)| (p - 0.5).abs() <= DIST_TOL && *n == 1)
        && (prob_any - 1.0).abs() <= DIST_TOL
        && elapsed < Duration::from_secs(1);
    verdict(
        1,
        "Hadamard example distribution",
        passed,
        format!("leaves {seen:?}, prob_any {prob_any}, {elapsed:.2?}"),
    )
}

struct Scope {
    terms: Vec<Term>,
    description: String,
}

fn scope() -> Scope {
    let bound = std::env::var("QSTAR_ACCEPTANCE_SIZE")
        .ok()
        .and_then(|s| s.parse().ok())
        .unwrap_or(DEFAULT_EXHAUSTIVE);
    let mut terms = generate_corpus(CorpusMode::Enumerated { size_bound: bound })
        .expect("bound within the enumeration limit")
        .terms;
    let exhaustive = terms.len();
    let sample = generate_corpus(CorpusMode::Random {
        seed: SAMPLE_SEED,
        size_bound: SAMPLE_SIZE,
        count: SAMPLE_COUNT,
    })
    .unwrap()
    .terms;
    let sampled = sample.len();
    terms.extend(sample);
    let examples = example_programs();
    let named = examples.len();
    terms.extend(examples.into_iter().map(|(_, t)| t));
    Scope {
        terms,
        description: format!(
            "all {exhaustive} programs of size <= {bound}, {sampled} random programs of size <= \
             {SAMPLE_SIZE} (seed {SAMPLE_SEED}), {named} examples; exhaustive size <= 12 not run"
        ),
    }
}

fn timed(terms: &[Term], suite: Suite) -> (CorpusSummary, Duration) {
    let start = Instant::now();
    let s = check_terms(terms, suite, DEPTH, 1, &GateRegistry::builtin());
    (s, start.elapsed())
}

fn first<T: std::fmt::Debug>(items: &[T]) -> String {
    items
        .first()
        .map_or(String::new(), |x| format!("; first: {x:?}"))
}

fn main() {
    let mut results = vec![example_distribution()];
    let scope = scope();
    println!("corpus: {}", scope.description);

    let (conf, t) = timed(&scope.terms, Suite::Confluence);
    results.push(verdict(
        2,
        "strategy independence",
        conf.confluence_failures.is_empty()
            && conf.confluence_max_distance <= DIST_TOL
            && t < Duration::from_secs(300),
        format!(
            "{} maximal within depth {DEPTH}, {} cut, max distance {:e}, {} mismatches, {t:.2?}{}",
            conf.confluence_checked,
            conf.confluence_inconclusive,
            conf.confluence_max_distance,
            conf.confluence_failures.len(),
            first(&conf.confluence_failures)
        ),
    ));

    let (diamond, t) = timed(&scope.terms, Suite::Diamond);
    let mut by_clause = [0usize; 7];
    for f in &diamond.diamond_failures {
        by_clause[usize::from(f.clause)] += 1;
    }
    results.push(verdict(
        3,
        "quasi-one-step confluence",
        diamond.diamond_failures.is_empty(),
        format!(
            "{} pairs, {} violations (clauses 1-6: {:?}), probability tolerance {JOIN_TOL:e}, \
             {t:.2?}{}",
            diamond.diamond_pairs,
            diamond.diamond_failures.len(),
            &by_clause[1..],
            first(&diamond.diamond_failures)
        ),
    ));

    let start = Instant::now();
    let m = check_measurement_algebra(SAMPLE_SEED, REGISTERS);
    let t = start.elapsed();
    results.push(verdict(
        4,
        "measurement algebra",
        m.passed() && t < Duration::from_secs(10),
        format!(
            "{} registers, {} checks, {} failures, {t:.2?}{}",
            m.registers,
            m.checks,
            m.failures.len(),
            first(&m.failures)
        ),
    ));

    let (k, t) = timed(&scope.terms, Suite::Ktermination);
    results.push(verdict(
        5,
        "K strong normalization",
        k.k_failures.is_empty(),
        format!(
            "longest K-sequence {}, {} violations, {t:.2?}{}",
            k.k_longest,
            k.k_failures.len(),
            first(&k.k_failures)
        ),
    ));

    let (mixed, t) = timed(&scope.terms, Suite::Mixed);
    results.push(verdict(
        6,
        "mixed/tree agreement",
        mixed.mixed_failures.is_empty(),
        format!(
            "{} configurations compared under leftmost and rightmost, max difference {:e}, {} \
             mismatches, {t:.2?}{}",
            mixed.mixed_checked,
            mixed.mixed_max_difference,
            mixed.mixed_failures.len(),
            first(&mixed.mixed_failures)
        ),
    ));

    let g = check_geometric(ROUNDS);
    results.push(verdict(
        7,
        "geometric convergence",
        g.failures.is_empty(),
        format!(
            "P(0) after n = 1..{ROUNDS} rounds {:?}, {} failures",
            g.fixed_point,
            g.failures.len()
        ),
    ));

    let violations: Vec<&String> = [&conf, &diamond, &k, &mixed]
        .iter()
        .flat_map(|s| s.subject_violations.iter())
        .collect();
    results.push(verdict(
        8,
        "subject reduction",
        violations.is_empty(),
        format!(
            "{} violations over every reduct produced above{}",
            violations.len(),
            first(&violations)
        ),
    ));

    for r in &results {
        println!("{}", r.line);
    }
    let failed = results.iter().filter(|r| !r.passed).count();
    println!(
        "acceptance: {} passed, {failed} failed",
        results.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
