use std::io::Write;

use qstar_cli::{run, EXIT_OK, EXIT_RESOURCE, EXIT_SEMANTIC, EXIT_USAGE};
use serde_json::Value;

const HADAMARD: &str = "(\\!x. if x then 0 else 1) (meas (H (new 0)))";

fn program(src: &str) -> tempfile::NamedTempFile {
    let mut f = tempfile::NamedTempFile::new().unwrap();
    f.write_all(src.as_bytes()).unwrap();
    f
}

fn qstar(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("qstar").chain(args.iter().copied());
    let code = run(argv, &mut out, &mut err);
    (
        code,
        String::from_utf8(out).unwrap(),
        String::from_utf8(err).unwrap(),
    )
}

fn path(f: &tempfile::NamedTempFile) -> &str {
    f.path().to_str().unwrap()
}

#[test]
fn check_accepts_and_rejects() {
    let f = program(HADAMARD);
    let (code, out, _) = qstar(&["check", path(&f)]);
    assert_eq!(code, EXIT_OK);
    assert!(out.starts_with("app:"), "{out}");

    let f = program("\\x. x x");
    let (code, _, err) = qstar(&["check", path(&f)]);
    assert_eq!(code, EXIT_SEMANTIC);
    assert!(err.contains("used twice"), "{err}");

    let f = program("");
    let (code, _, _) = qstar(&["check", path(&f)]);
    assert_eq!(code, EXIT_USAGE);

    let (code, _, _) = qstar(&["check", "/nonexistent/file.q"]);
    assert_eq!(code, EXIT_USAGE);
}

#[test]
fn dist_of_hadamard() {
    let f = program(HADAMARD);
    let (code, out, _) = qstar(&["dist", path(&f)]);
    assert_eq!(code, EXIT_OK);
    assert_eq!(
        out,
        "0.5\t0\tcount 1\n0.5\t1\tcount 1\n# prob_any 1, count_any 2\n"
    );
    let (_, json, _) = qstar(&["dist", path(&f), "--json", "--strategy", "rightmost"]);
    let v: Value = serde_json::from_str(&json).unwrap();
    assert_eq!(v["maximal"], true);
    assert_eq!(v["outcomes"].as_array().unwrap().len(), 2);
    assert_eq!(v["count_any"], 2);
}

#[test]
fn dist_of_normal_form() {
    let f = program("<0, 1>");
    let (code, out, _) = qstar(&["dist", path(&f)]);
    assert_eq!(code, EXIT_OK);
    assert_eq!(out, "1\t<0, 1>\tcount 1\n# prob_any 1, count_any 1\n");
}

#[test]
fn dist_of_cut_coin() {
    let f = program(
        "((\\!y. \\!f. f !(y !y !f)) !(\\!y. \\!f. f !(y !y !f)) \
         !(\\!f. \\!x. if x then 0 else f (meas (H (new 0))))) (meas (H (new 0)))",
    );
    for (n, expected) in [(1, "0.5"), (2, "0.75"), (5, "0.96875")] {
        let m = n.to_string();
        let (code, out, _) = qstar(&["dist", path(&f), "--measurements", &m, "--depth", "1000"]);
        assert_eq!(code, EXIT_OK);
        assert!(out.starts_with(&format!("{expected}\t0\t")), "{out}");
        assert!(out.contains("not maximal"));
    }
}

#[test]
fn run_is_reproducible() {
    let f = program(HADAMARD);
    let (code, a, _) = qstar(&["run", path(&f), "--seed", "1"]);
    assert_eq!(code, EXIT_OK);
    let (_, b, _) = qstar(&["run", path(&f), "--seed", "1"]);
    assert_eq!(a, b);
    let last = a.lines().last().unwrap();
    assert!(last == "result\t0" || last == "result\t1", "{a}");
    // seed 1 draws outcome 0 first, so the else branch is taken
    assert_eq!(last, "result\t1");

    let f = program("1");
    let (code, out, _) = qstar(&["run", path(&f)]);
    assert_eq!(code, EXIT_OK);
    assert_eq!(out, "result\t1\n");
}

#[test]
fn run_reports_depth_exhaustion() {
    let f = program("(\\!x. x !x) !(\\!x. x !x)");
    let (code, _, err) = qstar(&["run", path(&f), "--depth", "10"]);
    assert_eq!(code, EXIT_RESOURCE);
    assert!(err.contains("depth exceeded"), "{err}");
}

#[test]
fn mixed_and_trace() {
    let f = program(HADAMARD);
    let (code, out, _) = qstar(&["mixed", path(&f), "--steps", "6"]);
    assert_eq!(code, EXIT_OK);
    assert_eq!(out, "0.5\t0\n0.5\t1\n");
    let (code, out, _) = qstar(&["mixed", path(&f), "--steps", "1"]);
    assert_eq!(code, EXIT_OK);
    assert!(out.contains("not normal"));
    let (code, out, _) = qstar(&["trace", path(&f)]);
    assert_eq!(code, EXIT_OK);
    assert_eq!(out.lines().filter(|l| l.ends_with(" nf")).count(), 2);
    let (_, json, _) = qstar(&["trace", path(&f), "--json"]);
    assert!(serde_json::from_str::<Value>(&json).is_ok());
}

#[test]
fn verify_small_corpus() {
    let (code, out, _) = qstar(&[
        "verify",
        "--size",
        "3",
        "--registers",
        "20",
        "--rounds",
        "3",
    ]);
    assert_eq!(code, EXIT_OK, "{out}");
    assert!(out.ends_with("failures: 0\n"), "{out}");
    let (code, _, _) = qstar(&["verify", "--suite", "nonsense"]);
    assert_eq!(code, EXIT_USAGE);
    let (code, _, _) = qstar(&["verify", "--size", "15"]);
    assert_eq!(code, EXIT_RESOURCE);
}

#[test]
fn verify_single_program_finds_the_crossing_frames() {
    let f = program("((\\y. y) 0) ((\\x. x) 1)");
    let (code, out, _) = qstar(&["verify", path(&f), "--suite", "diamond"]);
    assert_eq!(code, EXIT_SEMANTIC);
    assert!(out.contains("clause 1"), "{out}");
}

#[test]
fn usage_errors_and_config() {
    assert_eq!(qstar(&[]).0, EXIT_USAGE);
    assert_eq!(qstar(&["frobnicate"]).0, EXIT_USAGE);
    assert_eq!(qstar(&["dist"]).0, EXIT_USAGE);
    let (code, out, _) = qstar(&["--show-config"]);
    assert_eq!(code, EXIT_OK);
    assert!(out.contains("depth = 64"));
    assert!(out.contains("distribution_tolerance = 1e-9"));
    assert!(out.contains("register_tolerance = 1e-10"));
    let (code, out, _) = qstar(&["--help"]);
    assert_eq!(code, EXIT_OK);
    assert!(out.contains("verify"));
}

#[test]
fn extra_gates() {
    let mut gates = tempfile::NamedTempFile::new().unwrap();
    writeln!(gates, "gate NOT2 1\n0,0 1,0\n1,0 0,0").unwrap();
    let f = program("meas (NOT2 (new 0))");
    let (code, out, _) = qstar(&["dist", path(&f), "--gates", gates.path().to_str().unwrap()]);
    assert_eq!(code, EXIT_OK, "{out}");
    assert!(out.starts_with("1\t!1\t"), "{out}");
    let (code, _, _) = qstar(&["dist", path(&f)]);
    assert_eq!(code, EXIT_SEMANTIC);
}
