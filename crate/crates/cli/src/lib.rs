//! The `qstar` command line.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use qstar_core::computation::{
    build_computation, count_any, format_prob, outcomes, prob_any, BuildLimits, ComputationError,
    Strategy, PROB_TOL,
};
use qstar_core::harness::{
    check_configuration, generate_corpus, run_suite, Corpus, CorpusMode, Suite, SuiteConfig,
    SuiteReport,
};
use qstar_core::mixed::{run_mixed, MixedState};
use qstar_core::quantum::{GateRegistry, REGISTER_TOL};
use qstar_core::reduction::{contract, enumerate_redexes, Configuration};
use qstar_core::syntax::{parse_term, Term};
use qstar_core::wellform::{check_wf, Environment};

pub const EXIT_OK: i32 = 0;
pub const EXIT_SEMANTIC: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_RESOURCE: i32 = 3;

#[derive(Parser, Debug)]
#[command(
    name = "qstar",
    version,
    about = "Interpreter for a quantum lambda calculus"
)]
struct Cli {
    /// Print the effective settings and exit.
    #[arg(long, global = true)]
    show_config: bool,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check that a program is well formed and print its derivation.
    Check(Common),
    /// Sample one reduction sequence, choosing measurement outcomes at random.
    Run(Common),
    /// Print the distribution of normal forms over all measurement outcomes.
    Dist(Common),
    /// Run the mixed-state computation for a number of steps.
    Mixed(Common),
    /// Print the computation tree.
    Trace(Common),
    /// Run the property suites over a corpus, or over one program.
    Verify(VerifyArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum StrategyName {
    Leftmost,
    Rightmost,
    Random,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Program file.
    file: PathBuf,
    #[arg(long, value_enum, default_value = "leftmost")]
    strategy: StrategyName,
    /// Seed for the random strategy and for sampling.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Maximum number of reduction steps along a path.
    #[arg(long, default_value_t = 64)]
    depth: usize,
    /// Number of mixed-state steps.
    #[arg(long, default_value_t = 64)]
    steps: usize,
    /// Stop each path after this many measurements.
    #[arg(long)]
    measurements: Option<usize>,
    /// Emit JSON.
    #[arg(long)]
    json: bool,
    /// Extra gate definitions.
    #[arg(long)]
    gates: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum CorpusName {
    Enumerated,
    Examples,
    Random,
}

#[derive(Args, Debug, Clone)]
struct VerifyArgs {
    /// Check a single program instead of a corpus.
    file: Option<PathBuf>,
    #[arg(long, default_value = "all")]
    suite: String,
    #[arg(long, value_enum, default_value = "enumerated")]
    corpus: CorpusName,
    /// Size bound of the corpus.
    #[arg(long, default_value_t = 5)]
    size: usize,
    /// Number of programs in a random corpus.
    #[arg(long, default_value_t = 1000)]
    count: usize,
    #[arg(long, default_value_t = 64)]
    depth: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Random registers for the measurement-algebra suite.
    #[arg(long, default_value_t = 1000)]
    registers: usize,
    /// Coin rounds for the geometric suite.
    #[arg(long, default_value_t = 10)]
    rounds: usize,
    #[arg(long)]
    json: bool,
    /// Worker threads for the corpus checks.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[arg(long)]
    gates: Option<PathBuf>,
}

/// A failure carrying its exit code.
struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }

    fn semantic(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_SEMANTIC,
            message: message.into(),
        }
    }

    fn resource(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_RESOURCE,
            message: message.into(),
        }
    }
}

fn computation_failure(e: ComputationError) -> Failure {
    match e {
        ComputationError::NodeBudget(_) => Failure::resource(e.to_string()),
        other => Failure::semantic(other.to_string()),
    }
}

type Out<'a> = &'a mut dyn Write;

/// Runs the command line `args` (program name first), writing to `out` and
/// `err`, and returns the exit code.
pub fn run<I, T>(args: I, out: Out, err: Out) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                write!(err, "{text}")
            } else {
                write!(out, "{text}")
            };
            return code;
        }
    };
    let result = if cli.show_config {
        show_config(&cli.command, out)
    } else {
        match cli.command {
            Some(Command::Check(c)) => cmd_check(&c, out),
            Some(Command::Run(c)) => cmd_run(&c, out),
            Some(Command::Dist(c)) => cmd_dist(&c, out),
            Some(Command::Mixed(c)) => cmd_mixed(&c, out),
            Some(Command::Trace(c)) => cmd_trace(&c, out),
            Some(Command::Verify(v)) => cmd_verify(&v, out),
            None => Err(Failure::usage("no command given; try --help")),
        }
    };
    match result {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message);
            f.code
        }
    }
}

fn io(e: std::io::Error) -> Failure {
    Failure::semantic(format!("write failed: {e}"))
}

fn show_config(command: &Option<Command>, out: Out) -> Result<i32, Failure> {
    let (strategy, seed, depth, steps, measurements) = match command {
        Some(
            Command::Check(c)
            | Command::Run(c)
            | Command::Dist(c)
            | Command::Mixed(c)
            | Command::Trace(c),
        ) => (
            format!("{:?}", c.strategy).to_lowercase(),
            c.seed,
            c.depth,
            c.steps,
            c.measurements,
        ),
        Some(Command::Verify(v)) => ("all".to_string(), v.seed, v.depth, 0, None),
        None => ("leftmost".to_string(), 0, 64, 64, None),
    };
    let measurements = measurements.map_or("none".to_string(), |m| m.to_string());
    writeln!(
        out,
        "strategy = {strategy}\nseed = {seed}\ndepth = {depth}\nsteps = {steps}\n\
         measurements = {measurements}\ndistribution_tolerance = {PROB_TOL:e}\n\
         register_tolerance = {REGISTER_TOL:e}"
    )
    .map_err(io)?;
    Ok(EXIT_OK)
}

fn load_gates(path: &Option<PathBuf>) -> Result<GateRegistry, Failure> {
    let mut gates = GateRegistry::builtin();
    if let Some(p) = path {
        let src = std::fs::read_to_string(p)
            .map_err(|e| Failure::usage(format!("cannot read {}: {e}", p.display())))?;
        gates
            .extend_from_str(&src)
            .map_err(|e| Failure::usage(format!("{}: {e}", p.display())))?;
    }
    Ok(gates)
}

fn load_term(path: &Path) -> Result<Term, Failure> {
    let src = std::fs::read_to_string(path)
        .map_err(|e| Failure::usage(format!("cannot read {}: {e}", path.display())))?;
    parse_term(&src).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

/// Parses and checks a program, returning its initial configuration.
fn load_program(c: &Common) -> Result<(Configuration, GateRegistry), Failure> {
    let gates = load_gates(&c.gates)?;
    let term = load_term(&c.file)?;
    let env = Environment::quantum_only(term.free_quantum_vars());
    check_wf(&env, &term, &gates).map_err(|e| Failure::semantic(e.to_string()))?;
    Ok((Configuration::from_term(term), gates))
}

fn strategy(c: &Common) -> Strategy {
    match c.strategy {
        StrategyName::Leftmost => Strategy::Leftmost,
        StrategyName::Rightmost => Strategy::Rightmost,
        StrategyName::Random => Strategy::Random { seed: c.seed },
    }
}

fn limits(c: &Common) -> BuildLimits {
    BuildLimits {
        max_depth: c.depth,
        max_measurements: c.measurements,
        ..BuildLimits::default()
    }
}

fn print_json(out: Out, v: &Value) -> Result<(), Failure> {
    writeln!(
        out,
        "{}",
        serde_json::to_string_pretty(v).expect("serializable")
    )
    .map_err(io)
}

fn cmd_check(c: &Common, out: Out) -> Result<i32, Failure> {
    let gates = load_gates(&c.gates)?;
    let term = load_term(&c.file)?;
    let env = Environment::quantum_only(term.free_quantum_vars());
    match check_wf(&env, &term, &gates) {
        Ok(d) => {
            if c.json {
                print_json(
                    out,
                    &json!({ "well_formed": true, "derivation": d.to_string() }),
                )?;
            } else {
                write!(out, "{d}").map_err(io)?;
            }
            Ok(EXIT_OK)
        }
        Err(e) => {
            if c.json {
                print_json(
                    out,
                    &json!({ "well_formed": false, "error": e.to_string() }),
                )?;
                Ok(EXIT_SEMANTIC)
            } else {
                Err(Failure::semantic(e.to_string()))
            }
        }
    }
}

/// Text form of a configuration: the bare term when there is no quantum
/// data left.
fn show(c: &Configuration) -> String {
    if c.qvars().is_empty() && !c.is_zero() {
        c.term().to_string()
    } else {
        c.to_string()
    }
}

fn cmd_run(c: &Common, out: Out) -> Result<i32, Failure> {
    let (mut config, gates) = load_program(c)?;
    let strat = strategy(c);
    let mut rng = ChaCha8Rng::seed_from_u64(c.seed);
    let mut steps = Vec::new();
    let mut depth = 0;
    loop {
        let redexes = enumerate_redexes(&config, &gates);
        if redexes.is_empty() {
            break;
        }
        if depth >= c.depth {
            if c.json {
                print_json(
                    out,
                    &json!({ "steps": steps, "final": config.to_json(), "normal": false }),
                )?;
            }
            return Err(Failure::resource(format!(
                "depth exceeded after {depth} steps at {config}"
            )));
        }
        let redex = &redexes[strat.choose(&config, &redexes, depth)];
        let mut outs =
            contract(&config, redex, None, &gates).map_err(|e| Failure::semantic(e.to_string()))?;
        let (prob, outcome, next) = if outs.len() == 2 {
            let (q, one) = outs.pop().expect("two outcomes");
            let (p, zero) = outs.pop().expect("two outcomes");
            if rng.gen::<f64>() < p / (p + q) {
                (p, Some(0), zero)
            } else {
                (q, Some(1), one)
            }
        } else {
            let (p, next) = outs.pop().expect("one outcome");
            (p, None, next)
        };
        if c.json {
            steps.push(json!({
                "label": redex.label.to_string(),
                "position": redex.position,
                "outcome": outcome,
                "probability": prob,
                "config": next.to_json(),
            }));
        } else {
            let label = match outcome {
                Some(b) => format!("{}={b}", redex.label),
                None => redex.label.to_string(),
            };
            writeln!(out, "{label}\t{}\t{}", format_prob(prob), show(&next)).map_err(io)?;
        }
        config = next;
        depth += 1;
    }
    if c.json {
        print_json(
            out,
            &json!({ "steps": steps, "final": config.to_json(), "normal": true }),
        )?;
    } else {
        writeln!(out, "result\t{}", show(&config)).map_err(io)?;
    }
    Ok(EXIT_OK)
}

fn cmd_dist(c: &Common, out: Out) -> Result<i32, Failure> {
    let (config, gates) = load_program(c)?;
    let built =
        build_computation(&config, &strategy(c), limits(c), &gates).map_err(computation_failure)?;
    let outs = outcomes(&built.tree);
    let (pa, ca) = (prob_any(&built.tree), count_any(&built.tree));
    if c.json {
        let leaves: Vec<Value> = outs
            .iter()
            .map(|o| json!({ "probability": o.prob, "count": o.count, "config": o.config.to_json() }))
            .collect();
        print_json(
            out,
            &json!({ "maximal": built.maximal, "outcomes": leaves, "prob_any": pa, "count_any": ca }),
        )?;
        return Ok(EXIT_OK);
    }
    let mut lines: Vec<(String, String, usize)> = outs
        .iter()
        .map(|o| (show(&o.config), format_prob(o.prob), o.count))
        .collect();
    lines.sort();
    for (term, p, n) in lines {
        writeln!(out, "{p}\t{term}\tcount {n}").map_err(io)?;
    }
    writeln!(out, "# prob_any {}, count_any {ca}", format_prob(pa)).map_err(io)?;
    if !built.maximal {
        writeln!(out, "# not maximal: some paths were cut at the bound").map_err(io)?;
    }
    Ok(EXIT_OK)
}

fn cmd_mixed(c: &Common, out: Out) -> Result<i32, Failure> {
    let (config, gates) = load_program(c)?;
    let run = run_mixed(&MixedState::point(config), &strategy(c), c.steps, &gates)
        .map_err(|e| Failure::semantic(e.to_string()))?;
    let last = run.last().expect("at least the initial state");
    if c.json {
        print_json(
            out,
            &json!({ "steps": c.steps, "all_normal": last.all_normal(&gates), "state": last.to_json() }),
        )?;
    } else {
        write!(out, "{}", last.to_text()).map_err(io)?;
        if !last.all_normal(&gates) {
            writeln!(out, "# some entries are not normal forms").map_err(io)?;
        }
    }
    Ok(EXIT_OK)
}

fn cmd_trace(c: &Common, out: Out) -> Result<i32, Failure> {
    let (config, gates) = load_program(c)?;
    let built =
        build_computation(&config, &strategy(c), limits(c), &gates).map_err(computation_failure)?;
    if c.json {
        print_json(out, &built.tree.to_json())?;
    } else {
        write!(out, "{}", built.tree.trace_text()).map_err(io)?;
    }
    Ok(EXIT_OK)
}

fn cmd_verify(v: &VerifyArgs, out: Out) -> Result<i32, Failure> {
    let suite: Suite = v
        .suite
        .parse()
        .map_err(|e: qstar_core::harness::HarnessError| Failure::usage(e.to_string()))?;
    if let Some(path) = &v.file {
        let gates = load_gates(&v.gates)?;
        let term = load_term(path)?;
        let env = Environment::quantum_only(term.free_quantum_vars());
        check_wf(&env, &term, &gates).map_err(|e| Failure::semantic(e.to_string()))?;
        let summary = check_configuration(&Configuration::from_term(term), suite, v.depth, &gates);
        let failures = summary.diamond_failures.len()
            + summary.confluence_failures.len()
            + summary.k_failures.len()
            + summary.mixed_failures.len()
            + summary.subject_violations.len();
        if v.json {
            print_json(out, &serde_json::to_value(&summary).expect("serializable"))?;
        } else {
            write_summary(out, &summary)?;
            writeln!(out, "failures: {failures}").map_err(io)?;
        }
        return Ok(if failures == 0 {
            EXIT_OK
        } else {
            EXIT_SEMANTIC
        });
    }
    let mode = match v.corpus {
        CorpusName::Enumerated => CorpusMode::Enumerated { size_bound: v.size },
        CorpusName::Examples => CorpusMode::Examples,
        CorpusName::Random => CorpusMode::Random {
            seed: v.seed,
            size_bound: v.size,
            count: v.count,
        },
    };
    let corpus: Corpus = generate_corpus(mode).map_err(|e| Failure::resource(e.to_string()))?;
    let config = SuiteConfig {
        depth: v.depth,
        seed: v.seed,
        registers: v.registers,
        rounds: v.rounds,
        jobs: v.jobs,
    };
    let report = run_suite(suite, &corpus, &config);
    if v.json {
        print_json(out, &serde_json::to_value(&report).expect("serializable"))?;
    } else {
        write_report(out, &report)?;
    }
    Ok(if report.passed() {
        EXIT_OK
    } else {
        EXIT_SEMANTIC
    })
}

const SHOWN: usize = 10;

fn write_list(out: Out, title: &str, items: &[String]) -> Result<(), Failure> {
    writeln!(out, "{title}: {}", items.len()).map_err(io)?;
    for item in items.iter().take(SHOWN) {
        writeln!(out, "  {item}").map_err(io)?;
    }
    if items.len() > SHOWN {
        writeln!(out, "  ... {} more", items.len() - SHOWN).map_err(io)?;
    }
    Ok(())
}

fn write_summary(out: Out, s: &qstar_core::harness::CorpusSummary) -> Result<(), Failure> {
    writeln!(out, "configurations: {}", s.configurations).map_err(io)?;
    writeln!(out, "diamond pairs: {}", s.diamond_pairs).map_err(io)?;
    let diamond: Vec<String> = s
        .diamond_failures
        .iter()
        .map(|f| {
            format!(
                "clause {} at {}: {} / {} gives {} and {}",
                f.clause, f.configuration, f.left, f.right, f.left_reduct, f.right_reduct
            )
        })
        .collect();
    write_list(out, "diamond failures", &diamond)?;
    writeln!(
        out,
        "confluence: {} checked, {} inconclusive, max distance {:e}",
        s.confluence_checked, s.confluence_inconclusive, s.confluence_max_distance
    )
    .map_err(io)?;
    write_list(out, "confluence failures", &s.confluence_failures)?;
    writeln!(out, "longest K-sequence: {}", s.k_longest).map_err(io)?;
    write_list(out, "K-termination failures", &s.k_failures)?;
    writeln!(
        out,
        "mixed: {} checked, max difference {:e}",
        s.mixed_checked, s.mixed_max_difference
    )
    .map_err(io)?;
    write_list(out, "mixed failures", &s.mixed_failures)?;
    write_list(out, "subject reduction violations", &s.subject_violations)
}

fn write_report(out: Out, r: &SuiteReport) -> Result<(), Failure> {
    writeln!(out, "suite: {}", r.suite).map_err(io)?;
    writeln!(out, "corpus: {:?}", r.provenance).map_err(io)?;
    if r.corpus.configurations > 0 {
        write_summary(out, &r.corpus)?;
    }
    if let Some(m) = &r.measurement {
        writeln!(
            out,
            "measurement algebra: {} registers, {} checks",
            m.registers, m.checks
        )
        .map_err(io)?;
        write_list(out, "measurement failures", &m.failures)?;
    }
    if let Some(g) = &r.geometric {
        let values: Vec<String> = g.fixed_point.iter().map(|v| format_prob(*v)).collect();
        writeln!(out, "geometric: {}", values.join(" ")).map_err(io)?;
        write_list(out, "geometric failures", &g.failures)?;
    }
    writeln!(out, "failures: {}", r.failures()).map_err(io)?;
    Ok(())
}
