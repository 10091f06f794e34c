//! Executable checks of the calculus' metatheory over generated corpora.

pub mod algebra;
pub mod confluence;
pub mod corpus;
pub mod diamond;
pub mod ktermination;

use std::fmt;
use std::str::FromStr;

use serde::Serialize;
use thiserror::Error;

use crate::computation::{ProbComputation, Strategy};
use crate::quantum::GateRegistry;
use crate::reduction::Configuration;
use crate::syntax::Term;
use crate::wellform::is_wf_configuration_term;

pub use algebra::{check_measurement_algebra, MeasurementReport};
pub use confluence::{
    check_geometric, check_mixed_agreement, check_strong_confluence, ConfluenceReport,
    GeometricReport, MixedAgreementReport,
};
pub use corpus::{example_programs, generate_corpus, Corpus, CorpusMode, Provenance};
pub use diamond::{check_quasi_diamond, DiamondFailure, DiamondReport};
pub use ktermination::{check_k_termination, KTerminationReport};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum HarnessError {
    #[error("size bound {requested} exceeds the maximum of {max}")]
    BoundExceeded { requested: usize, max: usize },
    #[error("unknown suite `{0}`")]
    UnknownSuite(String),
}

/// Leftmost, rightmost and random strategies with seeds 1, 2 and 3.
pub fn default_strategies() -> Vec<Strategy> {
    vec![
        Strategy::Leftmost,
        Strategy::Rightmost,
        Strategy::Random { seed: 1 },
        Strategy::Random { seed: 2 },
        Strategy::Random { seed: 3 },
    ]
}

/// Checks that a reduct is still a well-formed configuration, recording a
/// violation otherwise.
pub(crate) fn audit(term: &Term, gates: &GateRegistry, context: &str, out: &mut Vec<String>) {
    if !is_wf_configuration_term(term, gates) {
        out.push(format!("{context}: reduct `{term}` is not well-formed"));
    }
}

/// Audits every node of a computation tree.
pub(crate) fn audit_tree(p: &ProbComputation, gates: &GateRegistry, out: &mut Vec<String>) {
    let mut stack = vec![p];
    while let Some(node) = stack.pop() {
        audit(node.root().term(), gates, "tree node", out);
        match node {
            ProbComputation::Leaf { .. } => {}
            ProbComputation::Unary { child, .. } => stack.push(child),
            ProbComputation::Binary { left, right, .. } => {
                stack.push(left);
                stack.push(right);
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    Diamond,
    Confluence,
    Ktermination,
    Mixed,
    MeasurementAlgebra,
    Geometric,
    All,
}

impl Suite {
    fn includes(self, other: Suite) -> bool {
        self == Suite::All || self == other
    }
}

impl FromStr for Suite {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "diamond" => Suite::Diamond,
            "confluence" => Suite::Confluence,
            "ktermination" => Suite::Ktermination,
            "mixed" => Suite::Mixed,
            "measurement-algebra" => Suite::MeasurementAlgebra,
            "geometric" => Suite::Geometric,
            "all" => Suite::All,
            other => return Err(HarnessError::UnknownSuite(other.to_string())),
        })
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Suite::Diamond => "diamond",
            Suite::Confluence => "confluence",
            Suite::Ktermination => "ktermination",
            Suite::Mixed => "mixed",
            Suite::MeasurementAlgebra => "measurement-algebra",
            Suite::Geometric => "geometric",
            Suite::All => "all",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug)]
pub struct SuiteConfig {
    pub depth: usize,
    pub seed: u64,
    /// Random registers for the measurement-algebra suite.
    pub registers: usize,
    /// Rounds for the geometric suite.
    pub rounds: usize,
    pub jobs: usize,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig {
            depth: 64,
            seed: 0,
            registers: 1000,
            rounds: 10,
            jobs: 1,
        }
    }
}

/// Aggregate results of the per-configuration suites.
#[derive(Clone, Debug, Default, Serialize)]
pub struct CorpusSummary {
    pub configurations: usize,
    pub diamond_pairs: usize,
    pub diamond_failures: Vec<DiamondFailure>,
    pub confluence_checked: usize,
    pub confluence_inconclusive: usize,
    pub confluence_max_distance: f64,
    pub confluence_failures: Vec<String>,
    pub k_longest: usize,
    pub k_failures: Vec<String>,
    pub mixed_checked: usize,
    pub mixed_max_difference: f64,
    pub mixed_failures: Vec<String>,
    pub subject_violations: Vec<String>,
}

impl CorpusSummary {
    fn merge(&mut self, other: CorpusSummary) {
        self.configurations += other.configurations;
        self.diamond_pairs += other.diamond_pairs;
        self.diamond_failures.extend(other.diamond_failures);
        self.confluence_checked += other.confluence_checked;
        self.confluence_inconclusive += other.confluence_inconclusive;
        self.confluence_max_distance = self
            .confluence_max_distance
            .max(other.confluence_max_distance);
        self.confluence_failures.extend(other.confluence_failures);
        self.k_longest = self.k_longest.max(other.k_longest);
        self.k_failures.extend(other.k_failures);
        self.mixed_checked += other.mixed_checked;
        self.mixed_max_difference = self.mixed_max_difference.max(other.mixed_max_difference);
        self.mixed_failures.extend(other.mixed_failures);
        self.subject_violations.extend(other.subject_violations);
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SuiteReport {
    pub suite: Suite,
    pub provenance: Provenance,
    pub corpus: CorpusSummary,
    pub measurement: Option<MeasurementReport>,
    pub geometric: Option<GeometricReport>,
}

impl SuiteReport {
    pub fn failures(&self) -> usize {
        let c = &self.corpus;
        c.diamond_failures.len()
            + c.confluence_failures.len()
            + c.k_failures.len()
            + c.mixed_failures.len()
            + c.subject_violations.len()
            + self.measurement.as_ref().map_or(0, |m| m.failures.len())
            + self.geometric.as_ref().map_or(0, |g| g.failures.len())
    }

    pub fn passed(&self) -> bool {
        self.failures() == 0
    }
}

/// Runs the per-configuration checks of `suite` on one configuration.
pub fn check_configuration(
    c: &Configuration,
    suite: Suite,
    depth: usize,
    gates: &GateRegistry,
) -> CorpusSummary {
    let mut s = CorpusSummary {
        configurations: 1,
        ..CorpusSummary::default()
    };
    if suite.includes(Suite::Diamond) {
        let r = check_quasi_diamond(c, gates);
        s.diamond_pairs = r.pairs_checked;
        s.diamond_failures = r.failures;
        s.subject_violations.extend(r.subject_violations);
    }
    if suite.includes(Suite::Confluence) {
        let r = check_strong_confluence(c, &default_strategies(), depth, gates);
        if r.inconclusive {
            s.confluence_inconclusive = 1;
        } else {
            s.confluence_checked = 1;
            s.confluence_max_distance = r.max_distance;
            if !r.success() {
                s.confluence_failures.push(format!("{c}: {}", r.summary()));
            }
        }
        s.subject_violations.extend(r.subject_violations);
    }
    if suite.includes(Suite::Ktermination) {
        let r = check_k_termination(c, gates);
        s.k_longest = r.longest;
        s.k_failures = r.failures;
        s.subject_violations.extend(r.subject_violations);
    }
    if suite.includes(Suite::Mixed) {
        let r = check_mixed_agreement(c, &[Strategy::Leftmost, Strategy::Rightmost], depth, gates);
        s.mixed_checked = usize::from(r.checked > 0);
        s.mixed_max_difference = r.max_difference;
        s.mixed_failures = r.failures;
        s.subject_violations.extend(r.subject_violations);
    }
    s
}

/// Runs the per-configuration checks over `terms`, splitting the work
/// across `jobs` threads. The merged summary does not depend on `jobs`.
pub fn check_terms(
    terms: &[Term],
    suite: Suite,
    depth: usize,
    jobs: usize,
    gates: &GateRegistry,
) -> CorpusSummary {
    let jobs = jobs.max(1);
    let chunk = terms.len().div_ceil(jobs).max(1);
    let parts: Vec<CorpusSummary> = std::thread::scope(|scope| {
        let handles: Vec<_> = terms
            .chunks(chunk)
            .map(|part| {
                scope.spawn(move || {
                    let mut s = CorpusSummary::default();
                    for t in part {
                        let c = Configuration::from_term(t.clone());
                        s.merge(check_configuration(&c, suite, depth, gates));
                    }
                    s
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("worker panicked"))
            .collect()
    });
    let mut total = CorpusSummary::default();
    for p in parts {
        total.merge(p);
    }
    total
}

/// Runs `suite` over a corpus. The register-level suites ignore the corpus.
pub fn run_suite(suite: Suite, corpus: &Corpus, config: &SuiteConfig) -> SuiteReport {
    let gates = GateRegistry::builtin();
    let per_config = [
        Suite::Diamond,
        Suite::Confluence,
        Suite::Ktermination,
        Suite::Mixed,
    ]
    .iter()
    .any(|s| suite.includes(*s));
    let corpus_summary = if per_config {
        check_terms(&corpus.terms, suite, config.depth, config.jobs, &gates)
    } else {
        CorpusSummary::default()
    };
    let measurement = suite
        .includes(Suite::MeasurementAlgebra)
        .then(|| check_measurement_algebra(config.seed, config.registers));
    let geometric = suite
        .includes(Suite::Geometric)
        .then(|| check_geometric(config.rounds));
    SuiteReport {
        suite,
        provenance: corpus.provenance.clone(),
        corpus: corpus_summary,
        measurement,
        geometric,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_names_round_trip() {
        for s in [
            Suite::Diamond,
            Suite::Confluence,
            Suite::Ktermination,
            Suite::Mixed,
            Suite::MeasurementAlgebra,
            Suite::Geometric,
            Suite::All,
        ] {
            assert_eq!(s.to_string().parse::<Suite>().unwrap(), s);
        }
        assert!("bogus".parse::<Suite>().is_err());
    }

    #[test]
    fn small_enumerated_run_is_clean_and_job_independent() {
        let corpus = generate_corpus(CorpusMode::Enumerated { size_bound: 4 }).unwrap();
        let gates = GateRegistry::builtin();
        let one = check_terms(&corpus.terms, Suite::All, 64, 1, &gates);
        let three = check_terms(&corpus.terms, Suite::All, 64, 3, &gates);
        assert_eq!(one.configurations, corpus.terms.len());
        assert!(one.diamond_failures.is_empty());
        assert!(one.confluence_failures.is_empty());
        assert!(one.k_failures.is_empty());
        assert!(one.mixed_failures.is_empty());
        assert!(one.subject_violations.is_empty());
        assert_eq!(
            serde_json::to_string(&one).unwrap(),
            serde_json::to_string(&three).unwrap()
        );
    }
}
