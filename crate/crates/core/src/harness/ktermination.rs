//! Exhaustive exploration of commutation-only reduction.

use std::collections::HashMap;

use serde::Serialize;

use super::audit;
use crate::quantum::{GateRegistry, QuantumRegister};
use crate::reduction::{abstraction_size, step_raw, term_redexes, Configuration};
use crate::syntax::Term;

#[derive(Clone, Debug, Default, Serialize)]
pub struct KTerminationReport {
    pub size: usize,
    /// Length of the longest K-sequence from the configuration.
    pub longest: usize,
    /// Distinct terms reachable by K-steps, the start included.
    pub reachable: usize,
    pub failures: Vec<String>,
    pub subject_violations: Vec<String>,
}

impl KTerminationReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty() && self.subject_violations.is_empty()
    }
}

struct Search<'a> {
    register: &'a QuantumRegister,
    gates: &'a GateRegistry,
    size: usize,
    bound: usize,
    memo: HashMap<Term, usize>,
    report: KTerminationReport,
}

impl Search<'_> {
    fn longest(&mut self, t: &Term, depth: usize) -> usize {
        let key = t.alpha_canonical();
        if let Some(&n) = self.memo.get(&key) {
            return n;
        }
        if depth > self.bound {
            self.report.failures.push(format!(
                "K-sequence longer than {} reaching `{t}`",
                self.bound
            ));
            return 0;
        }
        let lam = abstraction_size(t);
        let mut best = 0;
        for redex in term_redexes(t, self.gates) {
            if !redex.label.in_k() {
                continue;
            }
            let next = step_raw(self.register, t, &redex, None, self.gates)
                .expect("enumerated redexes are contractible")
                .pop()
                .expect("commutations have one outcome")
                .term;
            audit(
                &next,
                self.gates,
                &redex.to_string(),
                &mut self.report.subject_violations,
            );
            if next.size() != self.size {
                self.report.failures.push(format!(
                    "{redex} on `{t}` changed the size from {} to {}",
                    self.size,
                    next.size()
                ));
            }
            let next_lam = abstraction_size(&next);
            if next_lam <= lam {
                self.report.failures.push(format!(
                    "{redex} on `{t}` did not increase the abstraction size ({lam} to {next_lam})"
                ));
                continue;
            }
            best = best.max(1 + self.longest(&next, depth + 1));
        }
        self.memo.insert(key, best);
        best
    }
}

/// Explores every K-sequence from `c`, checking that each step keeps the
/// size, strictly increases the abstraction size, and that no sequence
/// reaches `size²` steps.
pub fn check_k_termination(c: &Configuration, gates: &GateRegistry) -> KTerminationReport {
    let size = c.term().size();
    let mut s = Search {
        register: c.register(),
        gates,
        size,
        bound: size * size,
        memo: HashMap::new(),
        report: KTerminationReport {
            size,
            ..KTerminationReport::default()
        },
    };
    let longest = s.longest(c.term(), 0);
    let mut report = s.report;
    report.longest = longest;
    report.reachable = s.memo.len();
    if longest >= size * size {
        report.failures.push(format!(
            "K-sequence of length {longest} from a term of size {size}"
        ));
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::parse_term;

    fn run(src: &str) -> KTerminationReport {
        let c = Configuration::from_term(parse_term(src).unwrap());
        check_k_termination(&c, &GateRegistry::builtin())
    }

    #[test]
    fn no_frame_means_no_steps() {
        let r = run("(\\x. x) 0");
        assert_eq!(r.longest, 0);
        assert_eq!(r.reachable, 1);
        assert!(r.passed());
    }

    #[test]
    fn single_right_commutation() {
        let r = run("((\\x. x) 0) 1");
        assert_eq!(r.longest, 1);
        assert!(r.passed());
    }

    #[test]
    fn nested_frames_terminate_under_the_bound() {
        let r = run("H ((\\y. (\\x. x) y) ((\\z. z) 0))");
        assert!(r.longest >= 2, "{r:?}");
        assert!(r.longest < r.size * r.size);
        assert!(r.passed(), "{r:?}");
        let r = run("((\\y. y) 0) ((\\x. x) 1)");
        assert!(r.passed(), "{r:?}");
        assert!(r.reachable >= 3);
    }
}
