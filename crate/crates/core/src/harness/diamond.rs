//! Brute-force one-step join search for pairs of distinct redexes.

use serde::Serialize;

use super::audit;
use crate::quantum::{GateRegistry, QuantumRegister};
use crate::reduction::{step_raw, term_redexes, Configuration, Label, Redex};
use crate::syntax::Term;

/// Tolerance for the probability identities of the join clauses.
pub const JOIN_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DiamondFailure {
    pub configuration: String,
    pub left: String,
    pub right: String,
    /// Number of the violated clause, 1 to 6.
    pub clause: u8,
    pub left_reduct: String,
    pub right_reduct: String,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct DiamondReport {
    pub pairs_checked: usize,
    pub failures: Vec<DiamondFailure>,
    pub subject_violations: Vec<String>,
}

impl DiamondReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty() && self.subject_violations.is_empty()
    }
}

/// A one-step reduct, named as produced by the step.
#[derive(Clone, Debug)]
struct Reduct {
    redex: Redex,
    outcome: Option<bool>,
    prob: f64,
    register: QuantumRegister,
    term: Term,
}

impl Reduct {
    fn describe(&self) -> String {
        match self.outcome {
            Some(b) => format!("{}={} ({})", self.redex, u8::from(b), self.prob),
            None => self.redex.to_string(),
        }
    }

    fn canonical(&self) -> Configuration {
        Configuration::new(self.register.clone(), self.term.clone())
            .expect("reducts only mention registered qubits")
    }
}

/// A successor of a reduct, compared up to configuration equality.
struct Next {
    label: Label,
    outcome: Option<bool>,
    prob: f64,
    config: Configuration,
}

fn class(l: &Label) -> u8 {
    if l.in_k() {
        0
    } else if l.in_n() {
        1
    } else {
        2
    }
}

fn reducts(
    register: &QuantumRegister,
    term: &Term,
    gates: &GateRegistry,
    violations: &mut Vec<String>,
) -> Vec<Reduct> {
    let mut out = Vec::new();
    for redex in term_redexes(term, gates) {
        let steps = step_raw(register, term, &redex, None, gates)
            .expect("enumerated redexes are contractible");
        for s in steps {
            audit(&s.term, gates, &redex.to_string(), violations);
            out.push(Reduct {
                redex: redex.clone(),
                outcome: s.outcome,
                prob: s.prob,
                register: s.register,
                term: s.term,
            });
        }
    }
    out
}

fn successors(r: &Reduct, gates: &GateRegistry, violations: &mut Vec<String>) -> Vec<Next> {
    reducts(&r.register, &r.term, gates, violations)
        .into_iter()
        .map(|s| Next {
            config: s.canonical(),
            label: s.redex.label,
            outcome: s.outcome,
            prob: s.prob,
        })
        .collect()
}

fn joins(a: &[Next], b: &[Next], pa: impl Fn(&Next) -> bool, pb: impl Fn(&Next) -> bool) -> bool {
    a.iter()
        .filter(|x| pa(x))
        .any(|x| b.iter().filter(|y| pb(y)).any(|y| x.config == y.config))
}

/// Checks every pair of one-step reducts of `c` obtained from distinct
/// redexes against the join clause selected by their labels. Measurements
/// contribute one reduct per outcome. Joins are searched one step deep on
/// each side.
pub fn check_quasi_diamond(c: &Configuration, gates: &GateRegistry) -> DiamondReport {
    let mut report = DiamondReport::default();
    let rs = reducts(
        c.register(),
        c.term(),
        gates,
        &mut report.subject_violations,
    );
    let canon: Vec<Configuration> = rs.iter().map(Reduct::canonical).collect();
    let nexts: Vec<Vec<Next>> = rs
        .iter()
        .map(|r| successors(r, gates, &mut report.subject_violations))
        .collect();
    for i in 0..rs.len() {
        for j in i + 1..rs.len() {
            if rs[i].redex == rs[j].redex {
                continue;
            }
            let (a, b) = if class(&rs[i].redex.label) <= class(&rs[j].redex.label) {
                (i, j)
            } else {
                (j, i)
            };
            report.pairs_checked += 1;
            let clause = check_pair(&rs[a], &canon[a], &nexts[a], &rs[b], &canon[b], &nexts[b]);
            if let Err(clause) = clause {
                report.failures.push(DiamondFailure {
                    configuration: c.to_string(),
                    left: rs[a].describe(),
                    right: rs[b].describe(),
                    clause,
                    left_reduct: canon[a].to_string(),
                    right_reduct: canon[b].to_string(),
                });
            }
        }
    }
    report
}

/// `Ok(clause)` if the clause for the pair holds, `Err(clause)` otherwise.
/// `(da, d, dn)` comes from the step with the smaller label class
/// (K < N < meas).
fn check_pair(
    da: &Reduct,
    d: &Configuration,
    dn: &[Next],
    eb: &Reduct,
    e: &Configuration,
    en: &[Next],
) -> Result<u8, u8> {
    let is_k = |n: &Next| n.label.in_k();
    let is_n = |n: &Next| n.label.in_n();
    let check = |clause: u8, ok: bool| if ok { Ok(clause) } else { Err(clause) };
    let (alpha, beta) = (&da.redex.label, &eb.redex.label);
    match (class(alpha), class(beta)) {
        (0, 0) => check(1, d == e || joins(dn, en, is_k, is_k)),
        (0, 1) => check(
            2,
            dn.iter().any(|x| is_n(x) && x.config == *e) || joins(dn, en, is_n, is_k),
        ),
        (0, 2) => check(3, joins(dn, en, |x| same_measurement(x, eb), is_k)),
        (1, 1) => check(4, d == e || joins(dn, en, is_n, is_n)),
        (1, 2) => check(5, joins(dn, en, |x| same_measurement(x, eb), is_n)),
        _ => {
            let (Label::Meas(r), Label::Meas(q)) = (alpha, beta) else {
                unreachable!("class 2 is measurement")
            };
            if r == q {
                return Err(6);
            }
            // D came from meas_r with probability p, E from meas_q with s.
            let (p, s) = (da.prob, eb.prob);
            let ok = dn.iter().any(|x| {
                x.label == *beta
                    && en.iter().any(|y| {
                        y.label == *alpha
                            && x.config == y.config
                            && (p * x.prob - s * y.prob).abs() <= JOIN_TOL
                    })
            });
            check(6, ok)
        }
    }
}

/// `x` measures the same qubit as `m`, with the same outcome and
/// probability.
fn same_measurement(x: &Next, m: &Reduct) -> bool {
    x.label == m.redex.label && x.outcome == m.outcome && (x.prob - m.prob).abs() <= JOIN_TOL
}
