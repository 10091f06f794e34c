//! Strategy independence of observed distributions, agreement of mixed
//! and tree semantics, and the repeated coin toss.

use serde::Serialize;

use super::corpus::{coin_term, y_coin_term};
use super::{audit, audit_tree};
use crate::computation::{
    build_computation, count_any, outcomes, prob_any, prob_of, BuildLimits, Outcome, Strategy,
    PROB_TOL,
};
use crate::mixed::{mixed_step, MixedState};
use crate::quantum::GateRegistry;
use crate::reduction::{is_normal_form, Configuration};
use crate::syntax::parse_term;

#[derive(Clone, Debug, Serialize)]
pub struct LeafStat {
    pub config: String,
    pub probability: f64,
    pub count: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct StrategyResult {
    pub strategy: String,
    pub maximal: bool,
    pub leaves: Vec<LeafStat>,
    pub prob_any: f64,
    pub count_any: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConfluenceReport {
    pub configuration: String,
    pub results: Vec<StrategyResult>,
    /// Some tree was cut at the depth bound or exhausted the node budget.
    pub inconclusive: bool,
    /// Largest total-variation distance between two strategies' outcome
    /// distributions.
    pub max_distance: f64,
    pub counts_agree: bool,
    pub any_agree: bool,
    pub subject_violations: Vec<String>,
}

impl ConfluenceReport {
    pub fn success(&self) -> bool {
        !self.inconclusive && self.max_distance <= PROB_TOL && self.counts_agree && self.any_agree
    }

    pub fn summary(&self) -> String {
        format!(
            "distance {:e}, counts {}, any {}",
            self.max_distance,
            if self.counts_agree { "agree" } else { "differ" },
            if self.any_agree { "agree" } else { "differ" }
        )
    }
}

fn distance(a: &[Outcome], b: &[Outcome]) -> f64 {
    let mut d: f64 = a
        .iter()
        .map(|x| {
            let y = b
                .iter()
                .find(|y| y.config == x.config)
                .map_or(0.0, |y| y.prob);
            (x.prob - y).abs()
        })
        .sum();
    d += b
        .iter()
        .filter(|y| !a.iter().any(|x| x.config == y.config))
        .map(|y| y.prob)
        .sum::<f64>();
    d / 2.0
}

fn same_counts(a: &[Outcome], b: &[Outcome]) -> bool {
    a.len() == b.len()
        && a.iter()
            .all(|x| b.iter().any(|y| y.config == x.config && y.count == x.count))
}

/// Builds one tree per strategy and compares, for every normal form, the
/// probability and the number of leaves, plus the totals.
pub fn check_strong_confluence(
    c: &Configuration,
    strategies: &[Strategy],
    depth: usize,
    gates: &GateRegistry,
) -> ConfluenceReport {
    let mut report = ConfluenceReport {
        configuration: c.to_string(),
        results: Vec::new(),
        inconclusive: false,
        max_distance: 0.0,
        counts_agree: true,
        any_agree: true,
        subject_violations: Vec::new(),
    };
    let mut all: Vec<(Vec<Outcome>, f64, usize)> = Vec::new();
    for s in strategies {
        let Ok(built) = build_computation(c, s, BuildLimits::depth(depth), gates) else {
            report.inconclusive = true;
            continue;
        };
        audit_tree(&built.tree, gates, &mut report.subject_violations);
        report.inconclusive |= !built.maximal;
        let outs = outcomes(&built.tree);
        let (pa, ca) = (prob_any(&built.tree), count_any(&built.tree));
        report.results.push(StrategyResult {
            strategy: s.to_string(),
            maximal: built.maximal,
            leaves: outs
                .iter()
                .map(|o| LeafStat {
                    config: o.config.to_string(),
                    probability: o.prob,
                    count: o.count,
                })
                .collect(),
            prob_any: pa,
            count_any: ca,
        });
        all.push((outs, pa, ca));
    }
    if report.inconclusive {
        return report;
    }
    for i in 0..all.len() {
        for j in i + 1..all.len() {
            let (a, pa, ca) = &all[i];
            let (b, pb, cb) = &all[j];
            report.max_distance = report.max_distance.max(distance(a, b));
            report.counts_agree &= same_counts(a, b);
            report.any_agree &= (pa - pb).abs() <= PROB_TOL && ca == cb;
        }
    }
    report
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct MixedAgreementReport {
    /// Strategies under which the tree was maximal and the comparison ran.
    pub checked: usize,
    pub max_difference: f64,
    pub failures: Vec<String>,
    pub subject_violations: Vec<String>,
}

/// For each strategy whose tree from `c` is maximal within `depth`, runs
/// the mixed computation from `{1: c}` until every entry is normal and
/// compares its final (hence supremal) value at each normal form with the
/// tree's probability.
pub fn check_mixed_agreement(
    c: &Configuration,
    strategies: &[Strategy],
    depth: usize,
    gates: &GateRegistry,
) -> MixedAgreementReport {
    let mut report = MixedAgreementReport::default();
    for s in strategies {
        let Ok(built) = build_computation(c, s, BuildLimits::depth(depth), gates) else {
            continue;
        };
        if !built.maximal {
            continue;
        }
        report.checked += 1;
        let mut m = MixedState::point(c.clone());
        let mut step = 0;
        while !m.all_normal(gates) && step <= depth {
            m = match mixed_step(&m, s, step, gates) {
                Ok(next) => next,
                Err(e) => {
                    report.failures.push(format!("{c} under {s}: {e}"));
                    break;
                }
            };
            for (d, _) in m.entries() {
                audit(
                    d.term(),
                    gates,
                    "mixed entry",
                    &mut report.subject_violations,
                );
            }
            step += 1;
        }
        if !m.all_normal(gates) {
            report.failures.push(format!(
                "{c} under {s}: mixed run not normal after {step} steps"
            ));
            continue;
        }
        let mut compare = |d: &Configuration, mixed: f64| {
            let tree = prob_of(&built.tree, d, gates).expect("normal form");
            let diff = (tree - mixed).abs();
            report.max_difference = report.max_difference.max(diff);
            if diff > PROB_TOL {
                report.failures.push(format!(
                    "{c} under {s}: at {d} tree {tree} but mixed {mixed}"
                ));
            }
        };
        for o in outcomes(&built.tree) {
            compare(&o.config, m.get(&o.config));
        }
        for (d, p) in m.entries() {
            if is_normal_form(d, gates) {
                compare(d, *p);
            }
        }
    }
    report
}

#[derive(Clone, Debug, Serialize)]
pub struct GeometricReport {
    /// `P(0)` for the fixed-point coin term cut after `n` measurements,
    /// for `n = 1..=rounds`.
    pub fixed_point: Vec<f64>,
    /// `P(0)` for the coin term unrolled `n` times.
    pub unrolled: Vec<f64>,
    pub expected: Vec<f64>,
    pub failures: Vec<String>,
}

/// Compares the probability of returning 0 within `n` coin tosses with
/// `1 - 2^-n`.
pub fn check_geometric(rounds: usize) -> GeometricReport {
    let gates = GateRegistry::builtin();
    let zero = Configuration::from_term(parse_term("0").expect("literal"));
    let y = Configuration::from_term(y_coin_term());
    let mut report = GeometricReport {
        fixed_point: Vec::new(),
        unrolled: Vec::new(),
        expected: Vec::new(),
        failures: Vec::new(),
    };
    for n in 1..=rounds {
        let expected = 1.0 - 0.5f64.powi(n as i32);
        report.expected.push(expected);
        let limits = BuildLimits {
            max_depth: 64 * (n + 1),
            max_measurements: Some(n),
            ..BuildLimits::default()
        };
        let value = build_computation(&y, &Strategy::Leftmost, limits, &gates)
            .map_err(|e| e.to_string())
            .and_then(|b| prob_of(&b.tree, &zero, &gates).map_err(|e| e.to_string()));
        match value {
            Ok(v) => report.fixed_point.push(v),
            Err(e) => {
                report
                    .failures
                    .push(format!("fixed point, {n} rounds: {e}"));
                report.fixed_point.push(f64::NAN);
            }
        }
        let coin = Configuration::from_term(coin_term(n));
        let value = build_computation(&coin, &Strategy::Leftmost, BuildLimits::default(), &gates)
            .map_err(|e| e.to_string())
            .and_then(|b| {
                if b.maximal {
                    prob_of(&b.tree, &zero, &gates).map_err(|e| e.to_string())
                } else {
                    Err("tree not maximal".to_string())
                }
            });
        match value {
            Ok(v) => report.unrolled.push(v),
            Err(e) => {
                report.failures.push(format!("unrolled, {n} rounds: {e}"));
                report.unrolled.push(f64::NAN);
            }
        }
    }
    for (name, values) in [
        ("fixed point", &report.fixed_point),
        ("unrolled", &report.unrolled),
    ] {
        for (i, (v, e)) in values.iter().zip(&report.expected).enumerate() {
            if !((v - e).abs() <= PROB_TOL) {
                report
                    .failures
                    .push(format!("{name}, {} rounds: {v} but expected {e}", i + 1));
            }
        }
        if values.windows(2).any(|w| !(w[0] <= w[1])) {
            report.failures.push(format!("{name}: not monotone"));
        }
    }
    report
}
