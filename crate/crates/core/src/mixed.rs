//! Mixed states: finitely supported distributions over configurations, and
//! their deterministic reduction.

use std::collections::HashMap;

use serde_json::{json, Value};
use thiserror::Error;

use crate::computation::{format_prob, Strategy, PROB_TOL};
use crate::quantum::GateRegistry;
use crate::reduction::{
    contract, enumerate_redexes, is_normal_form, Configuration, ReductionError,
};
use crate::syntax::Term;

/// Entries below this probability are listed by [`MixedState::negligible`].
pub const NEGLIGIBLE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MixedError {
    #[error("probabilities sum to {0}, not 1")]
    NotADistribution(f64),
    #[error("negative probability {0}")]
    NegativeProbability(f64),
    #[error("configuration {0} is not in normal form")]
    NotNormal(String),
    #[error("observation schedule must be strictly increasing")]
    BadSchedule,
    #[error(transparent)]
    Reduction(#[from] ReductionError),
}

/// A distribution `{p1:C1, ..., pk:Ck}`. Equal configurations are merged on
/// insertion; entries of probability exactly zero are not stored.
#[derive(Clone, Debug, Default)]
pub struct MixedState {
    entries: Vec<(Configuration, f64)>,
    index: HashMap<Term, Vec<usize>>,
}

impl MixedState {
    pub fn point(c: Configuration) -> Self {
        let mut m = Self::default();
        m.add(c, 1.0);
        m
    }

    /// Builds and validates a distribution; duplicates are merged.
    pub fn from_entries(
        entries: impl IntoIterator<Item = (Configuration, f64)>,
    ) -> Result<Self, MixedError> {
        let mut m = Self::default();
        for (c, p) in entries {
            if p < 0.0 {
                return Err(MixedError::NegativeProbability(p));
            }
            m.add(c, p);
        }
        m.validate()?;
        Ok(m)
    }

    fn add(&mut self, c: Configuration, p: f64) {
        if p == 0.0 {
            return;
        }
        let slots = self.index.entry(c.term().clone()).or_default();
        if let Some(&i) = slots.iter().find(|&&i| self.entries[i].0 == c) {
            self.entries[i].1 += p;
        } else {
            slots.push(self.entries.len());
            self.entries.push((c, p));
        }
    }

    pub fn total(&self) -> f64 {
        self.entries.iter().map(|(_, p)| p).sum()
    }

    pub fn validate(&self) -> Result<(), MixedError> {
        let total = self.total();
        if (total - 1.0).abs() > PROB_TOL {
            return Err(MixedError::NotADistribution(total));
        }
        Ok(())
    }

    pub fn entries(&self) -> &[(Configuration, f64)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// `M(c)`, with `c` compared up to configuration equality.
    pub fn get(&self, c: &Configuration) -> f64 {
        self.index
            .get(c.term())
            .and_then(|slots| slots.iter().find(|&&i| self.entries[i].0 == *c))
            .map_or(0.0, |&i| self.entries[i].1)
    }

    /// Entries sorted by canonical term, then register.
    pub fn sorted(&self) -> Vec<(&Configuration, f64)> {
        let mut v: Vec<(&Configuration, f64)> = self.entries.iter().map(|(c, p)| (c, *p)).collect();
        v.sort_by_cached_key(|(c, _)| (c.term().to_string(), c.register_text()));
        v
    }

    /// Entries with probability below [`NEGLIGIBLE`]. They are kept in the
    /// distribution; this only reports them.
    pub fn negligible(&self) -> Vec<(&Configuration, f64)> {
        self.sorted()
            .into_iter()
            .filter(|(_, p)| *p < NEGLIGIBLE)
            .collect()
    }

    /// Probability mass sitting on configurations with a zero register.
    pub fn zero_register_mass(&self) -> f64 {
        self.entries
            .iter()
            .filter(|(c, _)| c.is_zero())
            .map(|(_, p)| p)
            .sum()
    }

    pub fn all_normal(&self, gates: &GateRegistry) -> bool {
        self.entries.iter().all(|(c, _)| is_normal_form(c, gates))
    }

    /// `probability<TAB>term` lines, sorted.
    pub fn to_text(&self) -> String {
        self.sorted()
            .into_iter()
            .map(|(c, p)| {
                if c.qvars().is_empty() && !c.is_zero() {
                    format!("{}\t{}\n", format_prob(p), c.term())
                } else {
                    format!("{}\t{}\n", format_prob(p), c)
                }
            })
            .collect()
    }

    pub fn to_json(&self) -> Value {
        let entries: Vec<Value> = self
            .sorted()
            .into_iter()
            .map(|(c, p)| json!({ "probability": p, "config": c.to_json() }))
            .collect();
        Value::Array(entries)
    }
}

/// One `⟼` step. Normal forms persist; every other entry takes the
/// strategy's redex, a measurement contributing both outcomes. `step` is the
/// index of this step in the computation and is what a scripted strategy
/// consults.
pub fn mixed_step(
    m: &MixedState,
    strat: &Strategy,
    step: usize,
    gates: &GateRegistry,
) -> Result<MixedState, MixedError> {
    m.validate()?;
    let mut next = MixedState::default();
    for (c, p) in &m.entries {
        let redexes = enumerate_redexes(c, gates);
        if redexes.is_empty() {
            next.add(c.clone(), *p);
            continue;
        }
        let redex = &redexes[strat.choose(c, &redexes, step)];
        for (q, d) in contract(c, redex, None, gates)? {
            next.add(d, p * q);
        }
    }
    Ok(next)
}

/// `[m0, m1, ..., m_steps]`.
pub fn run_mixed(
    m0: &MixedState,
    strat: &Strategy,
    steps: usize,
    gates: &GateRegistry,
) -> Result<Vec<MixedState>, MixedError> {
    let mut out = Vec::with_capacity(steps + 1);
    out.push(m0.clone());
    for i in 0..steps {
        let next = mixed_step(&out[i], strat, i, gates)?;
        out.push(next);
    }
    Ok(out)
}

/// `P(M)(c) = M(c)` for a normal form `c`.
pub fn observe(m: &MixedState, c: &Configuration, gates: &GateRegistry) -> Result<f64, MixedError> {
    if !is_normal_form(c, gates) {
        return Err(MixedError::NotNormal(c.to_string()));
    }
    Ok(m.get(c))
}

#[derive(Clone, Debug, PartialEq)]
pub struct LimitReport {
    /// `observe(m_k, c)` for each scheduled `k`.
    pub values: Vec<f64>,
    /// Difference between the last two values (the last value if only one).
    pub last_increment: f64,
}

/// Observes `c` along the mixed computation from `m0` at the scheduled
/// step counts, approximating the supremum from below.
pub fn limit_observe(
    m0: &MixedState,
    strat: &Strategy,
    c: &Configuration,
    schedule: &[usize],
    gates: &GateRegistry,
) -> Result<LimitReport, MixedError> {
    if schedule.windows(2).any(|w| w[0] >= w[1]) {
        return Err(MixedError::BadSchedule);
    }
    if !is_normal_form(c, gates) {
        return Err(MixedError::NotNormal(c.to_string()));
    }
    let mut values = Vec::with_capacity(schedule.len());
    let mut m = m0.clone();
    let mut done = 0;
    for &k in schedule {
        while done < k {
            m = mixed_step(&m, strat, done, gates)?;
            done += 1;
        }
        values.push(m.get(c));
    }
    let last_increment = match values.as_slice() {
        [] => 0.0,
        [v] => *v,
        [.., a, b] => b - a,
    };
    Ok(LimitReport {
        values,
        last_increment,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::QuantumRegister;
    use crate::syntax::parse_term;
    use num_complex::Complex64;

    const HADAMARD: &str = "(\\!x. if x then 0 else 1) (meas (H (new 0)))";

    fn g() -> GateRegistry {
        GateRegistry::builtin()
    }

    fn conf(src: &str) -> Configuration {
        Configuration::from_term(parse_term(src).unwrap())
    }

    #[test]
    fn normal_form_is_a_fixpoint() {
        let m = MixedState::point(conf("0"));
        let n = mixed_step(&m, &Strategy::Leftmost, 0, &g()).unwrap();
        assert_eq!(n.len(), 1);
        assert_eq!(n.get(&conf("0")), 1.0);
        let run = run_mixed(&m, &Strategy::Rightmost, 3, &g()).unwrap();
        assert_eq!(run.len(), 4);
        assert!(run.iter().all(|s| s.get(&conf("0")) == 1.0));
    }

    #[test]
    fn measurement_splits() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let q = QuantumRegister::from_amplitudes(
            vec!["r0".into()],
            vec![Complex64::new(s, 0.0), Complex64::new(s, 0.0)],
        )
        .unwrap();
        let c = Configuration::new(q, parse_term("meas @r0").unwrap()).unwrap();
        let n = mixed_step(&MixedState::point(c), &Strategy::Leftmost, 0, &g()).unwrap();
        assert!((n.get(&conf("!0")) - 0.5).abs() < 1e-12);
        assert!((n.get(&conf("!1")) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn duplicates_merge() {
        let m = MixedState::from_entries([(conf("0"), 0.5), (conf("0"), 0.5)]).unwrap();
        assert_eq!(m.len(), 1);
        assert_eq!(m.get(&conf("0")), 1.0);
        assert!(matches!(
            MixedState::from_entries([(conf("0"), 0.5)]),
            Err(MixedError::NotADistribution(_))
        ));
    }

    #[test]
    fn hadamard_run() {
        let m = MixedState::point(conf(HADAMARD));
        let run = run_mixed(&m, &Strategy::Leftmost, 6, &g()).unwrap();
        let last = run.last().unwrap();
        assert!((observe(last, &conf("0"), &g()).unwrap() - 0.5).abs() < 1e-12);
        assert!((observe(last, &conf("1"), &g()).unwrap() - 0.5).abs() < 1e-12);
        assert_eq!(observe(last, &conf("<0, 1>"), &g()).unwrap(), 0.0);
        assert!(observe(last, &conf(HADAMARD), &g()).is_err());
        assert_eq!(last.to_text(), "0.5\t0\n0.5\t1\n");
    }

    #[test]
    fn limit_observation() {
        let m = MixedState::point(conf(HADAMARD));
        let r = limit_observe(
            &m,
            &Strategy::Leftmost,
            &conf("0"),
            &[1, 2, 3, 4, 5, 6],
            &g(),
        )
        .unwrap();
        assert!(r.values.windows(2).all(|w| w[0] <= w[1]));
        assert!((r.values[5] - 0.5).abs() < 1e-12);
        assert_eq!(r.last_increment, 0.0);
        assert!(matches!(
            limit_observe(&m, &Strategy::Leftmost, &conf("0"), &[2, 2], &g()),
            Err(MixedError::BadSchedule)
        ));
        let nf = MixedState::point(conf("1"));
        let r = limit_observe(&nf, &Strategy::Leftmost, &conf("1"), &[0, 1, 2], &g()).unwrap();
        assert_eq!(r.values, [1.0, 1.0, 1.0]);
    }
}
