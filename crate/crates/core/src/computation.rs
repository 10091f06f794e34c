//! Probabilistic computation trees and their quantitative measures.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use thiserror::Error;

use crate::quantum::GateRegistry;
use crate::reduction::{
    contract, enumerate_redexes, is_normal_form, Configuration, Label, Redex, ReductionError,
};

/// Tolerance for comparing probabilities of outcomes.
pub const PROB_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ComputationError {
    #[error("configuration {0} is not in normal form")]
    NotNormal(String),
    #[error("node budget of {0} exceeded")]
    NodeBudget(usize),
    #[error(transparent)]
    Reduction(#[from] ReductionError),
}

/// Picks one redex out of the list produced by
/// [`crate::reduction::enumerate_redexes`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Strategy {
    Leftmost,
    Rightmost,
    /// A pseudo-random choice determined by the seed and the configuration.
    Random {
        seed: u64,
    },
    /// `script[d]` is used at depth `d`; past the end, or when out of
    /// range, the first redex is taken.
    Scripted(Vec<usize>),
}

fn fnv1a(bytes: impl IntoIterator<Item = u8>, mut h: u64) -> u64 {
    for b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

impl Strategy {
    pub fn choose(&self, c: &Configuration, redexes: &[Redex], depth: usize) -> usize {
        let n = redexes.len();
        assert!(n > 0, "no redex to choose from");
        match self {
            Strategy::Leftmost => 0,
            Strategy::Rightmost => n - 1,
            Strategy::Random { seed } => {
                let h = fnv1a(seed.to_le_bytes(), 0xcbf2_9ce4_8422_2325);
                let h = fnv1a(c.term().to_string().into_bytes(), h);
                let h = fnv1a(c.qvars().len().to_le_bytes(), h);
                ChaCha8Rng::seed_from_u64(h).gen_range(0..n)
            }
            Strategy::Scripted(script) => match script.get(depth) {
                Some(&i) if i < n => i,
                _ => 0,
            },
        }
    }
}

impl std::fmt::Display for Strategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Strategy::Leftmost => f.write_str("leftmost"),
            Strategy::Rightmost => f.write_str("rightmost"),
            Strategy::Random { seed } => write!(f, "random({seed})"),
            Strategy::Scripted(s) => write!(f, "scripted({s:?})"),
        }
    }
}

#[derive(Clone, Debug)]
pub enum ProbComputation {
    /// `normal` records whether the configuration is a normal form; a leaf
    /// that is not one was cut by a bound.
    Leaf { config: Configuration, normal: bool },
    Unary {
        config: Configuration,
        label: Label,
        child: Box<ProbComputation>,
    },
    /// A measurement of `qubit`: outcome 0 with probability `p` leads to
    /// `left`, outcome 1 with probability `q` to `right`.
    Binary {
        config: Configuration,
        p: f64,
        q: f64,
        qubit: String,
        left: Box<ProbComputation>,
        right: Box<ProbComputation>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BuildLimits {
    /// Maximum number of edges from the root to a leaf.
    pub max_depth: usize,
    /// Maximum number of measurements along a path, if any.
    pub max_measurements: Option<usize>,
    /// Resource guard on the total number of nodes.
    pub max_nodes: usize,
}

impl BuildLimits {
    pub fn depth(max_depth: usize) -> Self {
        BuildLimits {
            max_depth,
            ..Self::default()
        }
    }
}

impl Default for BuildLimits {
    fn default() -> Self {
        BuildLimits {
            max_depth: 64,
            max_measurements: None,
            max_nodes: 1 << 20,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Built {
    pub tree: ProbComputation,
    /// Every leaf is a normal form.
    pub maximal: bool,
    pub nodes: usize,
}

struct Builder<'a> {
    strat: &'a Strategy,
    limits: BuildLimits,
    gates: &'a GateRegistry,
    nodes: usize,
    maximal: bool,
}

impl Builder<'_> {
    fn build(
        &mut self,
        config: Configuration,
        depth: usize,
        measurements: usize,
    ) -> Result<ProbComputation, ComputationError> {
        self.nodes += 1;
        if self.nodes > self.limits.max_nodes {
            return Err(ComputationError::NodeBudget(self.limits.max_nodes));
        }
        let redexes = enumerate_redexes(&config, self.gates);
        if redexes.is_empty() {
            return Ok(ProbComputation::Leaf {
                config,
                normal: true,
            });
        }
        let redex = &redexes[self.strat.choose(&config, &redexes, depth)];
        let meas_blocked = redex.label.is_meas()
            && self
                .limits
                .max_measurements
                .is_some_and(|m| measurements >= m);
        if depth >= self.limits.max_depth || meas_blocked {
            self.maximal = false;
            return Ok(ProbComputation::Leaf {
                config,
                normal: false,
            });
        }
        let mut outs = contract(&config, redex, None, self.gates)?;
        match &redex.label {
            Label::Meas(r) => {
                let (q, right) = outs.pop().expect("two outcomes");
                let (p, left) = outs.pop().expect("two outcomes");
                let qubit = r.clone();
                let left = self.build(left, depth + 1, measurements + 1)?;
                let right = self.build(right, depth + 1, measurements + 1)?;
                Ok(ProbComputation::Binary {
                    config,
                    p,
                    q,
                    qubit,
                    left: Box::new(left),
                    right: Box::new(right),
                })
            }
            label => {
                let label = label.clone();
                let (_, next) = outs.pop().expect("one outcome");
                let child = self.build(next, depth + 1, measurements)?;
                Ok(ProbComputation::Unary {
                    config,
                    label,
                    child: Box::new(child),
                })
            }
        }
    }
}

/// Expands `root` by the strategy's choices, following both outcomes of
/// every measurement, until normal forms or the limits are reached.
pub fn build_computation(
    root: &Configuration,
    strat: &Strategy,
    limits: BuildLimits,
    gates: &GateRegistry,
) -> Result<Built, ComputationError> {
    let mut b = Builder {
        strat,
        limits,
        gates,
        nodes: 0,
        maximal: true,
    };
    let tree = b.build(root.clone(), 0, 0)?;
    Ok(Built {
        tree,
        maximal: b.maximal,
        nodes: b.nodes,
    })
}

/// `δ(C)`: 0 for a zero register, 1 otherwise.
pub fn delta(c: &Configuration) -> f64 {
    if c.is_zero() {
        0.0
    } else {
        1.0
    }
}

fn require_normal(c: &Configuration, gates: &GateRegistry) -> Result<(), ComputationError> {
    if is_normal_form(c, gates) {
        Ok(())
    } else {
        Err(ComputationError::NotNormal(c.to_string()))
    }
}

impl ProbComputation {
    pub fn leaf(config: Configuration, gates: &GateRegistry) -> Self {
        let normal = is_normal_form(&config, gates);
        ProbComputation::Leaf { config, normal }
    }

    pub fn root(&self) -> &Configuration {
        match self {
            ProbComputation::Leaf { config, .. }
            | ProbComputation::Unary { config, .. }
            | ProbComputation::Binary { config, .. } => config,
        }
    }

    /// Whether every leaf is a normal form.
    pub fn is_maximal(&self) -> bool {
        match self {
            ProbComputation::Leaf { normal, .. } => *normal,
            ProbComputation::Unary { child, .. } => child.is_maximal(),
            ProbComputation::Binary { left, right, .. } => left.is_maximal() && right.is_maximal(),
        }
    }

    pub fn size(&self) -> usize {
        match self {
            ProbComputation::Leaf { .. } => 1,
            ProbComputation::Unary { child, .. } => 1 + child.size(),
            ProbComputation::Binary { left, right, .. } => 1 + left.size() + right.size(),
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            ProbComputation::Leaf { .. } => 0,
            ProbComputation::Unary { child, .. } => 1 + child.depth(),
            ProbComputation::Binary { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    /// Folds the leaves: `Unary` passes through, `Binary` combines with
    /// `both(p, q, left, right)`.
    fn fold<T>(
        &self,
        leaf: &impl Fn(&Configuration, bool) -> T,
        both: &impl Fn(f64, f64, T, T) -> T,
    ) -> T {
        match self {
            ProbComputation::Leaf { config, normal } => leaf(config, *normal),
            ProbComputation::Unary { child, .. } => child.fold(leaf, both),
            ProbComputation::Binary {
                p, q, left, right, ..
            } => both(*p, *q, left.fold(leaf, both), right.fold(leaf, both)),
        }
    }

    /// Visits every leaf with its path probability and normal-form flag.
    pub fn for_each_leaf(&self, f: &mut impl FnMut(&Configuration, f64, bool)) {
        self.visit_leaves(1.0, f);
    }

    fn visit_leaves(&self, weight: f64, f: &mut impl FnMut(&Configuration, f64, bool)) {
        match self {
            ProbComputation::Leaf { config, normal } => f(config, weight, *normal),
            ProbComputation::Unary { child, .. } => child.visit_leaves(weight, f),
            ProbComputation::Binary {
                p, q, left, right, ..
            } => {
                left.visit_leaves(weight * p, f);
                right.visit_leaves(weight * q, f);
            }
        }
    }

    pub fn to_json(&self) -> Value {
        match self {
            ProbComputation::Leaf { config, normal } => json!({
                "kind": "leaf",
                "normal": normal,
                "config": config.to_json(),
            }),
            ProbComputation::Unary {
                config,
                label,
                child,
            } => json!({
                "kind": "unary",
                "label": label.to_string(),
                "config": config.to_json(),
                "child": child.to_json(),
            }),
            ProbComputation::Binary {
                config,
                p,
                q,
                qubit,
                left,
                right,
            } => json!({
                "kind": "binary",
                "qubit": qubit,
                "p": p,
                "q": q,
                "config": config.to_json(),
                "left": left.to_json(),
                "right": right.to_json(),
            }),
        }
    }

    /// One node per line: the edge taken into the node, its probability
    /// and the configuration.
    pub fn trace_text(&self) -> String {
        let mut out = String::new();
        self.write_trace(&mut out, 0, "root", 1.0);
        out
    }

    fn write_trace(&self, out: &mut String, indent: usize, edge: &str, prob: f64) {
        let mark = match self {
            ProbComputation::Leaf { normal: true, .. } => " nf",
            ProbComputation::Leaf { normal: false, .. } => " cut",
            _ => "",
        };
        let _ = writeln!(
            out,
            "{:indent$}{edge} {} {}{mark}",
            "",
            format_prob(prob),
            self.root(),
            indent = indent
        );
        match self {
            ProbComputation::Leaf { .. } => {}
            ProbComputation::Unary { label, child, .. } => {
                child.write_trace(out, indent + 2, &label.to_string(), 1.0)
            }
            ProbComputation::Binary {
                p,
                q,
                qubit,
                left,
                right,
                ..
            } => {
                left.write_trace(out, indent + 2, &format!("meas_{qubit}=0"), *p);
                right.write_trace(out, indent + 2, &format!("meas_{qubit}=1"), *q);
            }
        }
    }
}

/// `P(P)(C)`: the probability of observing `c` as a leaf.
pub fn prob_of(
    p: &ProbComputation,
    c: &Configuration,
    gates: &GateRegistry,
) -> Result<f64, ComputationError> {
    require_normal(c, gates)?;
    Ok(p.fold(
        &|leaf, _| if leaf == c { delta(leaf) } else { 0.0 },
        &|p, q, l, r| p * l + q * r,
    ))
}

/// `N(P)(C)`: the number of leaves equal to `c`, whatever their register.
pub fn count_of(
    p: &ProbComputation,
    c: &Configuration,
    gates: &GateRegistry,
) -> Result<usize, ComputationError> {
    require_normal(c, gates)?;
    Ok(p.fold(&|leaf, _| usize::from(leaf == c), &|_, _, l, r| l + r))
}

pub fn prob_any(p: &ProbComputation) -> f64 {
    p.fold(
        &|leaf, normal| if normal { delta(leaf) } else { 0.0 },
        &|p, q, l, r| p * l + q * r,
    )
}

pub fn count_any(p: &ProbComputation) -> usize {
    p.fold(&|_, normal| usize::from(normal), &|_, _, l, r| l + r)
}

pub fn branch_degree(p: &ProbComputation) -> usize {
    match p {
        ProbComputation::Leaf { .. } => 1,
        ProbComputation::Unary { child, .. } => branch_degree(child),
        ProbComputation::Binary { left, right, .. } => branch_degree(left) + branch_degree(right),
    }
}

pub fn weight(p: &ProbComputation) -> usize {
    match p {
        ProbComputation::Leaf { .. } => 0,
        ProbComputation::Unary { label, child, .. } => {
            if label.in_k() {
                weight(child)
            } else {
                branch_degree(child) + weight(child)
            }
        }
        ProbComputation::Binary { left, right, .. } => {
            branch_degree(left) + branch_degree(right) + weight(left) + weight(right)
        }
    }
}

/// `R ⊑ P`.
pub fn is_subcomputation(r: &ProbComputation, p: &ProbComputation) -> bool {
    match (r, p) {
        (ProbComputation::Leaf { config, .. }, _) => config == p.root(),
        (
            ProbComputation::Unary {
                config: c,
                child: rc,
                ..
            },
            ProbComputation::Unary {
                config: d,
                child: pc,
                ..
            },
        ) => c == d && is_subcomputation(rc, pc),
        (
            ProbComputation::Binary {
                config: c,
                p: p1,
                q: q1,
                left: rl,
                right: rr,
                ..
            },
            ProbComputation::Binary {
                config: d,
                p: p2,
                q: q2,
                left: pl,
                right: pr,
                ..
            },
        ) => {
            c == d
                && (p1 - p2).abs() <= PROB_TOL
                && (q1 - q2).abs() <= PROB_TOL
                && is_subcomputation(rl, pl)
                && is_subcomputation(rr, pr)
        }
        _ => false,
    }
}

/// A random finite sub-computation: each node is cut to a leaf with
/// probability `cut`.
pub fn random_prune(
    p: &ProbComputation,
    cut: f64,
    rng: &mut impl Rng,
    gates: &GateRegistry,
) -> ProbComputation {
    if !matches!(p, ProbComputation::Leaf { .. }) && rng.gen_bool(cut) {
        return ProbComputation::leaf(p.root().clone(), gates);
    }
    match p {
        ProbComputation::Leaf { .. } => p.clone(),
        ProbComputation::Unary {
            config,
            label,
            child,
        } => ProbComputation::Unary {
            config: config.clone(),
            label: label.clone(),
            child: Box::new(random_prune(child, cut, rng, gates)),
        },
        ProbComputation::Binary {
            config,
            p,
            q,
            qubit,
            left,
            right,
        } => ProbComputation::Binary {
            config: config.clone(),
            p: *p,
            q: *q,
            qubit: qubit.clone(),
            left: Box::new(random_prune(left, cut, rng, gates)),
            right: Box::new(random_prune(right, cut, rng, gates)),
        },
    }
}

/// One normal-form outcome of a tree.
#[derive(Clone, Debug)]
pub struct Outcome {
    pub config: Configuration,
    pub prob: f64,
    pub count: usize,
}

/// The normal-form leaves of `p`, merged up to configuration equality, with
/// their `P` and `N` values. Order is first appearance in the tree.
pub fn outcomes(p: &ProbComputation) -> Vec<Outcome> {
    let mut out: Vec<Outcome> = Vec::new();
    p.for_each_leaf(&mut |c, w, normal| {
        if !normal {
            return;
        }
        let contribution = w * delta(c);
        match out.iter_mut().find(|o| o.config == *c) {
            Some(o) => {
                o.prob += contribution;
                o.count += 1;
            }
            None => out.push(Outcome {
                config: c.clone(),
                prob: contribution,
                count: 1,
            }),
        }
    });
    out
}

/// Shortest decimal rendering with at most twelve fractional digits.
pub fn format_prob(x: f64) -> String {
    let s = format!("{x:.12}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".to_string()
    } else {
        s.to_string()
    }
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

    fn reg(amps: &[f64]) -> QuantumRegister {
        QuantumRegister::from_amplitudes(
            vec!["r0".into()],
            amps.iter().map(|&a| Complex64::new(a, 0.0)).collect(),
        )
        .unwrap()
    }

    fn build(c: &Configuration, s: &Strategy, depth: usize) -> Built {
        build_computation(c, s, BuildLimits::depth(depth), &g()).unwrap()
    }

    #[test]
    fn leaf_tree() {
        let b = build(&conf("0"), &Strategy::Leftmost, 5);
        assert!(b.maximal);
        assert!(matches!(b.tree, ProbComputation::Leaf { normal: true, .. }));
        assert_eq!(prob_any(&b.tree), 1.0);
        assert_eq!(count_any(&b.tree), 1);
        assert_eq!((weight(&b.tree), branch_degree(&b.tree)), (0, 1));
    }

    #[test]
    fn hadamard_tree() {
        let b = build(&conf(HADAMARD), &Strategy::Leftmost, 10);
        assert!(b.maximal);
        let outs = outcomes(&b.tree);
        assert_eq!(outs.len(), 2);
        let zero = conf("0");
        let one = conf("1");
        assert!((prob_of(&b.tree, &zero, &g()).unwrap() - 0.5).abs() < 1e-12);
        assert_eq!(count_of(&b.tree, &one, &g()).unwrap(), 1);
        assert!((prob_any(&b.tree) - 1.0).abs() < 1e-12);
        assert_eq!(count_any(&b.tree), 2);
        assert!(prob_of(&b.tree, &conf(HADAMARD), &g()).is_err());
    }

    #[test]
    fn single_measurement() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let c = Configuration::new(reg(&[s, s]), Term::meas(Term::qvar("r0"))).unwrap();
        let b = build(&c, &Strategy::Rightmost, 1);
        let ProbComputation::Binary {
            p, q, left, right, ..
        } = &b.tree
        else {
            panic!("expected a measurement")
        };
        assert!((p - 0.5).abs() < 1e-12 && (q - 0.5).abs() < 1e-12);
        assert_eq!(*left.root(), conf("!0"));
        assert_eq!(*right.root(), conf("!1"));
        assert_eq!((weight(&b.tree), branch_degree(&b.tree)), (2, 2));
    }

    use crate::syntax::Term;

    #[test]
    fn zero_probability_branch() {
        let c = Configuration::new(reg(&[1.0, 0.0]), Term::meas(Term::qvar("r0"))).unwrap();
        let b = build(&c, &Strategy::Leftmost, 3);
        let ProbComputation::Binary { right, .. } = &b.tree else {
            panic!()
        };
        assert_eq!(delta(right.root()), 0.0);
        assert_eq!(delta(&conf("0")), 1.0);
        // The leaf reached through the impossible outcome is `[0, {}, !1]`,
        // which differs from `[1, {}, !1]` by its register.
        let dead = right.root();
        assert_eq!(dead.term().to_string(), "!1");
        assert_eq!(prob_of(&b.tree, dead, &g()).unwrap(), 0.0);
        assert_eq!(count_of(&b.tree, dead, &g()).unwrap(), 1);
        assert_eq!(count_of(&b.tree, &conf("!1"), &g()).unwrap(), 0);
        assert_eq!(count_any(&b.tree), 2);
        assert!((prob_any(&b.tree) - 1.0).abs() < 1e-12);
        let zero_reg = Configuration::new(QuantumRegister::zero(&["r"]), Term::qvar("r")).unwrap();
        assert_eq!(delta(&zero_reg), 0.0);
    }

    #[test]
    fn weight_of_k_step() {
        let b = build(&conf("((\\x. x) 0) 1"), &Strategy::Leftmost, 1);
        let ProbComputation::Unary { label, .. } = &b.tree else {
            panic!()
        };
        assert_eq!(*label, Label::RCm);
        assert!(!b.maximal);
        assert_eq!((weight(&b.tree), branch_degree(&b.tree)), (0, 1));
        let b = build(&conf("(\\x. x) 0"), &Strategy::Leftmost, 4);
        assert_eq!((weight(&b.tree), branch_degree(&b.tree)), (1, 1));
    }

    #[test]
    fn subcomputations() {
        let b = build(&conf(HADAMARD), &Strategy::Leftmost, 10);
        let root_leaf = ProbComputation::leaf(b.tree.root().clone(), &g());
        assert!(is_subcomputation(&root_leaf, &b.tree));
        assert!(is_subcomputation(&b.tree, &b.tree));
        let other = ProbComputation::leaf(conf("0"), &g());
        assert!(!is_subcomputation(&other, &b.tree));
    }

    #[test]
    fn truncated_leaf_counts_nothing() {
        let b = build(&conf("(\\x. x) 0"), &Strategy::Leftmost, 0);
        assert!(!b.maximal);
        assert_eq!(prob_any(&b.tree), 0.0);
        assert_eq!(count_any(&b.tree), 0);
    }

    #[test]
    fn strategies_are_deterministic() {
        let c = conf("(\\x. x) ((\\y. y) ((\\z. z) 0))");
        let rs = enumerate_redexes(&c, &g());
        for seed in 0..5 {
            let s = Strategy::Random { seed };
            assert_eq!(s.choose(&c, &rs, 0), s.choose(&c, &rs, 7));
        }
        assert_eq!(Strategy::Rightmost.choose(&c, &rs, 0), rs.len() - 1);
        let s = Strategy::Scripted(vec![2, 99]);
        assert_eq!(s.choose(&c, &rs, 0), 2);
        assert_eq!(s.choose(&c, &rs, 1), 0);
        assert_eq!(s.choose(&c, &rs, 5), 0);
    }

    #[test]
    fn node_budget() {
        let limits = BuildLimits {
            max_nodes: 3,
            ..BuildLimits::default()
        };
        let c = conf("(\\x. x) ((\\y. y) ((\\z. z) 0))");
        let e = build_computation(&c, &Strategy::Leftmost, limits, &g()).unwrap_err();
        assert_eq!(e, ComputationError::NodeBudget(3));
    }

    #[test]
    fn probability_format() {
        assert_eq!(format_prob(0.5), "0.5");
        assert_eq!(format_prob(1.0), "1");
        assert_eq!(format_prob(0.0), "0");
        assert_eq!(format_prob(1.0 / 3.0), "0.333333333333");
    }

    #[test]
    fn trace_lines() {
        let b = build(&conf(HADAMARD), &Strategy::Leftmost, 10);
        let text = b.tree.trace_text();
        assert_eq!(text.lines().count(), b.tree.size());
        assert!(text.lines().next().unwrap().starts_with("root 1 "));
        assert!(text.contains("meas_r0=0 0.5"));
        assert_eq!(b.tree.to_json()["kind"], "unary");
    }
}
