//! Configurations and the labelled one-step reduction.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_complex::Complex64;
use serde_json::{json, Value};
use thiserror::Error;

use crate::quantum::{GateRegistry, QuantumError, QuantumRegister, REGISTER_TOL};
use crate::syntax::{fresh_name, Pattern, Term};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ReductionError {
    #[error("no {label} redex at position {position:?}")]
    StaleRedex { position: Vec<usize>, label: Label },
    #[error("an outcome was requested for a {0} step")]
    OutcomeForNonMeas(Label),
    #[error("quantum variables {0:?} occur in the term but not in the register")]
    UnregisteredQubits(Vec<String>),
    #[error(transparent)]
    Quantum(#[from] QuantumError),
}

/// A reduction label. `Meas` carries the measured quantum variable; the
/// outcome is chosen when the step is taken.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    Uq,
    New,
    LBeta,
    QBeta,
    CBeta,
    LCm,
    RCm,
    If1,
    If0,
    Meas(String),
}

impl Label {
    pub fn in_k(&self) -> bool {
        matches!(self, Label::LCm | Label::RCm)
    }

    pub fn in_n(&self) -> bool {
        !self.in_k() && self.in_nm()
    }

    pub fn in_nm(&self) -> bool {
        !matches!(self, Label::Meas(_))
    }

    pub fn is_meas(&self) -> bool {
        !self.in_nm()
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Uq => f.write_str("Uq"),
            Label::New => f.write_str("new"),
            Label::LBeta => f.write_str("l.beta"),
            Label::QBeta => f.write_str("q.beta"),
            Label::CBeta => f.write_str("c.beta"),
            Label::LCm => f.write_str("l.cm"),
            Label::RCm => f.write_str("r.cm"),
            Label::If1 => f.write_str("if1"),
            Label::If0 => f.write_str("if0"),
            Label::Meas(r) => write!(f, "meas_{r}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Redex {
    pub position: Vec<usize>,
    pub label: Label,
}

impl fmt::Display for Redex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let path: Vec<String> = self.position.iter().map(usize::to_string).collect();
        write!(f, "{} at [{}]", self.label, path.join("."))
    }
}

/// A configuration `[Q, QV, M]` in canonical form.
///
/// Quantum variables are renamed `r0, r1, ...` by first occurrence in the
/// term, followed by unused ones in the order of their original names, and
/// bound classical variables are α-canonical. Equality compares canonical
/// terms exactly and amplitudes within [`REGISTER_TOL`].
#[derive(Clone, Debug)]
pub struct Configuration {
    register: QuantumRegister,
    term: Term,
}

impl Configuration {
    pub fn new(register: QuantumRegister, term: Term) -> Result<Self, ReductionError> {
        let missing: Vec<String> = term
            .free_quantum_vars()
            .into_iter()
            .filter(|r| !register.contains(r))
            .collect();
        if !missing.is_empty() {
            return Err(ReductionError::UnregisteredQubits(missing));
        }
        Ok(Self::canonicalize(register, term))
    }

    /// A program with an empty register. Any quantum variables in the term
    /// start in `|0⟩`.
    pub fn from_term(term: Term) -> Self {
        let zeros: Vec<(String, bool)> = term
            .free_quantum_vars()
            .into_iter()
            .map(|r| (r, false))
            .collect();
        let register = QuantumRegister::basis(&zeros).expect("distinct names");
        Self::canonicalize(register, term)
    }

    fn canonicalize(register: QuantumRegister, term: Term) -> Self {
        let mut order = term.quantum_vars_in_order();
        let used: BTreeSet<&String> = order.iter().collect();
        let unused: Vec<String> = register
            .qvars()
            .iter()
            .filter(|q| !used.contains(q))
            .cloned()
            .collect();
        order.extend(unused);
        let map: BTreeMap<String, String> = order
            .into_iter()
            .enumerate()
            .map(|(i, q)| (q, format!("r{i}")))
            .collect();
        let register = register
            .rename_qvars(&map)
            .expect("canonical renaming is bijective");
        let term = term.rename_qvars(&map).alpha_canonical();
        Configuration { register, term }
    }

    pub fn register(&self) -> &QuantumRegister {
        &self.register
    }

    pub fn qvars(&self) -> &[String] {
        self.register.qvars()
    }

    pub fn term(&self) -> &Term {
        &self.term
    }

    pub fn is_zero(&self) -> bool {
        self.register.is_zero()
    }

    pub fn to_json(&self) -> Value {
        let amps: Vec<Value> = self
            .register
            .amplitudes()
            .iter()
            .map(|a| json!([a.re, a.im]))
            .collect();
        json!({
            "qvars": self.qvars(),
            "amplitudes": amps,
            "term": self.term.to_string(),
        })
    }

    /// A description of the register as a sum of basis states.
    pub fn register_text(&self) -> String {
        let n = self.qvars().len();
        let amps = self.register.amplitudes();
        if n == 0 {
            return format_amplitude(amps[0]);
        }
        let terms: Vec<String> = amps
            .iter()
            .enumerate()
            .filter(|(_, a)| a.norm() > REGISTER_TOL)
            .map(|(i, a)| format!("{}|{:0n$b}>", format_amplitude(*a), i, n = n))
            .collect();
        if terms.is_empty() {
            "0".to_string()
        } else {
            terms.join(" + ")
        }
    }
}

fn format_amplitude(a: Complex64) -> String {
    let trim = |x: f64| {
        let s = format!("{x:.6}");
        let s = s.trim_end_matches('0').trim_end_matches('.').to_string();
        if s == "-0" {
            "0".to_string()
        } else {
            s
        }
    };
    if a.im.abs() <= REGISTER_TOL {
        trim(a.re)
    } else if a.re.abs() <= REGISTER_TOL {
        format!("{}i", trim(a.im))
    } else {
        format!("({}{:+}i)", trim(a.re), a.im)
    }
}

impl PartialEq for Configuration {
    fn eq(&self, other: &Self) -> bool {
        self.term == other.term && self.register.approx_eq(&other.register, REGISTER_TOL)
    }
}

impl fmt::Display for Configuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[{}, {{{}}}, {}]",
            self.register_text(),
            self.qvars().join(", "),
            self.term
        )
    }
}

/// One outcome of a contraction before canonicalization: quantum variable
/// names are preserved and a fresh qubit gets the least unused `rK`.
#[derive(Clone, Debug)]
pub struct RawOutcome {
    pub prob: f64,
    pub outcome: Option<bool>,
    pub register: QuantumRegister,
    pub term: Term,
}

fn qvar_tuple(t: &Term) -> Option<Vec<&str>> {
    match t {
        Term::QVar(r) => Some(vec![r.as_str()]),
        Term::Tuple(ts) => ts
            .iter()
            .map(|c| match c {
                Term::QVar(r) => Some(r.as_str()),
                _ => None,
            })
            .collect(),
        _ => None,
    }
}

fn is_linear_beta(t: &Term) -> bool {
    matches!(t, Term::App(f, _) if matches!(&**f, Term::Lam(p, _) if p.is_linear()))
}

/// Labels of the contractions matching at the root of `t`, in priority
/// order: β or Uq, then l.cm, then r.cm.
pub fn root_labels(t: &Term, gates: &GateRegistry) -> Vec<Label> {
    let mut out = Vec::new();
    match t {
        Term::App(f, a) => {
            match (&**f, &**a) {
                (Term::Lam(Pattern::Var(_), _), _) => out.push(Label::LBeta),
                (Term::Lam(Pattern::Tuple(xs), _), Term::Tuple(rs))
                    if xs.len() == rs.len() && rs.iter().all(|r| matches!(r, Term::QVar(_))) =>
                {
                    out.push(Label::QBeta)
                }
                (Term::Lam(Pattern::Bang(_), _), Term::Bang(_)) => out.push(Label::CBeta),
                (Term::Gate(g), arg) => {
                    if let (Some(gate), Some(targets)) = (gates.get(g), qvar_tuple(arg)) {
                        if gate.arity() == targets.len() {
                            out.push(Label::Uq);
                        }
                    }
                }
                _ => {}
            }
            if is_linear_beta(a) {
                out.push(Label::LCm);
            }
            if is_linear_beta(f) {
                out.push(Label::RCm);
            }
        }
        Term::If(c, _, _) => match **c {
            Term::Bit(true) => out.push(Label::If1),
            Term::Bit(false) => out.push(Label::If0),
            _ => {}
        },
        Term::New(c) if matches!(**c, Term::Bit(_)) => out.push(Label::New),
        Term::Meas(r) => {
            if let Term::QVar(r) = &**r {
                out.push(Label::Meas(r.clone()));
            }
        }
        _ => {}
    }
    out
}

/// Children reachable by the closure rules: never under `!`, never into the
/// branches of an `if`.
fn surface_children(t: &Term) -> std::ops::Range<usize> {
    match t {
        Term::Var(_) | Term::QVar(_) | Term::Bit(_) | Term::Gate(_) | Term::Bang(_) => 0..0,
        Term::New(_) | Term::Meas(_) | Term::Lam(..) | Term::If(..) => 0..1,
        Term::App(..) => 0..2,
        Term::Tuple(ts) => 0..ts.len(),
    }
}

/// Every redex of `t` in pre-order.
pub fn term_redexes(t: &Term, gates: &GateRegistry) -> Vec<Redex> {
    let mut out = Vec::new();
    collect_redexes(t, gates, &mut Vec::new(), &mut out);
    out
}

fn collect_redexes(t: &Term, gates: &GateRegistry, path: &mut Vec<usize>, out: &mut Vec<Redex>) {
    for label in root_labels(t, gates) {
        out.push(Redex {
            position: path.clone(),
            label,
        });
    }
    let children = t.children();
    for i in surface_children(t) {
        path.push(i);
        collect_redexes(children[i], gates, path, out);
        path.pop();
    }
}

pub fn enumerate_redexes(c: &Configuration, gates: &GateRegistry) -> Vec<Redex> {
    term_redexes(c.term(), gates)
}

pub fn is_normal_form(c: &Configuration, gates: &GateRegistry) -> bool {
    term_is_normal(c.term(), gates)
}

pub fn term_is_normal(t: &Term, gates: &GateRegistry) -> bool {
    root_labels(t, gates).is_empty()
        && surface_children(t)
            .zip(t.children())
            .all(|(_, c)| term_is_normal(c, gates))
}

pub fn abstraction_size(t: &Term) -> usize {
    t.abstraction_size()
}

fn surface_path(t: &Term, path: &[usize]) -> bool {
    match path.split_first() {
        None => true,
        Some((&i, rest)) => surface_children(t).contains(&i) && surface_path(t.children()[i], rest),
    }
}

/// Moves an application frame inside the abstraction `λπ.M`, renaming the
/// binders of `π` away from the free variables of the frame.
fn commute(lam: &Term, n: &Term, frame: &Term, frame_left: bool) -> Term {
    let Term::Lam(p, body) = lam else {
        unreachable!("commutation needs an abstraction")
    };
    let frame_fv = frame.free_vars();
    let mut p = p.clone();
    let mut body = (**body).clone();
    let clashes: Vec<String> = p
        .binders()
        .into_iter()
        .filter(|b| frame_fv.contains(*b))
        .map(str::to_string)
        .collect();
    if !clashes.is_empty() {
        let mut avoid = frame_fv.clone();
        avoid.extend(body.free_vars());
        avoid.extend(p.binders().into_iter().map(str::to_string));
        let mut rename = BTreeMap::new();
        for b in clashes {
            let fresh = fresh_name(&b, &avoid);
            avoid.insert(fresh.clone());
            body = body.substitute(&b, &Term::Var(fresh.clone()));
            rename.insert(b, fresh);
        }
        let r = |x: &String| rename.get(x).cloned().unwrap_or_else(|| x.clone());
        p = match p {
            Pattern::Var(x) => Pattern::Var(r(&x)),
            Pattern::Tuple(xs) => Pattern::Tuple(xs.iter().map(r).collect()),
            Pattern::Bang(x) => Pattern::Bang(r(&x)),
        };
    }
    let inner = if frame_left {
        Term::app(frame.clone(), body)
    } else {
        Term::app(body, frame.clone())
    };
    Term::app(Term::lam(p, inner), n.clone())
}

/// Performs `redex` on a preconfiguration, returning every outcome with its
/// probability (two for a measurement unless `outcome` selects one).
pub fn step_raw(
    register: &QuantumRegister,
    term: &Term,
    redex: &Redex,
    outcome: Option<bool>,
    gates: &GateRegistry,
) -> Result<Vec<RawOutcome>, ReductionError> {
    let stale = || ReductionError::StaleRedex {
        position: redex.position.clone(),
        label: redex.label.clone(),
    };
    if outcome.is_some() && !redex.label.is_meas() {
        return Err(ReductionError::OutcomeForNonMeas(redex.label.clone()));
    }
    if !surface_path(term, &redex.position) {
        return Err(stale());
    }
    let site = term.subterm(&redex.position).ok_or_else(stale)?;
    if !root_labels(site, gates).contains(&redex.label) {
        return Err(stale());
    }
    let replace = |new_site: Term| {
        term.replace_at(&redex.position, &mut |_| new_site.clone())
            .expect("position was checked")
    };
    let pure = |t: Term| {
        vec![RawOutcome {
            prob: 1.0,
            outcome: None,
            register: register.clone(),
            term: replace(t),
        }]
    };
    let out = match (&redex.label, site) {
        (Label::LBeta | Label::CBeta, Term::App(f, a)) => {
            let Term::Lam(p, body) = &**f else {
                unreachable!()
            };
            let x = p.binders()[0];
            let arg = match &**a {
                Term::Bang(inner) if redex.label == Label::CBeta => &**inner,
                other => other,
            };
            pure(body.substitute(x, arg))
        }
        (Label::QBeta, Term::App(f, a)) => {
            let (Term::Lam(p, body), Term::Tuple(rs)) = (&**f, &**a) else {
                unreachable!()
            };
            let result = p
                .binders()
                .into_iter()
                .zip(rs)
                .fold((**body).clone(), |acc, (x, r)| acc.substitute(x, r));
            pure(result)
        }
        (Label::Uq, Term::App(g, arg)) => {
            let Term::Gate(name) = &**g else {
                unreachable!()
            };
            let gate = gates
                .get(name)
                .ok_or_else(|| QuantumError::UnknownGate(name.clone()))?;
            let targets = qvar_tuple(arg).ok_or_else(stale)?;
            let register = register.apply_unitary(gate, &targets)?;
            vec![RawOutcome {
                prob: 1.0,
                outcome: None,
                register,
                term: replace((**arg).clone()),
            }]
        }
        (Label::LCm, Term::App(l, inner)) => {
            let Term::App(lam, n) = &**inner else {
                unreachable!()
            };
            pure(commute(lam, n, l, true))
        }
        (Label::RCm, Term::App(inner, l)) => {
            let Term::App(lam, n) = &**inner else {
                unreachable!()
            };
            pure(commute(lam, n, l, false))
        }
        (Label::If1 | Label::If0, Term::If(_, then, other)) => {
            let chosen = if redex.label == Label::If1 {
                then
            } else {
                other
            };
            pure((**chosen).clone())
        }
        (Label::New, Term::New(c)) => {
            let Term::Bit(bit) = **c else { unreachable!() };
            let taken: BTreeSet<String> = register.qvars().iter().cloned().collect();
            let r = (0..)
                .map(|i| format!("r{i}"))
                .find(|n| !taken.contains(n))
                .expect("unbounded name supply");
            let register = register.tensor_fresh(&r, bit)?;
            vec![RawOutcome {
                prob: 1.0,
                outcome: None,
                register,
                term: replace(Term::QVar(r)),
            }]
        }
        (Label::Meas(r), Term::Meas(_)) => {
            let bits = match outcome {
                Some(b) => vec![b],
                None => vec![false, true],
            };
            let mut outs = Vec::with_capacity(bits.len());
            for b in bits {
                let (prob, post) = register.normalized_measure(r, b)?;
                outs.push(RawOutcome {
                    prob,
                    outcome: Some(b),
                    register: post,
                    term: replace(Term::bang(Term::Bit(b))),
                });
            }
            outs
        }
        _ => return Err(stale()),
    };
    Ok(out)
}

/// Applies `redex` to `c`. A measurement yields both branches, outcome 0
/// first, unless `outcome` picks one. Results are canonical.
pub fn contract(
    c: &Configuration,
    redex: &Redex,
    outcome: Option<bool>,
    gates: &GateRegistry,
) -> Result<Vec<(f64, Configuration)>, ReductionError> {
    let outs = step_raw(&c.register, &c.term, redex, outcome, gates)?;
    Ok(outs
        .into_iter()
        .map(|o| {
            debug_assert!(
                crate::wellform::is_wf_configuration_term(&o.term, gates)
                    || !crate::wellform::is_wf_configuration_term(c.term(), gates),
                "subject reduction failed stepping {c} by {redex}"
            );
            (o.prob, Configuration::canonicalize(o.register, o.term))
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::parse_term;

    const S: f64 = std::f64::consts::FRAC_1_SQRT_2;

    fn g() -> GateRegistry {
        GateRegistry::builtin()
    }

    fn conf(src: &str) -> Configuration {
        Configuration::from_term(parse_term(src).unwrap())
    }

    fn plus() -> QuantumRegister {
        QuantumRegister::from_amplitudes(
            vec!["r0".into()],
            vec![Complex64::new(S, 0.0), Complex64::new(S, 0.0)],
        )
        .unwrap()
    }

    fn labels(c: &Configuration) -> Vec<String> {
        enumerate_redexes(c, &g())
            .iter()
            .map(|r| r.to_string())
            .collect()
    }

    #[test]
    fn enumerate_examples() {
        assert_eq!(labels(&conf("(\\x. x) 0")), ["l.beta at []"]);
        assert!(labels(&conf("!((\\x. x) 0)")).is_empty());
        let c = Configuration::new(plus(), parse_term("meas @r0").unwrap()).unwrap();
        assert_eq!(labels(&c), ["meas_r0 at []"]);
    }

    #[test]
    fn surface_reduction_skips_if_branches() {
        let c = conf("if (\\x. x) 1 then (\\y. y) 0 else 0");
        assert_eq!(labels(&c), ["l.beta at [0]"]);
    }

    #[test]
    fn beta_listed_before_commutations() {
        let c = conf("(\\x. x) ((\\y. y) 0)");
        assert_eq!(labels(&c), ["l.beta at []", "l.cm at []", "l.beta at [1]"]);
        let c = conf("((\\x. x) 0) 1");
        assert_eq!(labels(&c), ["r.cm at []", "l.beta at [0]"]);
    }

    #[test]
    fn contract_examples() {
        let c = conf("(\\x. x) 0");
        let r = &enumerate_redexes(&c, &g())[0];
        let out = contract(&c, r, None, &g()).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].0, 1.0);
        assert_eq!(out[0].1, conf("0"));

        let c = conf("new 0");
        let r = &enumerate_redexes(&c, &g())[0];
        let out = contract(&c, r, None, &g()).unwrap();
        let expected = Configuration::new(
            QuantumRegister::basis(&[("r0", false)]).unwrap(),
            Term::qvar("r0"),
        )
        .unwrap();
        assert_eq!(out[0].1, expected);

        let c = Configuration::new(plus(), parse_term("meas @r0").unwrap()).unwrap();
        let r = &enumerate_redexes(&c, &g())[0];
        let out = contract(&c, r, None, &g()).unwrap();
        assert_eq!(out.len(), 2);
        assert!((out[0].0 - 0.5).abs() < 1e-12 && (out[1].0 - 0.5).abs() < 1e-12);
        assert_eq!(out[0].1, conf("!0"));
        assert_eq!(out[1].1, conf("!1"));
        let one = contract(&c, r, Some(true), &g()).unwrap();
        assert_eq!(one.len(), 1);
        assert_eq!(one[0].1, conf("!1"));
    }

    #[test]
    fn contract_errors() {
        let c = conf("(\\x. x) 0");
        let r = enumerate_redexes(&c, &g())[0].clone();
        assert!(matches!(
            contract(&c, &r, Some(false), &g()),
            Err(ReductionError::OutcomeForNonMeas(_))
        ));
        let stale = Redex {
            position: vec![1],
            label: Label::LBeta,
        };
        assert!(matches!(
            contract(&c, &stale, None, &g()),
            Err(ReductionError::StaleRedex { .. })
        ));
        let under_bang = conf("!((\\x. x) 0)");
        let r = Redex {
            position: vec![0],
            label: Label::LBeta,
        };
        assert!(contract(&under_bang, &r, None, &g()).is_err());
    }

    #[test]
    fn normal_forms() {
        assert!(is_normal_form(&conf("0"), &g()));
        assert!(!is_normal_form(&conf("(\\x. x) 0"), &g()));
        assert!(is_normal_form(&conf("!((\\x. x) 0)"), &g()));
    }

    #[test]
    fn abstraction_size_examples() {
        let p = |s: &str| parse_term(s).unwrap();
        assert_eq!(abstraction_size(&p("\\x. x")), 1);
        assert_eq!(abstraction_size(&p("0")), 0);
        assert_eq!(abstraction_size(&p("(\\x. x 0) (\\y. y)")), 4);
    }

    #[test]
    fn gate_application() {
        let c = conf("CNOT <new 1, new 0>");
        let mut c = c;
        for _ in 0..2 {
            let r = enumerate_redexes(&c, &g())[0].clone();
            assert_eq!(r.label, Label::New);
            c = contract(&c, &r, None, &g()).unwrap().remove(0).1;
        }
        let r = enumerate_redexes(&c, &g())[0].clone();
        assert_eq!(r.label, Label::Uq);
        let c = contract(&c, &r, None, &g()).unwrap().remove(0).1;
        let expected = Configuration::new(
            QuantumRegister::basis(&[("a", true), ("b", true)]).unwrap(),
            parse_term("<@a, @b>").unwrap(),
        )
        .unwrap();
        assert_eq!(c, expected);
        assert!(is_normal_form(&c, &g()));
        // arity mismatch is stuck
        assert!(is_normal_form(&conf("H <@a, @b>"), &g()));
    }

    #[test]
    fn commutation_avoids_capture() {
        // l.cm with frame `x` free and binder `x`
        let t = parse_term("\\x. x ((\\x. x) 0)").unwrap();
        let r = term_redexes(&t, &g())
            .into_iter()
            .find(|r| r.label == Label::LCm)
            .unwrap();
        let out = step_raw(&QuantumRegister::empty(), &t, &r, None, &g()).unwrap();
        let reduct = &out[0].term;
        let Term::Lam(_, body) = reduct else { panic!() };
        let Term::App(f, n) = &**body else { panic!() };
        assert_eq!(**n, Term::Bit(false));
        let Term::Lam(Pattern::Var(b), inner) = &**f else {
            panic!()
        };
        assert_ne!(b, "x");
        assert_eq!(**inner, Term::app(Term::var("x"), Term::Var(b.clone())));
    }

    #[test]
    fn canonical_equality_ignores_qubit_names() {
        let a = Configuration::new(
            QuantumRegister::basis(&[("a", true), ("b", false)]).unwrap(),
            parse_term("<@b, @a>").unwrap(),
        )
        .unwrap();
        let b = Configuration::new(
            QuantumRegister::basis(&[("x", false), ("y", true)]).unwrap(),
            parse_term("<@x, @y>").unwrap(),
        )
        .unwrap();
        assert_eq!(a, b);
        assert_eq!(a.qvars(), ["r0", "r1"]);
        assert_eq!(a.term().to_string(), "<@r0, @r1>");
        let json = a.to_json();
        assert_eq!(json["term"], "<@r0, @r1>");
        assert_eq!(json["amplitudes"].as_array().unwrap().len(), 4);
    }

    #[test]
    fn unregistered_qubits_are_rejected() {
        let e = Configuration::new(QuantumRegister::empty(), Term::qvar("r")).unwrap_err();
        assert!(matches!(e, ReductionError::UnregisteredQubits(_)));
    }
}
