//! The well-forming judgement `Γ ⊢ M`.
//!
//! Checking is resource inference: every subterm reports exactly which
//! linear classical and quantum variables it consumes, so the environment
//! split demanded by `app` and `tens` is read off rather than guessed.

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

use crate::quantum::GateRegistry;
use crate::syntax::{Pattern, Term};

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Environment {
    pub linear_classical: BTreeSet<String>,
    pub quantum: BTreeSet<String>,
    pub banged: BTreeSet<String>,
}

impl Environment {
    pub fn new() -> Self {
        Self::default()
    }

    /// The environment `QV(M)` used for configuration terms.
    pub fn quantum_only(qvars: impl IntoIterator<Item = String>) -> Self {
        Environment {
            quantum: qvars.into_iter().collect(),
            ..Self::default()
        }
    }

    pub fn with_linear(mut self, x: &str) -> Self {
        self.linear_classical.insert(x.to_string());
        self
    }

    pub fn with_banged(mut self, x: &str) -> Self {
        self.banged.insert(x.to_string());
        self
    }

    pub fn with_quantum(mut self, r: &str) -> Self {
        self.quantum.insert(r.to_string());
        self
    }

    /// Every classical name occurs at most once.
    pub fn is_well_formed(&self) -> bool {
        self.linear_classical.is_disjoint(&self.banged)
    }

    fn classical_names(&self) -> BTreeSet<String> {
        self.linear_classical.union(&self.banged).cloned().collect()
    }
}

impl fmt::Display for Environment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let items: Vec<String> = self
            .linear_classical
            .iter()
            .cloned()
            .chain(self.banged.iter().map(|x| format!("!{x}")))
            .chain(self.quantum.iter().map(|r| format!("@{r}")))
            .collect();
        f.write_str(&items.join(", "))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Rule {
    Const,
    QVar,
    CVar,
    Der,
    Prom,
    App,
    Tens,
    New,
    Lam1,
    Lam2,
    Lam3,
    Meas,
    If,
}

impl Rule {
    pub fn name(self) -> &'static str {
        match self {
            Rule::Const => "const",
            Rule::QVar => "qvar",
            Rule::CVar => "cvar",
            Rule::Der => "der",
            Rule::Prom => "prom",
            Rule::App => "app",
            Rule::Tens => "tens",
            Rule::New => "new",
            Rule::Lam1 => "lam1",
            Rule::Lam2 => "lam2",
            Rule::Lam3 => "lam3",
            Rule::Meas => "meas",
            Rule::If => "if",
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A derivation tree; each node concludes `env ⊢ term` by `rule`.
#[derive(Clone, Debug, PartialEq)]
pub struct Derivation {
    pub rule: Rule,
    pub env: Environment,
    pub term: Term,
    pub premises: Vec<Derivation>,
}

impl Derivation {
    pub fn size(&self) -> usize {
        1 + self.premises.iter().map(Derivation::size).sum::<usize>()
    }

    fn write_indented(&self, f: &mut fmt::Formatter<'_>, depth: usize) -> fmt::Result {
        writeln!(
            f,
            "{:indent$}{}: {} |- {}",
            "",
            self.rule,
            self.env,
            self.term,
            indent = 2 * depth
        )?;
        for p in &self.premises {
            p.write_indented(f, depth + 1)?;
        }
        Ok(())
    }
}

impl fmt::Display for Derivation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write_indented(f, 0)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum WfError {
    #[error("linear variable {var} used twice in `{subterm}`")]
    LinearUsedTwice { var: String, subterm: String },
    #[error("linear variable {var} unused in `{subterm}`")]
    LinearUnused { var: String, subterm: String },
    #[error("quantum variable @{var} duplicated in `{subterm}`")]
    QuantumDuplicated { var: String, subterm: String },
    #[error("quantum variable @{var} dropped")]
    QuantumDropped { var: String },
    #[error("quantum variable @{var} not in the environment")]
    QuantumNotInEnvironment { var: String },
    #[error("non-banged variable {var} under `!` in `{subterm}`")]
    NotBangedUnderBang { var: String, subterm: String },
    #[error("linear resource {var} inside an if branch in `{subterm}`")]
    LinearInIfBranch { var: String, subterm: String },
    #[error("unknown gate {0}")]
    UnknownGate(String),
    #[error("unbound variable {0}")]
    UnboundVariable(String),
    #[error("malformed environment: {0} is both linear and banged")]
    MalformedEnvironment(String),
}

struct Usage {
    deriv: Derivation,
    linear: BTreeSet<String>,
    quantum: BTreeSet<String>,
}

struct Checker<'a> {
    gates: &'a GateRegistry,
    quantum_env: &'a BTreeSet<String>,
    linear_scope: Vec<String>,
    banged_scope: Vec<String>,
}

fn first_common(a: &BTreeSet<String>, b: &BTreeSet<String>) -> Option<String> {
    a.intersection(b).next().cloned()
}

impl Checker<'_> {
    fn banged(&self) -> BTreeSet<String> {
        self.banged_scope.iter().cloned().collect()
    }

    fn node(
        &self,
        rule: Rule,
        term: &Term,
        linear: BTreeSet<String>,
        quantum: BTreeSet<String>,
        premises: Vec<Derivation>,
    ) -> Usage {
        let env = Environment {
            linear_classical: linear.clone(),
            quantum: quantum.clone(),
            banged: self.banged(),
        };
        Usage {
            deriv: Derivation {
                rule,
                env,
                term: term.clone(),
                premises,
            },
            linear,
            quantum,
        }
    }

    /// Joins premises of `app` and `tens`, whose resources must be disjoint.
    fn join(&mut self, rule: Rule, term: &Term, parts: &[Term]) -> Result<Usage, WfError> {
        let mut linear = BTreeSet::new();
        let mut quantum = BTreeSet::new();
        let mut premises = Vec::new();
        for p in parts {
            let u = self.infer(p)?;
            if let Some(x) = first_common(&linear, &u.linear) {
                return Err(WfError::LinearUsedTwice {
                    var: x,
                    subterm: term.to_string(),
                });
            }
            if let Some(r) = first_common(&quantum, &u.quantum) {
                return Err(WfError::QuantumDuplicated {
                    var: r,
                    subterm: term.to_string(),
                });
            }
            linear.extend(u.linear);
            quantum.extend(u.quantum);
            premises.push(u.deriv);
        }
        Ok(self.node(rule, term, linear, quantum, premises))
    }

    /// A premise that may only use banged variables.
    fn banged_only(&mut self, t: &Term, within: &Term, in_if: bool) -> Result<Usage, WfError> {
        let u = self.infer(t)?;
        if let Some(x) = u.linear.iter().next() {
            let (var, subterm) = (x.clone(), within.to_string());
            return Err(if in_if {
                WfError::LinearInIfBranch { var, subterm }
            } else {
                WfError::NotBangedUnderBang { var, subterm }
            });
        }
        if let Some(r) = u.quantum.iter().next() {
            let (var, subterm) = (format!("@{r}"), within.to_string());
            return Err(if in_if {
                WfError::LinearInIfBranch { var, subterm }
            } else {
                WfError::NotBangedUnderBang { var, subterm }
            });
        }
        Ok(u)
    }

    fn infer(&mut self, t: &Term) -> Result<Usage, WfError> {
        let none = BTreeSet::new;
        match t {
            Term::Bit(_) => Ok(self.node(Rule::Const, t, none(), none(), vec![])),
            Term::Gate(g) => {
                if !self.gates.contains(g) {
                    return Err(WfError::UnknownGate(g.clone()));
                }
                Ok(self.node(Rule::Const, t, none(), none(), vec![]))
            }
            Term::QVar(r) => {
                if !self.quantum_env.contains(r) {
                    return Err(WfError::QuantumNotInEnvironment { var: r.clone() });
                }
                Ok(self.node(Rule::QVar, t, none(), BTreeSet::from([r.clone()]), vec![]))
            }
            Term::Var(x) => {
                if self.banged_scope.contains(x) {
                    Ok(self.node(Rule::Der, t, none(), none(), vec![]))
                } else if self.linear_scope.contains(x) {
                    Ok(self.node(Rule::CVar, t, BTreeSet::from([x.clone()]), none(), vec![]))
                } else {
                    Err(WfError::UnboundVariable(x.clone()))
                }
            }
            Term::Bang(inner) => {
                let u = self.banged_only(inner, t, false)?;
                Ok(self.node(Rule::Prom, t, none(), none(), vec![u.deriv]))
            }
            Term::New(inner) | Term::Meas(inner) => {
                let rule = if matches!(t, Term::New(_)) {
                    Rule::New
                } else {
                    Rule::Meas
                };
                let u = self.infer(inner)?;
                Ok(self.node(rule, t, u.linear, u.quantum, vec![u.deriv]))
            }
            Term::App(f, a) => self.join(Rule::App, t, &[(**f).clone(), (**a).clone()]),
            Term::Tuple(ts) => self.join(Rule::Tens, t, ts),
            Term::If(c, then, other) => {
                let cu = self.infer(c)?;
                let tu = self.banged_only(then, t, true)?;
                let eu = self.banged_only(other, t, true)?;
                Ok(self.node(
                    Rule::If,
                    t,
                    cu.linear,
                    cu.quantum,
                    vec![cu.deriv, tu.deriv, eu.deriv],
                ))
            }
            Term::Lam(Pattern::Bang(x), body) => {
                self.banged_scope.push(x.clone());
                let u = self.infer(body);
                self.banged_scope.pop();
                let u = u?;
                Ok(self.node(Rule::Lam3, t, u.linear, u.quantum, vec![u.deriv]))
            }
            Term::Lam(p, body) => {
                let binders: Vec<String> = p.binders().into_iter().map(str::to_string).collect();
                let n = self.linear_scope.len();
                self.linear_scope.extend(binders.iter().cloned());
                let u = self.infer(body);
                self.linear_scope.truncate(n);
                let mut u = u?;
                for b in &binders {
                    if !u.linear.remove(b) {
                        return Err(WfError::LinearUnused {
                            var: b.clone(),
                            subterm: t.to_string(),
                        });
                    }
                }
                let rule = if matches!(p, Pattern::Var(_)) {
                    Rule::Lam2
                } else {
                    Rule::Lam1
                };
                Ok(self.node(rule, t, u.linear, u.quantum, vec![u.deriv]))
            }
        }
    }
}

/// Derives `env ⊢ t`, or reports the first obstruction.
///
/// Bound variables of `t` that clash with names in `env` or with an
/// enclosing binder are renamed first, so the conclusion of the returned
/// derivation is α-equivalent (and usually identical) to `t`.
pub fn check_wf(env: &Environment, t: &Term, gates: &GateRegistry) -> Result<Derivation, WfError> {
    if let Some(x) = first_common(&env.linear_classical, &env.banged) {
        return Err(WfError::MalformedEnvironment(x));
    }
    let t = t.barendregt(&env.classical_names());
    let mut checker = Checker {
        gates,
        quantum_env: &env.quantum,
        linear_scope: env.linear_classical.iter().cloned().collect(),
        banged_scope: env.banged.iter().cloned().collect(),
    };
    let u = checker.infer(&t)?;
    if let Some(x) = env.linear_classical.difference(&u.linear).next() {
        return Err(WfError::LinearUnused {
            var: x.clone(),
            subterm: t.to_string(),
        });
    }
    if let Some(r) = env.quantum.difference(&u.quantum).next() {
        return Err(WfError::QuantumDropped { var: r.clone() });
    }
    let mut deriv = u.deriv;
    deriv.env.banged = env.banged.clone();
    Ok(deriv)
}

/// Whether `QV(t) ⊢ t` is derivable.
pub fn is_wf_configuration_term(t: &Term, gates: &GateRegistry) -> bool {
    let env = Environment::quantum_only(t.free_quantum_vars());
    check_wf(&env, t, gates).is_ok()
}

/// Checks that every node of `d` is an instance of its rule schema,
/// looking only at the node's conclusion and its premises' conclusions.
pub fn validate_derivation(d: &Derivation, gates: &GateRegistry) -> Result<(), String> {
    let fail = |msg: &str| Err(format!("{} at `{}`: {msg}", d.rule, d.term));
    let env = &d.env;
    if !env.is_well_formed() {
        return fail("environment names a variable twice");
    }
    let empty_resources = env.linear_classical.is_empty() && env.quantum.is_empty();
    let premise_terms: Vec<&Term> = d.premises.iter().map(|p| &p.term).collect();
    let ok = match (d.rule, &d.term) {
        (Rule::Const, Term::Bit(_)) => empty_resources && d.premises.is_empty(),
        (Rule::Const, Term::Gate(g)) => {
            empty_resources && d.premises.is_empty() && gates.contains(g)
        }
        (Rule::QVar, Term::QVar(r)) => {
            env.linear_classical.is_empty()
                && env.quantum.len() == 1
                && env.quantum.contains(r)
                && d.premises.is_empty()
        }
        (Rule::CVar, Term::Var(x)) => {
            env.quantum.is_empty()
                && env.linear_classical.len() == 1
                && env.linear_classical.contains(x)
                && d.premises.is_empty()
        }
        (Rule::Der, Term::Var(x)) => {
            empty_resources && env.banged.contains(x) && d.premises.is_empty()
        }
        (Rule::Prom, Term::Bang(m)) | (Rule::New, Term::New(m)) | (Rule::Meas, Term::Meas(m)) => {
            let prom_ok = d.rule != Rule::Prom || empty_resources;
            prom_ok && premise_terms == [&**m] && d.premises[0].env == *env
        }
        (Rule::App, Term::App(f, a)) => premise_terms == [&**f, &**a] && splits(env, &d.premises),
        (Rule::Tens, Term::Tuple(ts)) => {
            premise_terms.len() == ts.len()
                && premise_terms.iter().zip(ts).all(|(p, t)| *p == t)
                && splits(env, &d.premises)
        }
        (Rule::Lam1 | Rule::Lam2 | Rule::Lam3, Term::Lam(p, body)) => {
            let shape = matches!(
                (d.rule, p),
                (Rule::Lam1, Pattern::Tuple(_))
                    | (Rule::Lam2, Pattern::Var(_))
                    | (Rule::Lam3, Pattern::Bang(_))
            );
            let fresh = p
                .binders()
                .into_iter()
                .all(|b| !env.linear_classical.contains(b) && !env.banged.contains(b));
            let mut expected = env.clone();
            for b in p.binders() {
                if d.rule == Rule::Lam3 {
                    expected.banged.insert(b.to_string());
                } else {
                    expected.linear_classical.insert(b.to_string());
                }
            }
            shape && fresh && premise_terms == [&**body] && d.premises[0].env == expected
        }
        (Rule::If, Term::If(c, t, e)) => {
            let branch_env = Environment {
                banged: env.banged.clone(),
                ..Environment::default()
            };
            premise_terms == [&**c, &**t, &**e]
                && d.premises[0].env == *env
                && d.premises[1].env == branch_env
                && d.premises[2].env == branch_env
        }
        _ => false,
    };
    if !ok {
        return fail("does not match the rule schema");
    }
    d.premises
        .iter()
        .try_for_each(|p| validate_derivation(p, gates))
}

/// Premises share the banged part and split the resources disjointly.
fn splits(env: &Environment, premises: &[Derivation]) -> bool {
    let mut linear = BTreeSet::new();
    let mut quantum = BTreeSet::new();
    for p in premises {
        if p.env.banged != env.banged
            || !linear.is_disjoint(&p.env.linear_classical)
            || !quantum.is_disjoint(&p.env.quantum)
        {
            return false;
        }
        linear.extend(p.env.linear_classical.iter().cloned());
        quantum.extend(p.env.quantum.iter().cloned());
    }
    linear == env.linear_classical && quantum == env.quantum
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::parse_term;

    fn p(src: &str) -> Term {
        parse_term(src).unwrap()
    }

    fn gates() -> GateRegistry {
        GateRegistry::builtin()
    }

    fn check(env: &Environment, src: &str) -> Result<Derivation, WfError> {
        check_wf(env, &p(src), &gates())
    }

    #[test]
    fn bang_if_is_lam3() {
        let d = check(&Environment::new(), "\\!x. if x then 0 else 1").unwrap();
        assert_eq!(d.rule, Rule::Lam3);
        assert_eq!(d.premises[0].rule, Rule::If);
        validate_derivation(&d, &gates()).unwrap();
    }

    #[test]
    fn quantum_axiom() {
        let d = check(&Environment::new().with_quantum("r"), "@r").unwrap();
        assert_eq!(d.rule, Rule::QVar);
        assert!(d.premises.is_empty());
    }

    #[test]
    fn self_application_is_rejected() {
        let e = check(&Environment::new(), "\\x. x x").unwrap_err();
        assert!(
            matches!(&e, WfError::LinearUsedTwice { var, .. } if var == "x"),
            "{e}"
        );
        assert!(e.to_string().starts_with("linear variable x used twice"));
    }

    #[test]
    fn configuration_terms() {
        assert!(is_wf_configuration_term(&p("meas (H (new 0))"), &gates()));
        // Figure 1 has no typing discipline beyond resources: `app` over
        // two `const` axioms derives `0 0`.
        assert!(is_wf_configuration_term(&p("0 0"), &gates()));
        assert!(is_wf_configuration_term(&p("@r"), &gates()));
        assert!(is_wf_configuration_term(
            &p("(\\!x. if x then 0 else 1) (meas (H (new 0)))"),
            &gates()
        ));
    }

    #[test]
    fn errors() {
        let env = Environment::new();
        assert!(matches!(
            check(&env, "\\x. 0"),
            Err(WfError::LinearUnused { .. })
        ));
        assert!(matches!(
            check(&env, "\\x. !x"),
            Err(WfError::NotBangedUnderBang { .. })
        ));
        assert!(matches!(
            check(&env, "\\x. \\!b. if b then x else x"),
            Err(WfError::LinearInIfBranch { .. })
        ));
        assert!(matches!(check(&env, "Q 0"), Err(WfError::UnknownGate(_))));
        assert!(matches!(check(&env, "y"), Err(WfError::UnboundVariable(_))));
        assert!(matches!(
            check(&Environment::new().with_quantum("r"), "0"),
            Err(WfError::QuantumDropped { .. })
        ));
        assert!(matches!(
            check(&Environment::new().with_quantum("r"), "<@r, @r>"),
            Err(WfError::QuantumDuplicated { .. })
        ));
        let bad = Environment::new().with_linear("x").with_banged("x");
        assert!(matches!(
            check(&bad, "x"),
            Err(WfError::MalformedEnvironment(_))
        ));
    }

    #[test]
    fn banged_variables_may_be_discarded_or_copied() {
        let env = Environment::new();
        check(&env, "\\!x. <x, x>").unwrap();
        check(&env, "\\!x. 0").unwrap();
        check(&env, "\\!f. !(f 0)").unwrap();
    }

    #[test]
    fn shadowing_binders_are_renamed() {
        let d = check(&Environment::new().with_banged("x"), "\\x. x").unwrap();
        validate_derivation(&d, &gates()).unwrap();
        assert!(d.term.alpha_eq(&p("\\x. x")));
        let d = check(&Environment::new(), "\\!x. \\x. x").unwrap();
        validate_derivation(&d, &gates()).unwrap();
    }

    #[test]
    fn validator_rejects_tampering() {
        let mut d = check(&Environment::new(), "(\\x. x) 0").unwrap();
        validate_derivation(&d, &gates()).unwrap();
        d.premises[0].premises[0].env.linear_classical.clear();
        assert!(validate_derivation(&d, &gates()).is_err());
        let mut d = check(&Environment::new(), "\\x. x").unwrap();
        d.rule = Rule::Lam3;
        assert!(validate_derivation(&d, &gates()).is_err());
    }

    #[test]
    fn cnot_on_pair() {
        let d = check(&Environment::new(), "\\<x, y>. CNOT <x, y>").unwrap();
        assert_eq!(d.rule, Rule::Lam1);
        validate_derivation(&d, &gates()).unwrap();
    }
}
