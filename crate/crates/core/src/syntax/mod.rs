//! Abstract syntax of Q* terms and patterns.
//!
//! Terms are plain immutable trees. Classical variables are identified up to
//! α-conversion; [`Term::alpha_canonical`] picks one representative per class
//! so that structural equality of canonical forms decides α-equivalence.
//! Quantum variables are never bound, so they are carried verbatim.

mod parse;
mod print;

pub use parse::{parse_term, ParseError};

use std::collections::{BTreeMap, BTreeSet, HashMap};

/// A Q* term.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    /// Classical variable.
    Var(String),
    /// Quantum variable, a reference to one qubit of the register.
    QVar(String),
    Bang(Box<Term>),
    /// Boolean constant `0` (false) or `1` (true).
    Bit(bool),
    /// Name of a unitary operator from the gate registry.
    Gate(String),
    New(Box<Term>),
    App(Box<Term>, Box<Term>),
    Meas(Box<Term>),
    If(Box<Term>, Box<Term>, Box<Term>),
    /// Tuple of arity at least two.
    Tuple(Vec<Term>),
    Lam(Pattern, Box<Term>),
}

/// Binding pattern of an abstraction.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Pattern {
    Var(String),
    /// `<x1, ..., xn>` with n >= 2 and pairwise distinct names.
    Tuple(Vec<String>),
    Bang(String),
}

impl Pattern {
    pub fn binders(&self) -> Vec<&str> {
        match self {
            Pattern::Var(x) | Pattern::Bang(x) => vec![x.as_str()],
            Pattern::Tuple(xs) => xs.iter().map(String::as_str).collect(),
        }
    }

    pub fn binds(&self, name: &str) -> bool {
        self.binders().contains(&name)
    }

    /// Linear patterns are `x` and `<x1, ..., xn>`; `!x` is not linear.
    pub fn is_linear(&self) -> bool {
        !matches!(self, Pattern::Bang(_))
    }

    fn rename(&self, map: &HashMap<String, String>) -> Pattern {
        let r = |x: &String| map.get(x).cloned().unwrap_or_else(|| x.clone());
        match self {
            Pattern::Var(x) => Pattern::Var(r(x)),
            Pattern::Bang(x) => Pattern::Bang(r(x)),
            Pattern::Tuple(xs) => Pattern::Tuple(xs.iter().map(r).collect()),
        }
    }
}

impl Term {
    pub fn var(name: &str) -> Term {
        Term::Var(name.to_string())
    }

    pub fn qvar(name: &str) -> Term {
        Term::QVar(name.to_string())
    }

    pub fn gate(name: &str) -> Term {
        Term::Gate(name.to_string())
    }

    pub fn bang(t: Term) -> Term {
        Term::Bang(Box::new(t))
    }

    pub fn new_qubit(t: Term) -> Term {
        Term::New(Box::new(t))
    }

    pub fn meas(t: Term) -> Term {
        Term::Meas(Box::new(t))
    }

    pub fn app(f: Term, a: Term) -> Term {
        Term::App(Box::new(f), Box::new(a))
    }

    pub fn ite(c: Term, t: Term, e: Term) -> Term {
        Term::If(Box::new(c), Box::new(t), Box::new(e))
    }

    pub fn lam(p: Pattern, body: Term) -> Term {
        Term::Lam(p, Box::new(body))
    }

    /// Immediate subterms, in left-to-right order.
    pub fn children(&self) -> Vec<&Term> {
        match self {
            Term::Var(_) | Term::QVar(_) | Term::Bit(_) | Term::Gate(_) => vec![],
            Term::Bang(t) | Term::New(t) | Term::Meas(t) | Term::Lam(_, t) => vec![t],
            Term::App(f, a) => vec![f, a],
            Term::If(c, t, e) => vec![c, t, e],
            Term::Tuple(ts) => ts.iter().collect(),
        }
    }

    /// Number of AST nodes. Every variable, constant, gate name, `!`, `new`,
    /// `meas`, tuple, application, abstraction and `if` counts as one node;
    /// the pattern of an abstraction is part of its node.
    pub fn size(&self) -> usize {
        1 + self.children().into_iter().map(Term::size).sum::<usize>()
    }

    /// Sum, over every abstraction `λπ.N` occurring in the term, of `|N|`.
    pub fn abstraction_size(&self) -> usize {
        let own = match self {
            Term::Lam(_, body) => body.size(),
            _ => 0,
        };
        own + self
            .children()
            .into_iter()
            .map(Term::abstraction_size)
            .sum::<usize>()
    }

    /// Number of `new` nodes.
    pub fn new_sites(&self) -> usize {
        let own = usize::from(matches!(self, Term::New(_)));
        own + self
            .children()
            .into_iter()
            .map(Term::new_sites)
            .sum::<usize>()
    }

    /// The set of quantum variables occurring in the term.
    pub fn free_quantum_vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_qvars(&mut out);
        out
    }

    fn collect_qvars(&self, out: &mut BTreeSet<String>) {
        if let Term::QVar(r) = self {
            out.insert(r.clone());
        }
        for c in self.children() {
            c.collect_qvars(out);
        }
    }

    /// Quantum variables in order of first left-to-right occurrence.
    pub fn quantum_vars_in_order(&self) -> Vec<String> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        self.walk_qvars(&mut seen, &mut out);
        out
    }

    fn walk_qvars(&self, seen: &mut BTreeSet<String>, out: &mut Vec<String>) {
        if let Term::QVar(r) = self {
            if seen.insert(r.clone()) {
                out.push(r.clone());
            }
        }
        for c in self.children() {
            c.walk_qvars(seen, out);
        }
    }

    /// Free classical variables.
    pub fn free_vars(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_free(&mut Vec::new(), &mut out);
        out
    }

    fn collect_free<'a>(&'a self, bound: &mut Vec<&'a str>, out: &mut BTreeSet<String>) {
        match self {
            Term::Var(x) => {
                if !bound.contains(&x.as_str()) {
                    out.insert(x.clone());
                }
            }
            Term::Lam(p, body) => {
                let n = bound.len();
                bound.extend(p.binders());
                body.collect_free(bound, out);
                bound.truncate(n);
            }
            _ => {
                for c in self.children() {
                    c.collect_free(bound, out);
                }
            }
        }
    }

    pub fn is_free(&self, x: &str) -> bool {
        match self {
            Term::Var(y) => x == y,
            Term::Lam(p, body) => !p.binds(x) && body.is_free(x),
            _ => self.children().into_iter().any(|c| c.is_free(x)),
        }
    }

    /// Capture-avoiding substitution `self{s/x}`.
    pub fn substitute(&self, x: &str, s: &Term) -> Term {
        if !self.is_free(x) {
            return self.clone();
        }
        let fv_s = s.free_vars();
        self.subst(x, s, &fv_s)
    }

    fn subst(&self, x: &str, s: &Term, fv_s: &BTreeSet<String>) -> Term {
        match self {
            Term::Var(y) if y == x => s.clone(),
            Term::Var(_) | Term::QVar(_) | Term::Bit(_) | Term::Gate(_) => self.clone(),
            Term::Lam(p, body) => {
                if p.binds(x) || !body.is_free(x) {
                    return self.clone();
                }
                let clashes: Vec<&str> = p
                    .binders()
                    .into_iter()
                    .filter(|b| fv_s.contains(*b))
                    .collect();
                if clashes.is_empty() {
                    return Term::lam(p.clone(), body.subst(x, s, fv_s));
                }
                let mut avoid: BTreeSet<String> = fv_s.clone();
                avoid.extend(body.free_vars());
                avoid.extend(p.binders().into_iter().map(str::to_string));
                avoid.insert(x.to_string());
                let mut map = HashMap::new();
                let mut body = (**body).clone();
                for b in clashes {
                    let fresh = fresh_name(b, &avoid);
                    avoid.insert(fresh.clone());
                    body = body.substitute(b, &Term::Var(fresh.clone()));
                    map.insert(b.to_string(), fresh);
                }
                Term::lam(p.rename(&map), body.subst(x, s, fv_s))
            }
            _ => self.map_children(|c| c.subst(x, s, fv_s)),
        }
    }

    /// Rebuilds the node with `f` applied to every immediate subterm.
    pub fn map_children(&self, mut f: impl FnMut(&Term) -> Term) -> Term {
        match self {
            Term::Var(_) | Term::QVar(_) | Term::Bit(_) | Term::Gate(_) => self.clone(),
            Term::Bang(t) => Term::bang(f(t)),
            Term::New(t) => Term::new_qubit(f(t)),
            Term::Meas(t) => Term::meas(f(t)),
            Term::Lam(p, t) => Term::lam(p.clone(), f(t)),
            Term::App(a, b) => {
                let a = f(a);
                Term::app(a, f(b))
            }
            Term::If(c, t, e) => {
                let c = f(c);
                let t = f(t);
                Term::ite(c, t, f(e))
            }
            Term::Tuple(ts) => Term::Tuple(ts.iter().map(f).collect()),
        }
    }

    /// Renames quantum variables; names absent from `map` are kept.
    pub fn rename_qvars(&self, map: &BTreeMap<String, String>) -> Term {
        match self {
            Term::QVar(r) => Term::QVar(map.get(r).cloned().unwrap_or_else(|| r.clone())),
            _ => self.map_children(|c| c.rename_qvars(map)),
        }
    }

    /// The canonical representative of the α-class: bound variables are
    /// renamed `x0, x1, ...` in pre-order of their binders, skipping names
    /// that occur free in the term.
    pub fn alpha_canonical(&self) -> Term {
        let free = self.free_vars();
        let mut next = 0usize;
        let mut scope = Vec::new();
        self.canon(&free, &mut next, &mut scope)
    }

    fn canon(
        &self,
        free: &BTreeSet<String>,
        next: &mut usize,
        scope: &mut Vec<(String, String)>,
    ) -> Term {
        match self {
            Term::Var(x) => match scope.iter().rev().find(|(from, _)| from == x) {
                Some((_, to)) => Term::Var(to.clone()),
                None => self.clone(),
            },
            Term::Lam(p, body) => {
                let mut map = HashMap::new();
                for b in p.binders() {
                    let name = loop {
                        let candidate = format!("x{}", *next);
                        *next += 1;
                        if !free.contains(&candidate) {
                            break candidate;
                        }
                    };
                    map.insert(b.to_string(), name);
                }
                let n = scope.len();
                for b in p.binders() {
                    scope.push((b.to_string(), map[b].clone()));
                }
                let body = body.canon(free, next, scope);
                scope.truncate(n);
                Term::lam(p.rename(&map), body)
            }
            _ => self.map_children(|c| c.canon(free, next, scope)),
        }
    }

    /// Renames only those binders that clash with `avoid`, with a free
    /// variable of the term, or with an enclosing binder, so that every
    /// bound name is distinct from every name in scope. Terms without such
    /// clashes are returned unchanged.
    pub fn barendregt(&self, avoid: &BTreeSet<String>) -> Term {
        let mut taken: BTreeSet<String> = avoid.clone();
        taken.extend(self.free_vars());
        let mut scope = Vec::new();
        self.freshen(&mut taken, &mut scope)
    }

    fn freshen(&self, taken: &mut BTreeSet<String>, scope: &mut Vec<(String, String)>) -> Term {
        match self {
            Term::Var(x) => match scope.iter().rev().find(|(from, _)| from == x) {
                Some((_, to)) => Term::Var(to.clone()),
                None => self.clone(),
            },
            Term::Lam(p, body) => {
                let mut map = HashMap::new();
                for b in p.binders() {
                    let name = if taken.contains(b) {
                        fresh_name(b, taken)
                    } else {
                        b.to_string()
                    };
                    taken.insert(name.clone());
                    map.insert(b.to_string(), name);
                }
                let n = scope.len();
                for b in p.binders() {
                    scope.push((b.to_string(), map[b].clone()));
                }
                let body = body.freshen(taken, scope);
                scope.truncate(n);
                Term::lam(p.rename(&map), body)
            }
            _ => self.map_children(|c| c.freshen(taken, scope)),
        }
    }

    pub fn alpha_eq(&self, other: &Term) -> bool {
        self.alpha_canonical() == other.alpha_canonical()
    }

    /// Subterm at `path`, where each index selects an immediate child as
    /// listed by [`Term::children`].
    pub fn subterm(&self, path: &[usize]) -> Option<&Term> {
        match path.split_first() {
            None => Some(self),
            Some((&i, rest)) => self.children().get(i).and_then(|c| c.subterm(rest)),
        }
    }

    /// Replaces the subterm at `path` by `f(subterm)`.
    pub fn replace_at(&self, path: &[usize], f: &mut dyn FnMut(&Term) -> Term) -> Option<Term> {
        let Some((&i, rest)) = path.split_first() else {
            return Some(f(self));
        };
        if i >= self.children().len() {
            return None;
        }
        let mut failed = false;
        let mut k = 0usize;
        let out = self.map_children(|c| {
            let j = k;
            k += 1;
            if j == i {
                match c.replace_at(rest, f) {
                    Some(t) => t,
                    None => {
                        failed = true;
                        c.clone()
                    }
                }
            } else {
                c.clone()
            }
        });
        (!failed).then_some(out)
    }
}

/// A name based on `base` that is not in `avoid`.
pub(crate) fn fresh_name(base: &str, avoid: &BTreeSet<String>) -> String {
    let stem = base.trim_end_matches(|c: char| c.is_ascii_digit());
    let stem = if stem.is_empty() { "x" } else { stem };
    (0..)
        .map(|i| format!("{stem}{i}"))
        .find(|n| !avoid.contains(n))
        .expect("unbounded name supply")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(src: &str) -> Term {
        parse_term(src).unwrap()
    }

    #[test]
    fn free_quantum_vars_examples() {
        assert_eq!(
            Term::qvar("r0").free_quantum_vars(),
            BTreeSet::from(["r0".to_string()])
        );
        assert!(p("\\x. x").free_quantum_vars().is_empty());
        let t = Term::Tuple(vec![Term::qvar("a"), Term::meas(Term::qvar("b"))]);
        assert_eq!(
            t.free_quantum_vars(),
            BTreeSet::from(["a".to_string(), "b".to_string()])
        );
    }

    #[test]
    fn substitute_examples() {
        assert_eq!(
            Term::var("x").substitute("x", &Term::qvar("r")),
            Term::qvar("r")
        );
        let id = p("\\x. x");
        assert_eq!(id.substitute("x", &Term::Bit(false)), id);
        let t = Term::app(Term::var("x"), Term::bang(Term::var("x")));
        assert_eq!(
            t.substitute("x", &Term::Bit(true)),
            Term::app(Term::Bit(true), Term::bang(Term::Bit(true)))
        );
    }

    #[test]
    fn substitution_avoids_capture() {
        // (\y. x y){y/x} must not capture the substituted y.
        let t = p("\\y. x y");
        let out = t.substitute("x", &Term::var("y"));
        let Term::Lam(Pattern::Var(b), body) = &out else {
            panic!("unexpected shape {out:?}");
        };
        assert_ne!(b, "y");
        assert_eq!(**body, Term::app(Term::var("y"), Term::Var(b.clone())));
    }

    #[test]
    fn canonical_form_identifies_alpha_variants() {
        assert!(p("\\a. \\!b. <a, b>").alpha_eq(&p("\\u. \\!v. <u, v>")));
        assert!(!p("\\a. \\b. a b").alpha_eq(&p("\\a. \\b. b a")));
        let c = p("\\<p, q>. <q, p>").alpha_canonical();
        assert_eq!(c.to_string(), "\\<x0, x1>. <x1, x0>");
    }

    #[test]
    fn canonical_names_skip_free_variables() {
        let t = p("\\y. x0 y");
        assert_eq!(t.alpha_canonical().to_string(), "\\x1. x0 x1");
    }

    #[test]
    fn sizes() {
        assert_eq!(p("\\x. x").abstraction_size(), 1);
        assert_eq!(p("0").abstraction_size(), 0);
        assert_eq!(p("(\\x. x 0) (\\y. y)").abstraction_size(), 4);
        assert_eq!(
            p("(\\!x. if x then 0 else 1) (meas (H (new 0)))").size(),
            11
        );
    }

    #[test]
    fn replace_at_path() {
        let t = p("<0, (\\x. x) 1>");
        let r = t.replace_at(&[1, 1], &mut |_| Term::Bit(false)).unwrap();
        assert_eq!(r.to_string(), "<0, (\\x. x) 0>");
        assert!(t.replace_at(&[5], &mut |s| s.clone()).is_none());
    }
}
