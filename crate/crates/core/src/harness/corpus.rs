//! Test corpora: exhaustive enumeration of well-formed programs by size,
//! seeded random samples, and the worked examples.

use std::cell::RefCell;
use std::collections::{HashMap, HashSet};
use std::rc::Rc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::HarnessError;
use crate::quantum::GateRegistry;
use crate::syntax::{parse_term, Pattern, Term};
use crate::wellform::is_wf_configuration_term;

/// Largest size accepted by [`generate_corpus`] for enumeration.
pub const MAX_ENUMERATION_SIZE: usize = 14;
/// Gates used by generated terms.
pub const CORPUS_GATES: [&str; 3] = ["H", "X", "CNOT"];
/// Upper bound on `new` nodes in generated terms.
pub const MAX_NEW_SITES: usize = 3;

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub enum Provenance {
    Enumerated {
        size_bound: usize,
    },
    Examples,
    Random {
        seed: u64,
        size_bound: usize,
        count: usize,
    },
}

#[derive(Clone, Debug)]
pub struct Corpus {
    pub provenance: Provenance,
    pub terms: Vec<Term>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CorpusMode {
    Enumerated {
        size_bound: usize,
    },
    Examples,
    Random {
        seed: u64,
        size_bound: usize,
        count: usize,
    },
}

/// The gate registry matching [`CORPUS_GATES`].
pub fn corpus_gates() -> GateRegistry {
    GateRegistry::builtin_subset(&CORPUS_GATES)
}

pub fn generate_corpus(mode: CorpusMode) -> Result<Corpus, HarnessError> {
    match mode {
        CorpusMode::Enumerated { size_bound } => {
            if size_bound > MAX_ENUMERATION_SIZE {
                return Err(HarnessError::BoundExceeded {
                    requested: size_bound,
                    max: MAX_ENUMERATION_SIZE,
                });
            }
            let mut terms = Vec::new();
            for_each_enumerated(size_bound, &mut |t| terms.push(t.clone()));
            Ok(Corpus {
                provenance: Provenance::Enumerated { size_bound },
                terms,
            })
        }
        CorpusMode::Examples => Ok(Corpus {
            provenance: Provenance::Examples,
            terms: example_programs().into_iter().map(|(_, t)| t).collect(),
        }),
        CorpusMode::Random {
            seed,
            size_bound,
            count,
        } => {
            if size_bound > MAX_ENUMERATION_SIZE {
                return Err(HarnessError::BoundExceeded {
                    requested: size_bound,
                    max: MAX_ENUMERATION_SIZE,
                });
            }
            Ok(Corpus {
                provenance: Provenance::Random {
                    seed,
                    size_bound,
                    count,
                },
                terms: random_terms(seed, size_bound, count),
            })
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
enum Kind {
    Linear,
    Banged,
}

/// A generated subterm with the linear variables it consumes (bit `i` is
/// the variable bound at binder depth `i`) and its number of `new` nodes.
type Entry = (Term, u32, usize);

fn var_name(level: usize) -> String {
    format!("x{level}")
}

/// Sizes at or below this are tabulated; larger ones are streamed.
const TABLE_LIMIT: usize = 6;

#[derive(Default)]
struct Enumerator {
    table: RefCell<HashMap<(usize, Vec<Kind>), Rc<Vec<Entry>>>>,
    seqs: RefCell<HashMap<(usize, Vec<Kind>), Rc<Vec<(Vec<Term>, u32, usize)>>>>,
}

impl Enumerator {
    fn table(&self, n: usize, ctx: &[Kind]) -> Rc<Vec<Entry>> {
        let key = (n, ctx.to_vec());
        if let Some(v) = self.table.borrow().get(&key) {
            return v.clone();
        }
        let mut out = Vec::new();
        self.generate(n, ctx, &mut |t, m, k| out.push((t, m, k)));
        let out = Rc::new(out);
        self.table.borrow_mut().insert(key, out.clone());
        out
    }

    fn visit(&self, n: usize, ctx: &[Kind], f: &mut dyn FnMut(Term, u32, usize)) {
        if n <= TABLE_LIMIT {
            for (t, m, k) in self.table(n, ctx).iter() {
                f(t.clone(), *m, *k);
            }
        } else {
            self.generate(n, ctx, f);
        }
    }

    /// Sequences of at least one term whose sizes sum to `n`.
    fn sequences(&self, n: usize, ctx: &[Kind]) -> Rc<Vec<(Vec<Term>, u32, usize)>> {
        let key = (n, ctx.to_vec());
        if let Some(v) = self.seqs.borrow().get(&key) {
            return v.clone();
        }
        let mut out = Vec::new();
        for first in 1..=n {
            let rest_size = n - first;
            let rests = if rest_size == 0 {
                Rc::new(vec![(vec![], 0u32, 0usize)])
            } else {
                self.sequences(rest_size, ctx)
            };
            self.visit(first, ctx, &mut |t, m, k| {
                for (rest, rm, rk) in rests.iter() {
                    if m & rm == 0 && k + rk <= MAX_NEW_SITES {
                        let mut v = Vec::with_capacity(rest.len() + 1);
                        v.push(t.clone());
                        v.extend(rest.iter().cloned());
                        out.push((v, m | rm, k + rk));
                    }
                }
            });
        }
        let out = Rc::new(out);
        self.seqs.borrow_mut().insert(key, out.clone());
        out
    }

    fn generate(&self, n: usize, ctx: &[Kind], f: &mut dyn FnMut(Term, u32, usize)) {
        if n == 0 {
            return;
        }
        if n == 1 {
            f(Term::Bit(false), 0, 0);
            f(Term::Bit(true), 0, 0);
            for g in CORPUS_GATES {
                f(Term::gate(g), 0, 0);
            }
            for (i, kind) in ctx.iter().enumerate() {
                let mask = if *kind == Kind::Linear { 1 << i } else { 0 };
                f(Term::Var(var_name(i)), mask, 0);
            }
            return;
        }
        let inner = n - 1;
        // !M
        self.visit(inner, ctx, &mut |t, m, k| {
            if m == 0 {
                f(Term::bang(t), 0, k);
            }
        });
        // new M, meas M
        self.visit(inner, ctx, &mut |t, m, k| {
            if k < MAX_NEW_SITES {
                f(Term::new_qubit(t), m, k + 1);
            }
        });
        self.visit(inner, ctx, &mut |t, m, k| f(Term::meas(t), m, k));
        // abstractions
        let level = ctx.len();
        let mut ext = ctx.to_vec();
        ext.push(Kind::Linear);
        self.visit(inner, &ext, &mut |t, m, k| {
            if m & (1 << level) != 0 {
                f(
                    Term::lam(Pattern::Var(var_name(level)), t),
                    m & !(1 << level),
                    k,
                );
            }
        });
        ext[level] = Kind::Banged;
        self.visit(inner, &ext, &mut |t, m, k| {
            f(Term::lam(Pattern::Bang(var_name(level)), t), m, k);
        });
        for arity in 2..=inner {
            let mut ext = ctx.to_vec();
            ext.extend(std::iter::repeat_n(Kind::Linear, arity));
            let bound: u32 = (level..level + arity).map(|i| 1u32 << i).sum();
            let names: Vec<String> = (level..level + arity).map(var_name).collect();
            self.visit(inner, &ext, &mut |t, m, k| {
                if m & bound == bound {
                    f(Term::lam(Pattern::Tuple(names.clone()), t), m & !bound, k);
                }
            });
        }
        // applications
        for a in 1..inner {
            let rights = self.table_or_stream(inner - a, ctx);
            self.visit(a, ctx, &mut |l, lm, lk| {
                for (r, rm, rk) in rights.iter() {
                    if lm & rm == 0 && lk + rk <= MAX_NEW_SITES {
                        f(Term::app(l.clone(), r.clone()), lm | rm, lk + rk);
                    }
                }
            });
        }
        // if c then t else e
        for c in 1..inner {
            for t in 1..inner - c {
                let e = inner - c - t;
                let thens = self.closed_under_bang(t, ctx);
                let elses = self.closed_under_bang(e, ctx);
                self.visit(c, ctx, &mut |cond, cm, ck| {
                    for (tt, _, tk) in thens.iter() {
                        for (et, _, ek) in elses.iter() {
                            if ck + tk + ek <= MAX_NEW_SITES {
                                f(
                                    Term::ite(cond.clone(), tt.clone(), et.clone()),
                                    cm,
                                    ck + tk + ek,
                                );
                            }
                        }
                    }
                });
            }
        }
        // tuples
        for (ts, m, k) in self.sequences(inner, ctx).iter() {
            if ts.len() >= 2 {
                f(Term::Tuple(ts.clone()), *m, *k);
            }
        }
    }

    fn table_or_stream(&self, n: usize, ctx: &[Kind]) -> Rc<Vec<Entry>> {
        if n <= TABLE_LIMIT {
            self.table(n, ctx)
        } else {
            let mut out = Vec::new();
            self.generate(n, ctx, &mut |t, m, k| out.push((t, m, k)));
            Rc::new(out)
        }
    }

    fn closed_under_bang(&self, n: usize, ctx: &[Kind]) -> Rc<Vec<Entry>> {
        let all = self.table_or_stream(n, ctx);
        Rc::new(all.iter().filter(|(_, m, _)| *m == 0).cloned().collect())
    }
}

/// Calls `f` on every well-formed closed program of size `1..=size_bound`
/// over [`CORPUS_GATES`] with at most [`MAX_NEW_SITES`] `new` nodes, in
/// order of size. Bound variables are named by binder depth.
pub fn for_each_enumerated(size_bound: usize, f: &mut dyn FnMut(&Term)) {
    let e = Enumerator::default();
    for n in 1..=size_bound {
        e.visit(n, &[], &mut |t, m, _| {
            debug_assert_eq!(m, 0);
            f(&t);
        });
    }
}

/// Number of enumerated programs of each size `1..=size_bound`.
pub fn enumerated_counts(size_bound: usize) -> Vec<usize> {
    let e = Enumerator::default();
    (1..=size_bound)
        .map(|n| {
            let mut c = 0usize;
            e.visit(n, &[], &mut |_, _, _| c += 1);
            c
        })
        .collect()
}

struct RandomGen<'a> {
    rng: &'a mut ChaCha8Rng,
    ctx: Vec<(String, Kind)>,
}

impl RandomGen<'_> {
    fn leaf(&mut self) -> Term {
        let vars: Vec<&(String, Kind)> = self.ctx.iter().collect();
        if !vars.is_empty() && self.rng.gen_bool(0.6) {
            let (name, _) = vars[self.rng.gen_range(0..vars.len())];
            return Term::Var(name.clone());
        }
        match self.rng.gen_range(0..5) {
            0 => Term::Bit(false),
            1 => Term::Bit(true),
            k => Term::gate(CORPUS_GATES[k - 2]),
        }
    }

    fn bind(&mut self, kind: Kind) -> String {
        let name = var_name(self.ctx.len());
        self.ctx.push((name.clone(), kind));
        name
    }

    /// A term of size at most `budget`, biased towards redexes.
    fn term(&mut self, budget: usize) -> Term {
        if budget <= 1 {
            return self.leaf();
        }
        let choice = self.rng.gen_range(0..100);
        let n = self.ctx.len();
        let t = match choice {
            0..=19 if budget >= 4 => {
                // (\p. M) N
                let arg_budget = self.rng.gen_range(1..=(budget - 2).min(4));
                let fun = self.lambda(budget - 1 - arg_budget);
                let arg = self.term(arg_budget);
                Term::app(fun, arg)
            }
            20..=34 if budget >= 3 => {
                let a = self.rng.gen_range(1..budget - 1);
                let l = self.term(a);
                let r = self.term(budget - 1 - a);
                Term::app(l, r)
            }
            35..=49 => self.lambda(budget),
            50..=57 if budget >= 4 => {
                // meas (U (new c)), or a fragment of it
                let c = Term::Bit(self.rng.gen_bool(0.5));
                let g = if self.rng.gen_bool(0.7) { "H" } else { "X" };
                Term::meas(Term::app(Term::gate(g), Term::new_qubit(c)))
            }
            58..=62 => Term::new_qubit(self.term(budget - 1)),
            63..=67 => Term::meas(self.term(budget - 1)),
            68..=74 => Term::bang(self.term(budget - 1)),
            75..=82 if budget >= 4 => {
                let c = self.rng.gen_range(1..budget - 2);
                let rest = budget - 1 - c;
                let t = self.rng.gen_range(1..rest);
                let cond = self.term(c);
                let then = self.term(t);
                let other = self.term(rest - t);
                Term::ite(cond, then, other)
            }
            83..=92 if budget >= 3 => {
                let a = self.rng.gen_range(1..budget - 1);
                let l = self.term(a);
                let r = self.term(budget - 1 - a);
                Term::Tuple(vec![l, r])
            }
            _ => self.leaf(),
        };
        self.ctx.truncate(n);
        t
    }

    fn lambda(&mut self, budget: usize) -> Term {
        let n = self.ctx.len();
        let budget = budget.max(2);
        let t = match self.rng.gen_range(0..10) {
            0..=4 => {
                let x = self.bind(Kind::Linear);
                Term::lam(Pattern::Var(x), self.term(budget - 1))
            }
            5..=7 => {
                let x = self.bind(Kind::Banged);
                Term::lam(Pattern::Bang(x), self.term(budget - 1))
            }
            _ => {
                let a = self.bind(Kind::Linear);
                let b = self.bind(Kind::Linear);
                Term::lam(Pattern::Tuple(vec![a, b]), self.term(budget - 1))
            }
        };
        self.ctx.truncate(n);
        t
    }
}

/// `count` distinct well-formed programs of size at most `size_bound`,
/// drawn by rejection from a redex-biased generator. Deterministic in
/// `seed`. Fewer are returned if the generator stalls.
pub fn random_terms(seed: u64, size_bound: usize, count: usize) -> Vec<Term> {
    let gates = corpus_gates();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    let mut attempts = 0usize;
    while out.len() < count && attempts < count.saturating_mul(2000).max(10_000) {
        attempts += 1;
        let budget = rng.gen_range((size_bound / 2).max(2)..=size_bound.max(2));
        let t = RandomGen {
            rng: &mut rng,
            ctx: Vec::new(),
        }
        .term(budget);
        if t.size() > size_bound
            || t.new_sites() > MAX_NEW_SITES
            || !is_wf_configuration_term(&t, &gates)
        {
            continue;
        }
        let canon = t.alpha_canonical();
        if seen.insert(canon.clone()) {
            out.push(canon);
        }
    }
    out
}

pub const HADAMARD_SOURCE: &str = "(\\!x. if x then 0 else 1) (meas (H (new 0)))";

pub fn hadamard_term() -> Term {
    parse_term(HADAMARD_SOURCE).expect("well-formed source")
}

/// The call-by-push-value style fixed point
/// `Y = (\!y. \!f. f !(y !y !f)) !(\!y. \!f. f !(y !y !f))`.
pub const Y_SOURCE: &str = "(\\!y. \\!f. f !(y !y !f)) !(\\!y. \\!f. f !(y !y !f))";

/// `(Y !(\!f. \!x. if x then 0 else f (meas (H (new 0))))) (meas (H (new 0)))`:
/// toss a fair coin until it shows 1, then return 0.
pub fn y_coin_term() -> Term {
    let src = format!(
        "({Y_SOURCE} !(\\!f. \\!x. if x then 0 else f (meas (H (new 0))))) (meas (H (new 0)))"
    );
    parse_term(&src).expect("well-formed source")
}

/// The coin loop unrolled `rounds` times: after the last toss the result
/// is 1 if every toss failed.
pub fn coin_term(rounds: usize) -> Term {
    let mut t = Term::Bit(true);
    for _ in 0..rounds {
        let src = format!("(\\!x. if x then 0 else ({t})) (meas (H (new 0)))");
        t = parse_term(&src).expect("well-formed source");
    }
    t
}

/// Named example programs: the worked examples plus a few curated ones.
pub fn example_programs() -> Vec<(&'static str, Term)> {
    let p = |s: &str| parse_term(s).expect("well-formed source");
    vec![
        ("hadamard", hadamard_term()),
        ("coin-1", coin_term(1)),
        ("coin-2", coin_term(2)),
        ("coin-3", coin_term(3)),
        (
            "bell-pair",
            p("(\\<x, y>. <meas x, meas y>) (CNOT <H (new 0), new 0>)"),
        ),
        ("plus-minus", p("<meas (H (new 0)), meas (H (new 1))>")),
        ("commuting-frames", p("((\\y. y) 0) ((\\x. x) 1)")),
        ("right-frame", p("((\\x. x) 0) 1")),
        (
            "measured-control",
            p("(\\!b. if b then new 1 else new 0) (meas (H (new 0)))"),
        ),
    ]
}
