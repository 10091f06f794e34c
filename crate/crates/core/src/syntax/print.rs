use std::fmt;

use super::{Pattern, Term};

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Pattern::Var(x) => write!(f, "{x}"),
            Pattern::Bang(x) => write!(f, "!{x}"),
            Pattern::Tuple(xs) => write!(f, "<{}>", xs.join(", ")),
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_term(self, f)
    }
}

fn write_term(t: &Term, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    match t {
        Term::Lam(p, body) => {
            write!(f, "\\{p}. ")?;
            write_term(body, f)
        }
        Term::If(c, then, other) => {
            f.write_str("if ")?;
            write_term(c, f)?;
            f.write_str(" then ")?;
            write_term(then, f)?;
            f.write_str(" else ")?;
            write_term(other, f)
        }
        Term::App(fun, arg) => {
            match **fun {
                Term::App(..) => write_term(fun, f)?,
                _ => write_operand(fun, f)?,
            }
            f.write_str(" ")?;
            write_operand(arg, f)
        }
        _ => write_atom(t, f),
    }
}

/// Operand of an application or of a prefix form: keyword forms are
/// parenthesized so that the output reads unambiguously.
fn write_operand(t: &Term, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    match t {
        Term::App(..) | Term::Lam(..) | Term::If(..) | Term::New(_) | Term::Meas(_) => {
            f.write_str("(")?;
            write_term(t, f)?;
            f.write_str(")")
        }
        _ => write_atom(t, f),
    }
}

fn write_atom(t: &Term, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    match t {
        Term::Var(x) => f.write_str(x),
        Term::QVar(r) => write!(f, "@{r}"),
        Term::Bit(b) => f.write_str(if *b { "1" } else { "0" }),
        Term::Gate(g) => f.write_str(g),
        Term::Bang(inner) => {
            f.write_str("!")?;
            write_operand(inner, f)
        }
        Term::New(inner) => {
            f.write_str("new ")?;
            write_operand(inner, f)
        }
        Term::Meas(inner) => {
            f.write_str("meas ")?;
            write_operand(inner, f)
        }
        Term::Tuple(ts) => {
            f.write_str("<")?;
            for (i, c) in ts.iter().enumerate() {
                if i > 0 {
                    f.write_str(", ")?;
                }
                write_term(c, f)?;
            }
            f.write_str(">")
        }
        Term::App(..) | Term::Lam(..) | Term::If(..) => {
            f.write_str("(")?;
            write_term(t, f)?;
            f.write_str(")")
        }
    }
}

#[cfg(test)]
mod tests {
    use super::super::parse_term;
    use super::*;

    #[test]
    fn print_examples() {
        assert_eq!(Term::Bit(true).to_string(), "1");
        let id = Term::lam(Pattern::Var("x".into()), Term::var("x"));
        assert_eq!(id.to_string(), "\\x. x");
        assert_eq!(Term::meas(Term::qvar("r0")).to_string(), "meas @r0");
        assert_eq!(
            parse_term("meas @r0").unwrap(),
            Term::meas(Term::qvar("r0"))
        );
    }

    #[test]
    fn hadamard_example_prints_as_written() {
        let src = "(\\!x. if x then 0 else 1) (meas (H (new 0)))";
        assert_eq!(parse_term(src).unwrap().to_string(), src);
    }

    #[test]
    fn application_is_left_associative() {
        let t = parse_term("f g h").unwrap();
        assert_eq!(t.to_string(), "f g h");
        let t = parse_term("f (g h)").unwrap();
        assert_eq!(t.to_string(), "f (g h)");
        let t = parse_term("(\\x. x) (\\y. y) !(new 0)").unwrap();
        assert_eq!(t.to_string(), "(\\x. x) (\\y. y) !(new 0)");
    }
}
