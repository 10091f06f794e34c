//! Recursive-descent parser for the surface grammar.
//!
//! ```text
//! term    := "\" pattern "." term | app
//! pattern := ident | "!" ident | "<" ident ("," ident)+ ">"
//! app     := atom+ [ "\" pattern "." term ]
//! atom    := ident | "@" ident | "0" | "1" | GATE | "!" atom | "new" atom
//!          | "meas" atom | "if" term "then" term "else" term
//!          | "<" term ("," term)+ ">" | "(" term ")"
//! ```
//!
//! `--` starts a comment that runs to the end of the line.

use thiserror::Error;

use super::{Pattern, Term};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{line}:{column}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Lambda,
    Dot,
    Bang,
    LAngle,
    RAngle,
    Comma,
    LParen,
    RParen,
    Zero,
    One,
    QVar(String),
    Ident(String),
    Gate(String),
    New,
    Meas,
    If,
    Then,
    Else,
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Lambda => "`\\`".into(),
            Tok::Dot => "`.`".into(),
            Tok::Bang => "`!`".into(),
            Tok::LAngle => "`<`".into(),
            Tok::RAngle => "`>`".into(),
            Tok::Comma => "`,`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::Zero => "`0`".into(),
            Tok::One => "`1`".into(),
            Tok::QVar(r) => format!("`@{r}`"),
            Tok::Ident(x) => format!("identifier `{x}`"),
            Tok::Gate(g) => format!("gate `{g}`"),
            Tok::New => "`new`".into(),
            Tok::Meas => "`meas`".into(),
            Tok::If => "`if`".into(),
            Tok::Then => "`then`".into(),
            Tok::Else => "`else`".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    line: usize,
    column: usize,
}

fn lex(src: &str) -> Result<Vec<Spanned>, ParseError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    let err = |line, column, message: String| ParseError {
        line,
        column,
        message,
    };
    while i < chars.len() {
        let c = chars[i];
        let (l0, c0) = (line, col);
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if c == '-' && chars.get(i + 1) == Some(&'-') {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        let single = match c {
            '\\' | 'λ' => Some(Tok::Lambda),
            '.' => Some(Tok::Dot),
            '!' => Some(Tok::Bang),
            '<' => Some(Tok::LAngle),
            '>' => Some(Tok::RAngle),
            ',' => Some(Tok::Comma),
            '(' => Some(Tok::LParen),
            ')' => Some(Tok::RParen),
            _ => None,
        };
        if let Some(tok) = single {
            out.push(Spanned {
                tok,
                line: l0,
                column: c0,
            });
            i += 1;
            col += 1;
            continue;
        }
        let word_char = |c: char| c.is_ascii_alphanumeric() || c == '_' || c == '\'';
        let start = i;
        if c == '@' {
            i += 1;
            while i < chars.len() && word_char(chars[i]) {
                i += 1;
            }
            if i == start + 1 {
                return Err(err(
                    l0,
                    c0,
                    "expected a quantum variable name after `@`".into(),
                ));
            }
            let name: String = chars[start + 1..i].iter().collect();
            col += i - start;
            out.push(Spanned {
                tok: Tok::QVar(name),
                line: l0,
                column: c0,
            });
            continue;
        }
        if word_char(c) {
            while i < chars.len() && word_char(chars[i]) {
                i += 1;
            }
            let word: String = chars[start..i].iter().collect();
            col += i - start;
            let tok = match word.as_str() {
                "0" => Tok::Zero,
                "1" => Tok::One,
                "new" => Tok::New,
                "meas" => Tok::Meas,
                "if" => Tok::If,
                "then" => Tok::Then,
                "else" => Tok::Else,
                w if w.starts_with(|c: char| c.is_ascii_uppercase()) => {
                    if !w.chars().all(|c| c.is_ascii_alphanumeric()) {
                        return Err(err(l0, c0, format!("malformed gate name `{w}`")));
                    }
                    Tok::Gate(word)
                }
                w if w.starts_with(|c: char| c.is_ascii_lowercase() || c == '_') => {
                    Tok::Ident(word)
                }
                w => return Err(err(l0, c0, format!("unexpected token `{w}`"))),
            };
            out.push(Spanned {
                tok,
                line: l0,
                column: c0,
            });
            continue;
        }
        return Err(err(l0, c0, format!("unexpected character `{c}`")));
    }
    out.push(Spanned {
        tok: Tok::Eof,
        line,
        column: col,
    });
    Ok(out)
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn bump(&mut self) -> Spanned {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error_here(&self, message: String) -> ParseError {
        let t = &self.toks[self.pos];
        ParseError {
            line: t.line,
            column: t.column,
            message,
        }
    }

    fn expect(&mut self, tok: Tok) -> Result<(), ParseError> {
        if *self.peek() == tok {
            self.bump();
            Ok(())
        } else {
            Err(self.error_here(format!(
                "expected {}, found {}",
                tok.describe(),
                self.peek().describe()
            )))
        }
    }

    fn ident(&mut self) -> Result<String, ParseError> {
        match self.peek().clone() {
            Tok::Ident(x) => {
                self.bump();
                Ok(x)
            }
            other => {
                Err(self.error_here(format!("expected a variable, found {}", other.describe())))
            }
        }
    }

    fn term(&mut self) -> Result<Term, ParseError> {
        if *self.peek() == Tok::Lambda {
            return self.lambda();
        }
        self.app()
    }

    fn lambda(&mut self) -> Result<Term, ParseError> {
        self.expect(Tok::Lambda)?;
        let pattern = self.pattern()?;
        self.expect(Tok::Dot)?;
        let body = self.term()?;
        Ok(Term::lam(pattern, body))
    }

    fn pattern(&mut self) -> Result<Pattern, ParseError> {
        match self.peek() {
            Tok::Bang => {
                self.bump();
                Ok(Pattern::Bang(self.ident()?))
            }
            Tok::LAngle => {
                let open = self.pos;
                self.bump();
                let mut names = vec![self.ident()?];
                while *self.peek() == Tok::Comma {
                    self.bump();
                    let start = self.pos;
                    let x = self.ident()?;
                    if names.contains(&x) {
                        self.pos = start;
                        return Err(self.error_here(format!(
                            "variable `{x}` occurs twice in a tuple pattern"
                        )));
                    }
                    names.push(x);
                }
                self.expect(Tok::RAngle)?;
                if names.len() < 2 {
                    self.pos = open;
                    return Err(
                        self.error_here("tuple pattern needs at least two variables".into())
                    );
                }
                Ok(Pattern::Tuple(names))
            }
            _ => Ok(Pattern::Var(self.ident()?)),
        }
    }

    fn starts_atom(tok: &Tok) -> bool {
        matches!(
            tok,
            Tok::Ident(_)
                | Tok::QVar(_)
                | Tok::Zero
                | Tok::One
                | Tok::Gate(_)
                | Tok::Bang
                | Tok::New
                | Tok::Meas
                | Tok::If
                | Tok::LAngle
                | Tok::LParen
        )
    }

    fn app(&mut self) -> Result<Term, ParseError> {
        if !Self::starts_atom(self.peek()) {
            return Err(
                self.error_here(format!("expected a term, found {}", self.peek().describe()))
            );
        }
        let mut t = self.atom()?;
        loop {
            if Self::starts_atom(self.peek()) {
                let a = self.atom()?;
                t = Term::app(t, a);
            } else if *self.peek() == Tok::Lambda {
                let a = self.lambda()?;
                return Ok(Term::app(t, a));
            } else {
                return Ok(t);
            }
        }
    }

    fn atom(&mut self) -> Result<Term, ParseError> {
        let here = self.bump();
        match here.tok {
            Tok::Ident(x) => Ok(Term::Var(x)),
            Tok::QVar(r) => Ok(Term::QVar(r)),
            Tok::Zero => Ok(Term::Bit(false)),
            Tok::One => Ok(Term::Bit(true)),
            Tok::Gate(g) => Ok(Term::Gate(g)),
            Tok::Bang => Ok(Term::bang(self.operand()?)),
            Tok::New => Ok(Term::new_qubit(self.operand()?)),
            Tok::Meas => Ok(Term::meas(self.operand()?)),
            Tok::If => {
                let c = self.term()?;
                self.expect(Tok::Then)?;
                let t = self.term()?;
                self.expect(Tok::Else)?;
                let e = self.term()?;
                Ok(Term::ite(c, t, e))
            }
            Tok::LAngle => {
                let mut items = vec![self.term()?];
                while *self.peek() == Tok::Comma {
                    self.bump();
                    items.push(self.term()?);
                }
                self.expect(Tok::RAngle)?;
                if items.len() < 2 {
                    return Err(ParseError {
                        line: here.line,
                        column: here.column,
                        message: "tuple needs at least two components".into(),
                    });
                }
                Ok(Term::Tuple(items))
            }
            Tok::LParen => {
                let t = self.term()?;
                self.expect(Tok::RParen)?;
                Ok(t)
            }
            other => Err(ParseError {
                line: here.line,
                column: here.column,
                message: format!("expected a term, found {}", other.describe()),
            }),
        }
    }

    fn operand(&mut self) -> Result<Term, ParseError> {
        if !Self::starts_atom(self.peek()) {
            return Err(self.error_here(format!(
                "expected an operand, found {}",
                self.peek().describe()
            )));
        }
        self.atom()
    }
}

/// Parses a complete term; trailing input is an error.
pub fn parse_term(src: &str) -> Result<Term, ParseError> {
    let toks = lex(src)?;
    let mut p = Parser { toks, pos: 0 };
    let t = p.term()?;
    if *p.peek() != Tok::Eof {
        return Err(p.error_here(format!("unexpected {}", p.peek().describe())));
    }
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hadamard_measure_example() {
        let t = parse_term("(\\!x. if x then 0 else 1) (meas (H (new 0)))").unwrap();
        let expected = Term::app(
            Term::lam(
                Pattern::Bang("x".into()),
                Term::ite(Term::var("x"), Term::Bit(false), Term::Bit(true)),
            ),
            Term::meas(Term::app(
                Term::gate("H"),
                Term::new_qubit(Term::Bit(false)),
            )),
        );
        assert_eq!(t, expected);
    }

    #[test]
    fn constants_and_tuple_patterns() {
        assert_eq!(parse_term("0").unwrap(), Term::Bit(false));
        let t = parse_term("\\<x,y>. CNOT <x,y>").unwrap();
        let expected = Term::lam(
            Pattern::Tuple(vec!["x".into(), "y".into()]),
            Term::app(
                Term::gate("CNOT"),
                Term::Tuple(vec![Term::var("x"), Term::var("y")]),
            ),
        );
        assert_eq!(t, expected);
    }

    #[test]
    fn bang_binds_tighter_than_application() {
        let t = parse_term("f !x y").unwrap();
        assert_eq!(
            t,
            Term::app(
                Term::app(Term::var("f"), Term::bang(Term::var("x"))),
                Term::var("y")
            )
        );
    }

    #[test]
    fn lambda_extends_right() {
        let t = parse_term("\\x. x 0 1").unwrap();
        let Term::Lam(_, body) = t else { panic!() };
        assert_eq!(body.size(), 5);
    }

    #[test]
    fn comments_are_skipped() {
        let t = parse_term("-- a comment\n new 0 -- trailing\n").unwrap();
        assert_eq!(t, Term::new_qubit(Term::Bit(false)));
    }

    #[test]
    fn errors_carry_positions() {
        let e = parse_term("").unwrap_err();
        assert_eq!((e.line, e.column), (1, 1));
        let e = parse_term("<0>").unwrap_err();
        assert!(e.message.contains("at least two"), "{e}");
        let e = parse_term("\\<x, x>. x").unwrap_err();
        assert!(e.message.contains("twice"), "{e}");
        assert_eq!((e.line, e.column), (1, 6));
        let e = parse_term("\\x.\n  x )").unwrap_err();
        assert_eq!((e.line, e.column), (2, 5));
        assert!(parse_term("2").is_err());
        assert!(parse_term("\\<x>. x").is_err());
    }
}
