//! Reader for the ASCII term syntax produced by `Term`'s `Display`.
//!
//! ```text
//! term  := jterm ("U" jterm)*
//! jterm := unary (("join" | "antijoin") unary)*
//! unary := "mu" "(" NAME "=" term ")"
//!        | "filter" "[" atom ("," atom)* "]" "(" term ")"
//!        | "rename" "[" COL "->" COL "]" "(" term ")"
//!        | "drop" "[" COL "]" "(" term ")"
//!        | "const" "[" COL "=" literal "]"
//!        | "(" term ")" | NAME
//! atom  := COL "=" (COL | literal)
//! ```
//!
//! Literals are integers or double-quoted strings. `#` starts a comment.

use thiserror::Error;

use super::term::{PredAtom, Predicate, Term};
use super::value::{Col, Value};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("parse error at byte {pos}: expected {expected}, found {found}")]
pub struct TermParseError {
    pub pos: usize,
    pub expected: String,
    pub found: String,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Int(i64),
    Str(String),
    Sym(&'static str),
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Int(i) => format!("`{i}`"),
            Tok::Str(s) => format!("{s:?}"),
            Tok::Sym(s) => format!("`{s}`"),
            Tok::Eof => "end of input".into(),
        }
    }
}

fn lex(src: &str) -> Result<Vec<(usize, Tok)>, TermParseError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    let err = |pos: usize, expected: &str, found: String| TermParseError {
        pos,
        expected: expected.into(),
        found,
    };
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        if c == '#' {
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
            continue;
        }
        let start = i;
        if c.is_ascii_alphabetic() || c == '_' {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push((start, Tok::Ident(src[start..i].to_string())));
            continue;
        }
        if c.is_ascii_digit() || (c == '-' && bytes.get(i + 1).is_some_and(|b| b.is_ascii_digit())) {
            i += 1;
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
            let text = &src[start..i];
            let v = text
                .parse::<i64>()
                .map_err(|_| err(start, "64-bit integer", format!("`{text}`")))?;
            out.push((start, Tok::Int(v)));
            continue;
        }
        if c == '"' {
            i += 1;
            let mut s = String::new();
            loop {
                let Some(ch) = src[i..].chars().next() else {
                    return Err(err(start, "closing quote", "end of input".into()));
                };
                i += ch.len_utf8();
                match ch {
                    '"' => break,
                    '\\' => {
                        let Some(esc) = src[i..].chars().next() else {
                            return Err(err(i, "escape", "end of input".into()));
                        };
                        i += esc.len_utf8();
                        match esc {
                            'n' => s.push('\n'),
                            't' => s.push('\t'),
                            'r' => s.push('\r'),
                            '0' => s.push('\0'),
                            '\\' | '"' | '\'' => s.push(esc),
                            'u' => {
                                let rest = &src[i..];
                                let close = rest.find('}').filter(|_| rest.starts_with('{'));
                                let cp = close
                                    .and_then(|e| u32::from_str_radix(&rest[1..e], 16).ok())
                                    .and_then(char::from_u32)
                                    .ok_or_else(|| err(i, "unicode escape", rest.chars().take(8).collect()))?;
                                s.push(cp);
                                i += close.unwrap() + 1;
                            }
                            other => return Err(err(i, "escape", format!("`\\{other}`"))),
                        }
                    }
                    _ => s.push(ch),
                }
            }
            out.push((start, Tok::Str(s)));
            continue;
        }
        let sym = match c {
            '(' => "(",
            ')' => ")",
            '[' => "[",
            ']' => "]",
            '=' => "=",
            ',' => ",",
            '-' if bytes.get(i + 1) == Some(&b'>') => "->",
            _ => {
                let found: String = src[i..].chars().take(1).collect();
                return Err(err(i, "token", format!("`{found}`")));
            }
        };
        i += sym.len();
        out.push((start, Tok::Sym(sym)));
    }
    out.push((src.len(), Tok::Eof));
    Ok(out)
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    at: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.at].1
    }

    fn pos(&self) -> usize {
        self.toks[self.at].0
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.at].1.clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    fn fail<T>(&self, expected: &str) -> Result<T, TermParseError> {
        Err(TermParseError {
            pos: self.pos(),
            expected: expected.into(),
            found: self.peek().describe(),
        })
    }

    fn expect(&mut self, sym: &'static str) -> Result<(), TermParseError> {
        if *self.peek() == Tok::Sym(sym) {
            self.bump();
            Ok(())
        } else {
            self.fail(&format!("`{sym}`"))
        }
    }

    fn is_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn ident(&mut self, what: &str) -> Result<String, TermParseError> {
        match self.peek() {
            Tok::Ident(s) => {
                let s = s.clone();
                self.bump();
                Ok(s)
            }
            _ => self.fail(what),
        }
    }

    fn column(&mut self) -> Result<Col, TermParseError> {
        let pos = self.pos();
        let name = self.ident("column name")?;
        Col::new(&name).map_err(|_| TermParseError {
            pos,
            expected: "column name".into(),
            found: format!("`{name}`"),
        })
    }

    fn literal(&mut self) -> Result<Value, TermParseError> {
        match self.peek().clone() {
            Tok::Int(i) => {
                self.bump();
                Ok(Value::Int(i))
            }
            Tok::Str(s) => {
                self.bump();
                Ok(Value::from(s))
            }
            _ => self.fail("literal"),
        }
    }

    fn term(&mut self) -> Result<Term, TermParseError> {
        let mut t = self.jterm()?;
        while self.is_keyword("U") {
            self.bump();
            let rhs = self.jterm()?;
            t = Term::union(t, rhs);
        }
        Ok(t)
    }

    fn jterm(&mut self) -> Result<Term, TermParseError> {
        let mut t = self.unary()?;
        loop {
            if self.is_keyword("join") {
                self.bump();
                let rhs = self.unary()?;
                t = Term::join(t, rhs);
            } else if self.is_keyword("antijoin") {
                self.bump();
                let rhs = self.unary()?;
                t = Term::antijoin(t, rhs);
            } else {
                return Ok(t);
            }
        }
    }

    fn paren_term(&mut self) -> Result<Term, TermParseError> {
        self.expect("(")?;
        let t = self.term()?;
        self.expect(")")?;
        Ok(t)
    }

    fn unary(&mut self) -> Result<Term, TermParseError> {
        match self.peek().clone() {
            Tok::Sym("(") => self.paren_term(),
            Tok::Ident(kw) => match kw.as_str() {
                "mu" => {
                    self.bump();
                    self.expect("(")?;
                    let var = self.ident("recursion variable")?;
                    self.expect("=")?;
                    let body = self.term()?;
                    self.expect(")")?;
                    Ok(Term::fix(var, body))
                }
                "filter" => {
                    self.bump();
                    self.expect("[")?;
                    let mut atoms = vec![self.pred_atom()?];
                    while *self.peek() == Tok::Sym(",") {
                        self.bump();
                        atoms.push(self.pred_atom()?);
                    }
                    self.expect("]")?;
                    let t = self.paren_term()?;
                    Ok(Term::filter(Predicate(atoms), t))
                }
                "rename" => {
                    self.bump();
                    self.expect("[")?;
                    let from = self.column()?;
                    self.expect("->")?;
                    let to = self.column()?;
                    self.expect("]")?;
                    let t = self.paren_term()?;
                    Ok(Term::rename(from, to, t))
                }
                "drop" => {
                    self.bump();
                    self.expect("[")?;
                    let c = self.column()?;
                    self.expect("]")?;
                    let t = self.paren_term()?;
                    Ok(Term::drop(c, t))
                }
                "const" => {
                    self.bump();
                    self.expect("[")?;
                    let c = self.column()?;
                    self.expect("=")?;
                    let v = self.literal()?;
                    self.expect("]")?;
                    Ok(Term::Const(c, v))
                }
                "U" | "join" | "antijoin" => self.fail("term"),
                _ => {
                    self.bump();
                    Ok(Term::Var(kw))
                }
            },
            _ => self.fail("term"),
        }
    }

    fn pred_atom(&mut self) -> Result<PredAtom, TermParseError> {
        let c = self.column()?;
        self.expect("=")?;
        if let Tok::Ident(_) = self.peek() {
            Ok(PredAtom::EqCol(c, self.column()?))
        } else {
            Ok(PredAtom::EqLit(c, self.literal()?))
        }
    }
}

/// Parses one term in the ASCII concrete syntax.
pub fn parse_term(src: &str) -> Result<Term, TermParseError> {
    let mut p = Parser { toks: lex(src)?, at: 0 };
    let t = p.term()?;
    if *p.peek() != Tok::Eof {
        return p.fail("end of input");
    }
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::col;
    use proptest::prelude::*;

    #[test]
    fn parses_example_fixpoint() {
        let t = parse_term("mu(X = S U drop[c](rename[dst->c](X) join rename[src->c](E)))").unwrap();
        let expected = Term::fix(
            "X",
            Term::union(
                Term::var("S"),
                Term::drop(
                    col("c"),
                    Term::join(
                        Term::rename(col("dst"), col("c"), Term::var("X")),
                        Term::rename(col("src"), col("c"), Term::var("E")),
                    ),
                ),
            ),
        );
        assert_eq!(t, expected);
    }

    #[test]
    fn join_binds_tighter_than_union() {
        let t = parse_term("A U B join C antijoin D").unwrap();
        assert_eq!(
            t,
            Term::union(
                Term::var("A"),
                Term::antijoin(Term::join(Term::var("B"), Term::var("C")), Term::var("D"))
            )
        );
    }

    #[test]
    fn literals_and_comments() {
        let t = parse_term("# reach\nfilter[src=\"N \\\"1\\\"\", lbl=-4, a=b](R)").unwrap();
        assert_eq!(
            t,
            Term::filter(
                Predicate(vec![
                    PredAtom::EqLit(col("src"), Value::str("N \"1\"")),
                    PredAtom::EqLit(col("lbl"), Value::Int(-4)),
                    PredAtom::EqCol(col("a"), col("b")),
                ]),
                Term::var("R")
            )
        );
    }

    #[test]
    fn reports_position() {
        let e = parse_term("drop[c](R").unwrap_err();
        assert_eq!(e.pos, 9);
        assert!(parse_term("R join").is_err());
        assert!(parse_term("rename[a->1](R)").is_err());
    }

    fn arb_col() -> impl Strategy<Value = Col> {
        prop::sample::select(vec!["src", "dst", "c", "lbl"]).prop_map(col)
    }

    fn arb_term() -> impl Strategy<Value = Term> {
        let leaf = prop_oneof![
            prop::sample::select(vec!["R", "S", "X"]).prop_map(Term::var),
            (arb_col(), any::<i64>()).prop_map(|(c, v)| Term::constant(c, v)),
            (arb_col(), "[a-z \"\\\\é]{0,6}").prop_map(|(c, v)| Term::constant(c, v.as_str())),
        ];
        leaf.prop_recursive(4, 24, 2, |inner| {
            prop_oneof![
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Term::union(a, b)),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Term::join(a, b)),
                (inner.clone(), inner.clone()).prop_map(|(a, b)| Term::antijoin(a, b)),
                (arb_col(), arb_col(), inner.clone()).prop_map(|(a, b, t)| Term::filter(Predicate::eq_col(a, b), t)),
                (arb_col(), arb_col(), inner.clone()).prop_map(|(a, b, t)| Term::rename(a, b, t)),
                (arb_col(), inner.clone()).prop_map(|(a, t)| Term::drop(a, t)),
                inner.prop_map(|t| Term::fix("X", t)),
            ]
        })
    }

    proptest! {
        #[test]
        fn display_then_parse_is_identity(t in arb_term()) {
            prop_assert_eq!(parse_term(&t.to_string()).unwrap(), t);
        }
    }
}
