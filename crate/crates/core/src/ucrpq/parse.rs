use std::collections::BTreeSet;

use thiserror::Error;

use super::{Atom, Node, PathExpr, UcrpqQuery};
use crate::algebra::Value;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("at byte {pos}: expected {expected}, found {found}")]
pub struct ParseError {
    pub pos: usize,
    pub expected: String,
    pub found: String,
}

fn is_name_char(c: char) -> bool {
    c.is_alphanumeric() || matches!(c, '_' | ':' | '.')
}

struct Parser<'s> {
    src: &'s str,
    pos: usize,
}

impl<'s> Parser<'s> {
    fn rest(&self) -> &'s str {
        &self.src[self.pos..]
    }

    fn skip_ws(&mut self) {
        let trimmed = self.rest().trim_start();
        self.pos = self.src.len() - trimmed.len();
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.rest().chars().next()
    }

    fn fail<T>(&mut self, expected: &str) -> Result<T, ParseError> {
        self.skip_ws();
        let found = match self.rest().chars().next() {
            None => "end of input".to_string(),
            Some(_) => {
                let tok: String = self
                    .rest()
                    .chars()
                    .take_while(|c| !c.is_whitespace())
                    .take(16)
                    .collect();
                format!("`{tok}`")
            }
        };
        Err(ParseError {
            pos: self.pos,
            expected: expected.to_string(),
            found,
        })
    }

    fn eat(&mut self, s: &str) -> bool {
        self.skip_ws();
        if self.rest().starts_with(s) {
            self.pos += s.len();
            true
        } else {
            false
        }
    }

    fn name(&mut self, what: &str) -> Result<String, ParseError> {
        self.skip_ws();
        let len: usize = self
            .rest()
            .chars()
            .take_while(|c| is_name_char(*c))
            .map(char::len_utf8)
            .sum();
        if len == 0 {
            return self.fail(what);
        }
        let s = self.rest()[..len].to_string();
        self.pos += len;
        Ok(s)
    }

    fn variable(&mut self) -> Result<String, ParseError> {
        if !self.eat("?") {
            return self.fail("`?variable`");
        }
        self.name("variable name")
    }

    fn node(&mut self) -> Result<Node, ParseError> {
        if self.peek() == Some('?') {
            return Ok(Node::Var(self.variable()?));
        }
        let s = self.name("`?variable` or constant")?;
        Ok(Node::Const(constant(&s)))
    }

    fn alt(&mut self) -> Result<PathExpr, ParseError> {
        let mut p = self.concat()?;
        while self.eat("|") {
            p = PathExpr::alt(p, self.concat()?);
        }
        Ok(p)
    }

    fn concat(&mut self) -> Result<PathExpr, ParseError> {
        let mut p = self.postfix()?;
        while self.eat("/") {
            p = PathExpr::concat(p, self.postfix()?);
        }
        Ok(p)
    }

    fn postfix(&mut self) -> Result<PathExpr, ParseError> {
        let mut p = self.primary()?;
        while self.eat("+") {
            p = PathExpr::plus(p);
        }
        Ok(p)
    }

    fn primary(&mut self) -> Result<PathExpr, ParseError> {
        if self.eat("(") {
            let p = self.alt()?;
            if !self.eat(")") {
                return self.fail("`)`");
            }
            return Ok(p);
        }
        if self.eat("-") {
            return Ok(PathExpr::Inverse(self.name("label")?));
        }
        if self.peek() == Some('*') {
            return self.fail("label (`*` is not supported, use `+`)");
        }
        Ok(PathExpr::Label(self.name("label, `-label` or `(`")?))
    }

    fn atom(&mut self) -> Result<Atom, ParseError> {
        let subject = self.node()?;
        let path = self.alt()?;
        let object = self.node()?;
        Ok(Atom { subject, path, object })
    }

    fn query(&mut self) -> Result<UcrpqQuery, ParseError> {
        let mut head = vec![self.variable()?];
        while self.eat(",") {
            head.push(self.variable()?);
        }
        if !(self.eat("<-") || self.eat("←")) {
            return self.fail("`,` or `<-`");
        }
        let mut atoms = vec![self.atom()?];
        while self.eat(",") {
            atoms.push(self.atom()?);
        }
        if self.peek().is_some() {
            return self.fail("`,` or end of query");
        }
        let bound: BTreeSet<&str> = atoms
            .iter()
            .flat_map(|a| [a.subject.var(), a.object.var()])
            .flatten()
            .collect();
        if let Some(v) = head.iter().find(|v| !bound.contains(v.as_str())) {
            return Err(ParseError {
                pos: 0,
                expected: format!("head variable ?{v} to occur in an atom"),
                found: "no occurrence".to_string(),
            });
        }
        Ok(UcrpqQuery { head, atoms })
    }
}

/// Integers become integer constants, anything else a string.
fn constant(s: &str) -> Value {
    s.parse::<i64>().map(Value::Int).unwrap_or_else(|_| Value::str(s))
}

pub fn parse_query(text: &str) -> Result<UcrpqQuery, ParseError> {
    Parser { src: text, pos: 0 }.query()
}

pub fn parse_path(text: &str) -> Result<PathExpr, ParseError> {
    let mut p = Parser { src: text, pos: 0 };
    let path = p.alt()?;
    if p.peek().is_some() {
        return p.fail("end of path");
    }
    Ok(path)
}

/// One query per non-blank line; `#` starts a comment. Errors carry the
/// 1-based line number.
pub fn parse_query_file(text: &str) -> Result<Vec<UcrpqQuery>, (usize, ParseError)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty())
        .map(|(n, l)| parse_query(l).map_err(|e| (n, e)))
        .collect()
}
