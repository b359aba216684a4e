//! Unions of conjunctive regular path queries: parsing, printing,
//! translation to terms and recursion-shape classification.
//!
//! ```text
//! ?a,?b <- ?a wasBornIn/IsL+ ?b, ?b -owns ?c
//! ```
//!
//! Postfix `+` binds tighter than `/`, which binds tighter than `|`. A leading
//! `-` inverts a single label.

mod classify;
pub mod corpus;
mod parse;
mod translate;

use std::collections::BTreeSet;
use std::fmt;

use crate::algebra::Value;

pub use classify::{classify, Class, QueryClass};
pub use parse::{parse_path, parse_query, parse_query_file, ParseError};
pub use translate::{translate, variable_column, TranslateError};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum PathExpr {
    Label(String),
    Inverse(String),
    Concat(Box<PathExpr>, Box<PathExpr>),
    Alt(Box<PathExpr>, Box<PathExpr>),
    Plus(Box<PathExpr>),
}

impl PathExpr {
    pub fn label(name: &str) -> PathExpr {
        PathExpr::Label(name.to_string())
    }

    pub fn inverse(name: &str) -> PathExpr {
        PathExpr::Inverse(name.to_string())
    }

    pub fn concat(a: PathExpr, b: PathExpr) -> PathExpr {
        PathExpr::Concat(Box::new(a), Box::new(b))
    }

    pub fn alt(a: PathExpr, b: PathExpr) -> PathExpr {
        PathExpr::Alt(Box::new(a), Box::new(b))
    }

    pub fn plus(p: PathExpr) -> PathExpr {
        PathExpr::Plus(Box::new(p))
    }

    pub fn is_recursive(&self) -> bool {
        match self {
            PathExpr::Label(_) | PathExpr::Inverse(_) => false,
            PathExpr::Concat(a, b) | PathExpr::Alt(a, b) => a.is_recursive() || b.is_recursive(),
            PathExpr::Plus(_) => true,
        }
    }

    pub fn labels(&self) -> BTreeSet<&str> {
        let mut out = BTreeSet::new();
        self.collect_labels(&mut out);
        out
    }

    fn collect_labels<'a>(&'a self, out: &mut BTreeSet<&'a str>) {
        match self {
            PathExpr::Label(l) | PathExpr::Inverse(l) => {
                out.insert(l);
            }
            PathExpr::Concat(a, b) | PathExpr::Alt(a, b) => {
                a.collect_labels(out);
                b.collect_labels(out);
            }
            PathExpr::Plus(p) => p.collect_labels(out),
        }
    }

    pub fn map_labels(&self, f: &impl Fn(&str) -> String) -> PathExpr {
        match self {
            PathExpr::Label(l) => PathExpr::Label(f(l)),
            PathExpr::Inverse(l) => PathExpr::Inverse(f(l)),
            PathExpr::Concat(a, b) => PathExpr::concat(a.map_labels(f), b.map_labels(f)),
            PathExpr::Alt(a, b) => PathExpr::alt(a.map_labels(f), b.map_labels(f)),
            PathExpr::Plus(p) => PathExpr::plus(p.map_labels(f)),
        }
    }
}

impl fmt::Display for PathExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PathExpr::Label(l) => f.write_str(l),
            PathExpr::Inverse(l) => write!(f, "-{l}"),
            PathExpr::Plus(p) => match p.as_ref() {
                PathExpr::Label(_) | PathExpr::Inverse(_) | PathExpr::Plus(_) => write!(f, "{p}+"),
                _ => write!(f, "({p})+"),
            },
            PathExpr::Concat(a, b) => {
                match a.as_ref() {
                    PathExpr::Alt(..) => write!(f, "({a})")?,
                    _ => write!(f, "{a}")?,
                }
                match b.as_ref() {
                    PathExpr::Alt(..) | PathExpr::Concat(..) => write!(f, "/({b})"),
                    _ => write!(f, "/{b}"),
                }
            }
            PathExpr::Alt(a, b) => match b.as_ref() {
                PathExpr::Alt(..) => write!(f, "{a}|({b})"),
                _ => write!(f, "{a}|{b}"),
            },
        }
    }
}

/// Subject or object of an atom.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Node {
    Var(String),
    Const(Value),
}

impl Node {
    pub fn var(&self) -> Option<&str> {
        match self {
            Node::Var(v) => Some(v),
            Node::Const(_) => None,
        }
    }
}

impl fmt::Display for Node {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Node::Var(v) => write!(f, "?{v}"),
            Node::Const(c) => write!(f, "{c}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Atom {
    pub subject: Node,
    pub path: PathExpr,
    pub object: Node,
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.subject, self.path, self.object)
    }
}

/// `head <- atom, atom, ...`: the head variables of the conjunction of the
/// atoms.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct UcrpqQuery {
    pub head: Vec<String>,
    pub atoms: Vec<Atom>,
}

impl UcrpqQuery {
    pub fn is_recursive(&self) -> bool {
        self.atoms.iter().any(|a| a.path.is_recursive())
    }

    pub fn labels(&self) -> BTreeSet<&str> {
        self.atoms.iter().flat_map(|a| a.path.labels()).collect()
    }

    pub fn constants(&self) -> BTreeSet<&Value> {
        self.atoms
            .iter()
            .flat_map(|a| [&a.subject, &a.object])
            .filter_map(|n| match n {
                Node::Const(c) => Some(c),
                Node::Var(_) => None,
            })
            .collect()
    }

    pub fn map_labels(&self, f: impl Fn(&str) -> String) -> UcrpqQuery {
        UcrpqQuery {
            head: self.head.clone(),
            atoms: self
                .atoms
                .iter()
                .map(|a| Atom {
                    path: a.path.map_labels(&f),
                    ..a.clone()
                })
                .collect(),
        }
    }

    pub fn map_constants(&self, f: impl Fn(&Value) -> Value) -> UcrpqQuery {
        let node = |n: &Node| match n {
            Node::Const(c) => Node::Const(f(c)),
            v => v.clone(),
        };
        UcrpqQuery {
            head: self.head.clone(),
            atoms: self
                .atoms
                .iter()
                .map(|a| Atom {
                    subject: node(&a.subject),
                    path: a.path.clone(),
                    object: node(&a.object),
                })
                .collect(),
        }
    }

    /// Moves the query onto another graph: the `i`-th label in sorted order
    /// becomes `labels[i % labels.len()]`, likewise constants and `nodes`.
    /// An empty target list leaves that part unchanged.
    pub fn rebind(&self, labels: &[String], nodes: &[Value]) -> UcrpqQuery {
        let mut q = self.clone();
        if !labels.is_empty() {
            let own: Vec<String> = self.labels().into_iter().map(str::to_string).collect();
            q = q.map_labels(|l| {
                let i = own.iter().position(|o| o == l).unwrap_or(0);
                labels[i % labels.len()].clone()
            });
        }
        if !nodes.is_empty() {
            let own: Vec<Value> = self.constants().into_iter().cloned().collect();
            q = q.map_constants(|c| {
                let i = own.iter().position(|o| o == c).unwrap_or(0);
                nodes[i % nodes.len()].clone()
            });
        }
        q
    }
}

impl fmt::Display for UcrpqQuery {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let head: Vec<String> = self.head.iter().map(|v| format!("?{v}")).collect();
        let atoms: Vec<String> = self.atoms.iter().map(Atom::to_string).collect();
        write!(f, "{} <- {}", head.join(","), atoms.join(", "))
    }
}
