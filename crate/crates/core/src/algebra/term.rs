use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::value::{Col, Value};

/// One equality atom of a filter predicate.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PredAtom {
    /// `column = literal`
    EqLit(Col, Value),
    /// `column = column`
    EqCol(Col, Col),
}

impl PredAtom {
    pub fn columns(&self) -> Vec<&Col> {
        match self {
            PredAtom::EqLit(c, _) => vec![c],
            PredAtom::EqCol(a, b) => vec![a, b],
        }
    }

    pub fn rename_column(&self, from: &Col, to: &Col) -> PredAtom {
        let f = |c: &Col| if c == from { to.clone() } else { c.clone() };
        match self {
            PredAtom::EqLit(c, v) => PredAtom::EqLit(f(c), v.clone()),
            PredAtom::EqCol(a, b) => PredAtom::EqCol(f(a), f(b)),
        }
    }
}

/// Conjunction of equality atoms.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Predicate(pub Vec<PredAtom>);

impl Predicate {
    pub fn eq_lit(c: Col, v: impl Into<Value>) -> Self {
        Predicate(vec![PredAtom::EqLit(c, v.into())])
    }

    pub fn eq_col(a: Col, b: Col) -> Self {
        Predicate(vec![PredAtom::EqCol(a, b)])
    }

    pub fn atoms(&self) -> &[PredAtom] {
        &self.0
    }

    pub fn columns(&self) -> BTreeSet<Col> {
        self.0.iter().flat_map(|a| a.columns().into_iter().cloned()).collect()
    }

    pub fn and(mut self, other: Predicate) -> Predicate {
        for a in other.0 {
            if !self.0.contains(&a) {
                self.0.push(a);
            }
        }
        self
    }
}

/// A recursive relational algebra term.
///
/// `Var` names either a database relation or a recursion variable bound by an
/// enclosing `Fixpoint`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Term {
    Var(String),
    Const(Col, Value),
    Union(Box<Term>, Box<Term>),
    Join(Box<Term>, Box<Term>),
    Antijoin(Box<Term>, Box<Term>),
    Filter(Predicate, Box<Term>),
    Rename { from: Col, to: Col, term: Box<Term> },
    Antiproject(Col, Box<Term>),
    Fixpoint { var: String, body: Box<Term> },
}

/// Child indexes from the root down to a subterm.
pub type TermPath = Vec<usize>;

impl Term {
    pub fn var(name: impl Into<String>) -> Term {
        Term::Var(name.into())
    }

    pub fn constant(c: Col, v: impl Into<Value>) -> Term {
        Term::Const(c, v.into())
    }

    pub fn union(a: Term, b: Term) -> Term {
        Term::Union(Box::new(a), Box::new(b))
    }

    pub fn join(a: Term, b: Term) -> Term {
        Term::Join(Box::new(a), Box::new(b))
    }

    pub fn antijoin(a: Term, b: Term) -> Term {
        Term::Antijoin(Box::new(a), Box::new(b))
    }

    pub fn filter(p: Predicate, t: Term) -> Term {
        Term::Filter(p, Box::new(t))
    }

    pub fn rename(from: Col, to: Col, t: Term) -> Term {
        Term::Rename {
            from,
            to,
            term: Box::new(t),
        }
    }

    pub fn drop(c: Col, t: Term) -> Term {
        Term::Antiproject(c, Box::new(t))
    }

    pub fn fix(var: impl Into<String>, body: Term) -> Term {
        Term::Fixpoint {
            var: var.into(),
            body: Box::new(body),
        }
    }

    /// Left-nested union of the given branches; `None` when empty.
    pub fn union_all<I: IntoIterator<Item = Term>>(branches: I) -> Option<Term> {
        branches.into_iter().reduce(Term::union)
    }

    /// Branches of a (possibly nested) top-level union, left to right.
    pub fn union_branches(&self) -> Vec<&Term> {
        let mut out = Vec::new();
        fn walk<'a>(t: &'a Term, out: &mut Vec<&'a Term>) {
            match t {
                Term::Union(a, b) => {
                    walk(a, out);
                    walk(b, out);
                }
                other => out.push(other),
            }
        }
        walk(self, &mut out);
        out
    }

    pub fn children(&self) -> Vec<&Term> {
        match self {
            Term::Var(_) | Term::Const(..) => vec![],
            Term::Union(a, b) | Term::Join(a, b) | Term::Antijoin(a, b) => vec![a, b],
            Term::Filter(_, t)
            | Term::Rename { term: t, .. }
            | Term::Antiproject(_, t)
            | Term::Fixpoint { body: t, .. } => vec![t],
        }
    }

    pub fn children_mut(&mut self) -> Vec<&mut Term> {
        match self {
            Term::Var(_) | Term::Const(..) => vec![],
            Term::Union(a, b) | Term::Join(a, b) | Term::Antijoin(a, b) => vec![a, b],
            Term::Filter(_, t)
            | Term::Rename { term: t, .. }
            | Term::Antiproject(_, t)
            | Term::Fixpoint { body: t, .. } => vec![t],
        }
    }

    /// Number of nodes.
    pub fn size(&self) -> usize {
        1 + self.children().iter().map(|c| c.size()).sum::<usize>()
    }

    pub fn subterm(&self, path: &[usize]) -> Option<&Term> {
        match path.split_first() {
            None => Some(self),
            Some((&i, rest)) => self.children().get(i).and_then(|c| c.subterm(rest)),
        }
    }

    /// Copy of `self` with the subterm at `path` replaced.
    pub fn replaced_at(&self, path: &[usize], replacement: Term) -> Term {
        let mut out = self.clone();
        {
            let mut slot = &mut out;
            for &i in path {
                slot = slot
                    .children_mut()
                    .into_iter()
                    .nth(i)
                    .expect("path must address an existing subterm");
            }
            *slot = replacement;
        }
        out
    }

    /// Pre-order listing of `(path, subterm)`.
    pub fn positions(&self) -> Vec<(TermPath, &Term)> {
        let mut out = Vec::new();
        fn walk<'a>(t: &'a Term, path: &mut TermPath, out: &mut Vec<(TermPath, &'a Term)>) {
            out.push((path.clone(), t));
            for (i, c) in t.children().into_iter().enumerate() {
                path.push(i);
                walk(c, path, out);
                path.pop();
            }
        }
        walk(self, &mut Vec::new(), &mut out);
        out
    }

    /// Every column name mentioned by a filter, rename, antiprojection or
    /// constant anywhere in the term.
    pub fn mentioned_columns(&self) -> BTreeSet<Col> {
        let mut out = BTreeSet::new();
        for (_, t) in self.positions() {
            match t {
                Term::Const(c, _) | Term::Antiproject(c, _) => {
                    out.insert(c.clone());
                }
                Term::Rename { from, to, .. } => {
                    out.insert(from.clone());
                    out.insert(to.clone());
                }
                Term::Filter(p, _) => out.extend(p.columns()),
                _ => {}
            }
        }
        out
    }

    pub fn is_fixpoint(&self) -> bool {
        matches!(self, Term::Fixpoint { .. })
    }

    pub fn pretty(&self) -> String {
        self.to_string()
    }
}

fn fmt_literal(v: &Value, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    match v {
        Value::Int(i) => write!(f, "{i}"),
        Value::Str(s) => write!(f, "{s:?}"),
    }
}

impl fmt::Display for PredAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PredAtom::EqLit(c, v) => {
                write!(f, "{c}=")?;
                fmt_literal(v, f)
            }
            PredAtom::EqCol(a, b) => write!(f, "{a}={b}"),
        }
    }
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, a) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{a}")?;
        }
        Ok(())
    }
}

/// ASCII concrete syntax; [`parse_term`](super::parse_term) reads it back.
impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(x) => f.write_str(x),
            Term::Const(c, v) => {
                write!(f, "const[{c}=")?;
                fmt_literal(v, f)?;
                f.write_str("]")
            }
            Term::Union(a, b) => write!(f, "({a} U {b})"),
            Term::Join(a, b) => write!(f, "({a} join {b})"),
            Term::Antijoin(a, b) => write!(f, "({a} antijoin {b})"),
            Term::Filter(p, t) => write!(f, "filter[{p}]({t})"),
            Term::Rename { from, to, term } => write!(f, "rename[{from}->{to}]({term})"),
            Term::Antiproject(c, t) => write!(f, "drop[{c}]({t})"),
            Term::Fixpoint { var, body } => write!(f, "mu({var} = {body})"),
        }
    }
}
