use std::collections::BTreeSet;

use thiserror::Error;

use super::{Atom, Node, PathExpr, UcrpqQuery};
use crate::algebra::{col, Col, Predicate, Term};
use crate::rewrite::shape::{closure_term, compose, dst, src, Direction};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TranslateError {
    #[error("unsupported query shape: {0}")]
    UnsupportedShape(String),
}

/// Column holding the bindings of `?name` in a translated query.
pub fn variable_column(name: &str) -> Col {
    match name {
        "src" | "dst" | "lbl" => col(&format!("v_{name}")),
        _ if name.starts_with("v_") => col(&format!("v_{name}")),
        _ => col(name),
    }
}

struct Fresh {
    mids: usize,
    vars: usize,
}

impl Fresh {
    fn mid(&mut self) -> Col {
        self.mids += 1;
        col(&format!("m{}", self.mids))
    }

    fn var(&mut self) -> String {
        self.vars += 1;
        format!("X{}", self.vars)
    }
}

fn label_view(edges: &str, label: &str) -> Term {
    Term::drop(
        col("lbl"),
        Term::filter(Predicate::eq_lit(col("lbl"), label), Term::var(edges)),
    )
}

fn path_term(p: &PathExpr, edges: &str, fresh: &mut Fresh) -> Term {
    match p {
        PathExpr::Label(l) => label_view(edges, l),
        PathExpr::Inverse(l) => {
            let m = fresh.mid();
            Term::rename(
                m.clone(),
                dst(),
                Term::rename(dst(), src(), Term::rename(src(), m, label_view(edges, l))),
            )
        }
        PathExpr::Concat(a, b) => {
            let a = path_term(a, edges, fresh);
            let b = path_term(b, edges, fresh);
            compose(a, b, &fresh.mid())
        }
        PathExpr::Alt(a, b) => Term::union(path_term(a, edges, fresh), path_term(b, edges, fresh)),
        PathExpr::Plus(p) => {
            let step = path_term(p, edges, fresh);
            let var = fresh.var();
            closure_term(&var, step.clone(), step, Direction::Right, &fresh.mid())
        }
    }
}

fn atom_term(a: &Atom, edges: &str, fresh: &mut Fresh) -> Term {
    let mut t = path_term(&a.path, edges, fresh);
    for (node, end) in [(&a.subject, src()), (&a.object, dst())] {
        if let Node::Const(c) = node {
            t = Term::drop(end.clone(), Term::filter(Predicate::eq_lit(end, c.clone()), t));
        }
    }
    match (a.subject.var(), a.object.var()) {
        (Some(s), Some(o)) if s == o => {
            let t = Term::drop(dst(), Term::filter(Predicate::eq_col(src(), dst()), t));
            Term::rename(src(), variable_column(s), t)
        }
        (s, o) => {
            if let Some(s) = s {
                t = Term::rename(src(), variable_column(s), t);
            }
            if let Some(o) = o {
                t = Term::rename(dst(), variable_column(o), t);
            }
            t
        }
    }
}

/// Translates `q` over the triple relation `edges` with columns
/// `{src, lbl, dst}`. The result has one column per head variable, named by
/// [`variable_column`].
pub fn translate(q: &UcrpqQuery, edges: &str) -> Result<Term, TranslateError> {
    let mut fresh = Fresh { mids: 0, vars: 0 };
    let mut atoms = q.atoms.iter().map(|a| atom_term(a, edges, &mut fresh));
    let first = atoms
        .next()
        .ok_or_else(|| TranslateError::UnsupportedShape("query without atoms".into()))?;
    let mut t = atoms.fold(first, Term::join);
    let head: BTreeSet<Col> = q.head.iter().map(|v| variable_column(v)).collect();
    let body: BTreeSet<Col> = q
        .atoms
        .iter()
        .flat_map(|a| [a.subject.var(), a.object.var()])
        .flatten()
        .map(variable_column)
        .collect();
    if let Some(missing) = head.difference(&body).next() {
        return Err(TranslateError::UnsupportedShape(format!(
            "head column {missing} is not bound"
        )));
    }
    for c in body.difference(&head) {
        t = Term::drop(c.clone(), t);
    }
    Ok(t)
}
