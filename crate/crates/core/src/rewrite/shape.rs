//! Recognizers and builders for binary-relation composition and closure
//! shapes over `{src, dst}` relations.

use std::collections::BTreeMap;

use crate::algebra::{col, decompose, occurs_free, schema_of, Col, Schema, SchemaEnv, Term};

pub fn src() -> Col {
    col("src")
}

pub fn dst() -> Col {
    col("dst")
}

pub fn edge_schema() -> Schema {
    [src(), dst()].into_iter().collect()
}

/// `a ∘ b` for `{src, dst}` relations: `drop[m](rename[dst->m](a) join rename[src->m](b))`.
pub fn compose(a: Term, b: Term, mid: &Col) -> Term {
    Term::drop(
        mid.clone(),
        Term::join(Term::rename(dst(), mid.clone(), a), Term::rename(src(), mid.clone(), b)),
    )
}

/// Splits a composition into its left operand, right operand and middle
/// column. The join may list its operands in either order.
pub fn match_compose(t: &Term) -> Option<(&Term, &Term, Col)> {
    let Term::Antiproject(m, inner) = t else {
        return None;
    };
    let Term::Join(p, q) = inner.as_ref() else {
        return None;
    };
    fn side<'a>(t: &'a Term, from: &Col, m: &Col) -> Option<&'a Term> {
        match t {
            Term::Rename { from: f, to, term } if f == from && to == m => Some(term.as_ref()),
            _ => None,
        }
    }
    if let (Some(a), Some(b)) = (side(p, &dst(), m), side(q, &src(), m)) {
        return Some((a, b, m.clone()));
    }
    if let (Some(b), Some(a)) = (side(p, &src(), m), side(q, &dst(), m)) {
        return Some((a, b, m.clone()));
    }
    None
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// `mu(X = R U X∘B)`: denotes `R ∘ B*`.
    Right,
    /// `mu(X = R U B∘X)`: denotes `B* ∘ R`.
    Left,
}

/// A fixpoint over `{src, dst}` whose only recursive branch composes the
/// recursion variable with a recursion-free step relation.
#[derive(Debug, Clone, PartialEq)]
pub struct Closure {
    pub var: String,
    pub seed: Term,
    pub step: Term,
    pub direction: Direction,
    pub mid: Col,
}

impl Closure {
    /// True for a plain closure `B+`, whose seed is the step itself.
    pub fn is_pure(&self) -> bool {
        self.seed == self.step
    }
}

pub fn match_closure(t: &Term, env: &SchemaEnv) -> Option<Closure> {
    let Term::Fixpoint { var, .. } = t else {
        return None;
    };
    let d = decompose(t, env, None).ok()?;
    if d.schema != edge_schema() || d.variable.len() != 1 {
        return None;
    }
    let seed = d.constant_part()?;
    let (a, b, mid) = match_compose(&d.variable[0])?;
    if mid == src() || mid == dst() {
        return None;
    }
    let is_x = |t: &Term| matches!(t, Term::Var(v) if v == var);
    let (step, direction) = if is_x(a) && !occurs_free(b, var) {
        (b, Direction::Right)
    } else if is_x(b) && !occurs_free(a, var) {
        (a, Direction::Left)
    } else {
        return None;
    };
    if schema_of(step, env, &BTreeMap::new()).ok()? != edge_schema() {
        return None;
    }
    Some(Closure {
        var: var.clone(),
        seed,
        step: step.clone(),
        direction,
        mid,
    })
}

/// Builds `mu(var = seed U var∘step)` or `mu(var = seed U step∘var)`.
pub fn closure_term(var: &str, seed: Term, step: Term, direction: Direction, mid: &Col) -> Term {
    let x = Term::var(var);
    let rec = match direction {
        Direction::Right => compose(x, step, mid),
        Direction::Left => compose(step, x, mid),
    };
    Term::fix(var, Term::union(seed, rec))
}
