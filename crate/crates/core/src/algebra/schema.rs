use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use super::relation::Schema;
use super::term::Term;
use super::value::Col;
use super::vars::occurs_free;

/// Schemas of the database relations a term may reference.
pub type SchemaEnv = BTreeMap<String, Schema>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SchemaError {
    #[error("unknown relation `{0}`")]
    UnknownRelation(String),
    #[error("unknown column `{column}` in schema {schema:?}")]
    UnknownColumn { column: Col, schema: Schema },
    #[error("union operands have different schemas {left:?} and {right:?}")]
    UnionMismatch { left: Schema, right: Schema },
    #[error("rename target `{0}` already in schema")]
    RenameCollision(Col),
    #[error("fixpoint `{var}`: body schema {body:?} differs from seed schema {seed:?}")]
    FixpointMismatch { var: String, seed: Schema, body: Schema },
    #[error("fixpoint `{0}`: no schema satisfies the body")]
    Undetermined(String),
}

/// Largest candidate column pool searched for a recursion-only fixpoint.
const MAX_SEARCH_COLUMNS: usize = 12;

/// Computes the column set of `term`.
///
/// `env` gives database relation schemas, `bound` the schemas of recursion
/// variables already in scope. A fixpoint is typed by seeding its variable
/// with the schema of its recursion-free union branches and checking the
/// body reproduces it. A body made only of recursive branches is typed by
/// the smallest column set (drawn from the columns the body can see) that
/// the body maps to itself.
pub fn schema_of(term: &Term, env: &SchemaEnv, bound: &BTreeMap<String, Schema>) -> Result<Schema, SchemaError> {
    match term {
        Term::Var(x) => bound
            .get(x)
            .or_else(|| env.get(x))
            .cloned()
            .ok_or_else(|| SchemaError::UnknownRelation(x.clone())),
        Term::Const(c, _) => Ok(BTreeSet::from([c.clone()])),
        Term::Union(a, b) => {
            let l = schema_of(a, env, bound)?;
            let r = schema_of(b, env, bound)?;
            if l != r {
                return Err(SchemaError::UnionMismatch { left: l, right: r });
            }
            Ok(l)
        }
        Term::Join(a, b) => {
            let mut l = schema_of(a, env, bound)?;
            l.extend(schema_of(b, env, bound)?);
            Ok(l)
        }
        Term::Antijoin(a, b) => {
            let l = schema_of(a, env, bound)?;
            schema_of(b, env, bound)?;
            Ok(l)
        }
        Term::Filter(p, t) => {
            let s = schema_of(t, env, bound)?;
            for c in p.columns() {
                if !s.contains(&c) {
                    return Err(SchemaError::UnknownColumn { column: c, schema: s });
                }
            }
            Ok(s)
        }
        Term::Rename { from, to, term } => {
            let mut s = schema_of(term, env, bound)?;
            if !s.remove(from) {
                return Err(SchemaError::UnknownColumn {
                    column: from.clone(),
                    schema: s,
                });
            }
            if !s.insert(to.clone()) {
                return Err(SchemaError::RenameCollision(to.clone()));
            }
            Ok(s)
        }
        Term::Antiproject(c, t) => {
            let mut s = schema_of(t, env, bound)?;
            if !s.remove(c) {
                return Err(SchemaError::UnknownColumn {
                    column: c.clone(),
                    schema: s,
                });
            }
            Ok(s)
        }
        Term::Fixpoint { var, body } => fixpoint_schema(var, body, env, bound),
    }
}

fn fixpoint_schema(
    var: &str,
    body: &Term,
    env: &SchemaEnv,
    bound: &BTreeMap<String, Schema>,
) -> Result<Schema, SchemaError> {
    let seed_branch = body.union_branches().into_iter().find(|b| !occurs_free(b, var));
    let mut inner = bound.clone();
    if let Some(seed_branch) = seed_branch {
        let seed = schema_of(seed_branch, env, bound)?;
        inner.insert(var.to_string(), seed.clone());
        let got = schema_of(body, env, &inner)?;
        if got != seed {
            return Err(SchemaError::FixpointMismatch {
                var: var.to_string(),
                seed,
                body: got,
            });
        }
        return Ok(seed);
    }

    let mut pool: BTreeSet<Col> = body.mentioned_columns();
    for (_, t) in body.positions() {
        if let Term::Var(x) = t {
            if let Some(s) = bound.get(x).or_else(|| env.get(x)) {
                pool.extend(s.iter().cloned());
            }
        }
    }
    let pool: Vec<Col> = pool.into_iter().collect();
    if pool.len() > MAX_SEARCH_COLUMNS {
        return Err(SchemaError::Undetermined(var.to_string()));
    }
    let mut masks: Vec<u32> = (0..(1u32 << pool.len())).collect();
    masks.sort_by_key(|m| (m.count_ones(), *m));
    for mask in masks {
        let cand: Schema = pool
            .iter()
            .enumerate()
            .filter(|(i, _)| mask & (1 << i) != 0)
            .map(|(_, c)| c.clone())
            .collect();
        inner.insert(var.to_string(), cand.clone());
        if schema_of(body, env, &inner).as_ref() == Ok(&cand) {
            return Ok(cand);
        }
    }
    Err(SchemaError::Undetermined(var.to_string()))
}
