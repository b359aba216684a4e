//! Stable-column analysis: columns whose values in a fixpoint's result are
//! always copied from the constant part.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::algebra::{occurs_free, Col, FixpointDecomposition, Term};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StableColumnSet {
    /// Recursion variable of the analysed fixpoint.
    pub fixpoint: String,
    pub columns: BTreeSet<Col>,
}

impl StableColumnSet {
    pub fn contains(&self, c: &Col) -> bool {
        self.columns.contains(c)
    }

    pub fn contains_all<'a>(&self, cols: impl IntoIterator<Item = &'a Col>) -> bool {
        cols.into_iter().all(|c| self.columns.contains(c))
    }
}

/// Output column → column of the recursion variable it is copied from.
/// `None` when the term does not depend on the variable at all.
type Provenance = Option<BTreeMap<Col, Col>>;

fn provenance(t: &Term, x: &str, x_cols: &BTreeSet<Col>) -> Provenance {
    if !occurs_free(t, x) {
        return None;
    }
    match t {
        Term::Var(_) => Some(x_cols.iter().map(|c| (c.clone(), c.clone())).collect()),
        Term::Const(..) | Term::Fixpoint { .. } => None,
        Term::Filter(_, c) => provenance(c, x, x_cols),
        Term::Rename { from, to, term } => provenance(term, x, x_cols).map(|mut m| {
            if let Some(src) = m.remove(from) {
                m.insert(to.clone(), src);
            }
            m
        }),
        Term::Antiproject(c, term) => provenance(term, x, x_cols).map(|mut m| {
            m.remove(c);
            m
        }),
        // Shared join columns keep their tracking: an equi-join leaves the
        // value the recursive side carried.
        Term::Join(a, b) => match (provenance(a, x, x_cols), provenance(b, x, x_cols)) {
            (Some(m), None) | (None, Some(m)) => Some(m),
            (Some(_), Some(_)) => Some(BTreeMap::new()),
            (None, None) => None,
        },
        Term::Antijoin(a, _) => provenance(a, x, x_cols).or(Some(BTreeMap::new())),
        Term::Union(a, b) => match (provenance(a, x, x_cols), provenance(b, x, x_cols)) {
            (Some(l), Some(r)) => Some(l.into_iter().filter(|(k, v)| r.get(k) == Some(v)).collect()),
            // One branch yields rows not derived from the variable.
            _ => Some(BTreeMap::new()),
        },
    }
}

/// Columns of the fixpoint that every recursive branch copies unchanged from
/// the same-named column of the recursion variable.
///
/// Under-approximates: a column reported stable really is stable, but some
/// stable columns may be missed.
pub fn stable_columns(d: &FixpointDecomposition) -> StableColumnSet {
    let mut columns = d.schema.clone();
    for branch in &d.variable {
        let m = provenance(branch, &d.var, &d.schema).unwrap_or_default();
        columns.retain(|c| m.get(c) == Some(c));
    }
    StableColumnSet {
        fixpoint: d.var.clone(),
        columns,
    }
}
