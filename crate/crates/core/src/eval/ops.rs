//! Physical implementations of the relational operators over [`Relation`].

use std::collections::BTreeSet;
use std::sync::Arc;

use rustc_hash::FxHashMap;
use smallvec::SmallVec;

use crate::algebra::{row_set_with_capacity, Col, Datum, PredAtom, Predicate, Relation, Row, RowSet};

type Key = SmallVec<[Datum; 2]>;

fn key_of(row: &Row, positions: &[usize]) -> Key {
    positions.iter().map(|&i| row[i]).collect()
}

/// Columns shared by both relations, with their positions on each side.
fn shared_positions(l: &Relation, r: &Relation) -> (Vec<usize>, Vec<usize>) {
    let mut lk = Vec::new();
    let mut rk = Vec::new();
    for (i, c) in l.columns().iter().enumerate() {
        if let Some(j) = r.position(c) {
            lk.push(i);
            rk.push(j);
        }
    }
    (lk, rk)
}

#[derive(Clone, Copy)]
enum Src {
    Left(usize),
    Right(usize),
}

/// Natural join, dropping the columns in `drop` from the output.
///
/// The hash table is built on the smaller input. Output columns are the
/// left columns followed by the right-only columns, minus `drop`.
pub fn join_project(l: &Relation, r: &Relation, drop: &BTreeSet<Col>) -> Relation {
    let (lk, rk) = shared_positions(l, r);
    let mut out_cols = Vec::new();
    let mut layout = Vec::new();
    for (i, c) in l.columns().iter().enumerate() {
        if !drop.contains(c) {
            out_cols.push(c.clone());
            layout.push(Src::Left(i));
        }
    }
    for (j, c) in r.columns().iter().enumerate() {
        if !rk.contains(&j) && !drop.contains(c) {
            out_cols.push(c.clone());
            layout.push(Src::Right(j));
        }
    }
    let columns: Arc<[Col]> = out_cols.into();
    let mut out = row_set_with_capacity(if l.is_empty() || r.is_empty() {
        0
    } else {
        l.len().max(r.len())
    });
    join_core(l, r, &lk, &rk, &layout, |row| {
        out.insert(row);
    });
    Relation::from_set(columns, out)
}

/// Streams the rows of `drop[..](l join r)` to `sink`, laid out in `target`
/// column order, without deduplicating. Returns `None` when the join's
/// output columns are not exactly `target`.
pub fn join_project_each(
    l: &Relation,
    r: &Relation,
    drop: &BTreeSet<Col>,
    target: &[Col],
    sink: impl FnMut(Row),
) -> Option<()> {
    let (lk, rk) = shared_positions(l, r);
    let kept = l
        .columns()
        .iter()
        .chain(
            r.columns()
                .iter()
                .enumerate()
                .filter(|(j, _)| !rk.contains(j))
                .map(|(_, c)| c),
        )
        .filter(|c| !drop.contains(*c))
        .count();
    if kept != target.len() || target.iter().any(|c| drop.contains(c)) {
        return None;
    }
    let layout = target
        .iter()
        .map(|c| match l.position(c) {
            Some(i) => Some(Src::Left(i)),
            None => r.position(c).map(Src::Right),
        })
        .collect::<Option<Vec<Src>>>()?;
    join_core(l, r, &lk, &rk, &layout, sink);
    Some(())
}

fn join_core(l: &Relation, r: &Relation, lk: &[usize], rk: &[usize], layout: &[Src], mut sink: impl FnMut(Row)) {
    if l.is_empty() || r.is_empty() {
        return;
    }
    let emit = |lrow: &Row, rrow: &Row| -> Row {
        layout
            .iter()
            .map(|s| match *s {
                Src::Left(i) => lrow[i],
                Src::Right(j) => rrow[j],
            })
            .collect()
    };
    let build_left = l.len() <= r.len();
    let (build, bk, probe, pk) = if build_left { (l, lk, r, rk) } else { (r, rk, l, lk) };
    let mut table: FxHashMap<Key, SmallVec<[&Row; 2]>> = FxHashMap::default();
    table.reserve(build.len());
    for row in build.rows() {
        table.entry(key_of(row, bk)).or_default().push(row);
    }
    for prow in probe.rows() {
        if let Some(matches) = table.get(&key_of(prow, pk)) {
            for brow in matches {
                sink(if build_left { emit(brow, prow) } else { emit(prow, brow) });
            }
        }
    }
}

pub fn join(l: &Relation, r: &Relation) -> Relation {
    join_project(l, r, &BTreeSet::new())
}

/// Rows of `l` that have no join partner in `r`.
pub fn antijoin(l: &Relation, r: &Relation) -> Relation {
    let (lk, rk) = shared_positions(l, r);
    let keys: rustc_hash::FxHashSet<Key> = r.rows().iter().map(|row| key_of(row, &rk)).collect();
    let rows: RowSet = l
        .rows()
        .iter()
        .filter(|row| !keys.contains(&key_of(row, &lk)))
        .cloned()
        .collect();
    Relation::from_set(l.columns_arc().clone(), rows)
}

enum Check {
    Lit(usize, Datum),
    Cols(usize, usize),
}

pub fn filter(p: &Predicate, rel: &Relation) -> Relation {
    let pos = |c: &Col| rel.position(c).expect("filter column checked by schema");
    let checks: Vec<Check> = p
        .atoms()
        .iter()
        .map(|a| match a {
            PredAtom::EqLit(c, v) => Check::Lit(pos(c), Datum::intern(v)),
            PredAtom::EqCol(a, b) => Check::Cols(pos(a), pos(b)),
        })
        .collect();
    let rows: RowSet = rel
        .rows()
        .iter()
        .filter(|row| {
            checks.iter().all(|c| match *c {
                Check::Lit(i, d) => row[i] == d,
                Check::Cols(i, j) => row[i] == row[j],
            })
        })
        .cloned()
        .collect();
    Relation::from_set(rel.columns_arc().clone(), rows)
}

/// Removes column `c` and deduplicates.
pub fn antiproject(c: &Col, rel: &Relation) -> Relation {
    let Some(drop_at) = rel.position(c) else {
        return rel.clone();
    };
    let columns: Arc<[Col]> = rel.columns().iter().filter(|x| *x != c).cloned().collect();
    let mut rows = row_set_with_capacity(rel.len());
    for row in rel.rows() {
        let mut r = row.clone();
        r.remove(drop_at);
        rows.insert(r);
    }
    Relation::from_set(columns, rows)
}

pub fn constant(c: &Col, d: Datum) -> Relation {
    let mut rows = RowSet::default();
    rows.insert(Row::from_slice(&[d]));
    Relation::from_set(Arc::from(vec![c.clone()]), rows)
}
