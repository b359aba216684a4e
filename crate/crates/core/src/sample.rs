//! A small worked reachability instance used by tests, docs and the CLI.
//!
//! Two seed pairs per source node (1 and 10) are extended along the edges of
//! `E` until nothing new is reachable.

use crate::algebra::{parse_term, Database, Relation, Term};

pub const SEEDS: [(i64, i64); 4] = [(1, 2), (1, 4), (10, 11), (10, 13)];

pub const EDGES: [(i64, i64); 10] = [
    (1, 2),
    (1, 4),
    (10, 11),
    (10, 13),
    (2, 3),
    (4, 5),
    (11, 5),
    (11, 12),
    (13, 12),
    (5, 6),
];

/// The ten pairs of the least fixpoint.
pub const CLOSURE: [(i64, i64); 10] = [
    (1, 2),
    (1, 4),
    (10, 11),
    (10, 13),
    (1, 3),
    (1, 5),
    (10, 5),
    (10, 12),
    (1, 6),
    (10, 6),
];

fn pairs(rows: &[(i64, i64)]) -> Relation {
    Relation::from_values(&["src", "dst"], rows.iter().map(|&(a, b)| [a, b])).unwrap()
}

/// Database with relations `S` (seeds) and `E` (edges), both `{src, dst}`.
pub fn database() -> Database {
    Database::new().with("S", pairs(&SEEDS)).with("E", pairs(&EDGES))
}

pub fn closure() -> Relation {
    pairs(&CLOSURE)
}

/// One extension step `drop[c](rename[dst->c](S) join rename[src->c](E))`.
pub fn step_term() -> Term {
    parse_term("drop[c](rename[dst->c](S) join rename[src->c](E))").unwrap()
}

/// `mu(X = S U drop[c](rename[dst->c](X) join rename[src->c](E)))`.
pub fn fixpoint_term() -> Term {
    parse_term("mu(X = S U drop[c](rename[dst->c](X) join rename[src->c](E)))").unwrap()
}
