//! Edge-labelled graphs stored as a triple relation `edges {src, lbl, dst}`:
//! TSV files, seeded generators and benchmark terms.

mod generate;
mod io;
pub mod workloads;

use crate::algebra::{col, Col, Database, Relation, Value};

pub use generate::{generate, label_name, GenSpec, DEFAULT_LABEL};
pub use io::{load, parse_tsv, save, to_tsv, LoadError};

pub const EDGES: &str = "edges";

pub fn edge_columns() -> Vec<Col> {
    vec![col("src"), col("lbl"), col("dst")]
}

/// Builds the `edges` database from `(src, label, dst)` triples.
pub fn from_triples(triples: impl IntoIterator<Item = (Value, Value, Value)>) -> Database {
    let rel = Relation::from_values(&["src", "lbl", "dst"], triples.into_iter().map(|(s, l, d)| [s, l, d]))
        .expect("three columns");
    Database::new().with(EDGES, rel)
}

/// Node value for generated graphs.
pub fn node(i: u64) -> Value {
    Value::Int(i as i64)
}
