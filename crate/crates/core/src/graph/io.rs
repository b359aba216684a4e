use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

use super::{from_triples, EDGES};
use crate::algebra::{Database, Value};

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: expected 3 tab-separated fields, found {found}")]
    Format { line: usize, found: usize },
}

/// Integers become integer values, anything else a string.
fn value(field: &str) -> Value {
    field
        .parse::<i64>()
        .map(Value::Int)
        .unwrap_or_else(|_| Value::str(field))
}

/// Parses `src<TAB>label<TAB>dst` lines. Blank lines and lines starting with
/// `#` are skipped; duplicate triples collapse.
pub fn parse_tsv(text: &str) -> Result<Database, LoadError> {
    let mut triples = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 || fields.iter().any(|f| f.is_empty()) {
            return Err(LoadError::Format {
                line: i + 1,
                found: fields.iter().filter(|f| !f.is_empty()).count(),
            });
        }
        triples.push((value(fields[0]), value(fields[1]), value(fields[2])));
    }
    Ok(from_triples(triples))
}

pub fn load(path: &Path) -> Result<Database, LoadError> {
    let text = std::fs::read_to_string(path).map_err(|source| LoadError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_tsv(&text)
}

/// Canonical TSV: one sorted line per triple.
pub fn to_tsv(db: &Database) -> String {
    let mut out = String::new();
    if let Some(rel) = db.get(EDGES) {
        let (cols, rows) = rel.sorted_values();
        let at = |name: &str| cols.iter().position(|c| c.as_str() == name).expect("edge column");
        let (s, l, d) = (at("src"), at("lbl"), at("dst"));
        let mut rows: Vec<_> = rows
            .into_iter()
            .map(|r| (r[s].clone(), r[l].clone(), r[d].clone()))
            .collect();
        rows.sort();
        for (s, l, d) in rows {
            writeln!(out, "{s}\t{l}\t{d}").unwrap();
        }
    }
    out
}

pub fn save(db: &Database, path: &Path) -> std::io::Result<()> {
    std::fs::write(path, to_tsv(db))
}
