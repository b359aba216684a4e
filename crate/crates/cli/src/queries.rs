use std::path::Path;

use mura_core::algebra::{parse_term, Col, Term, Value};
use mura_core::graph::EDGES;
use mura_core::ucrpq::{classify, parse_query, translate, variable_column, UcrpqQuery};

use crate::Failure;

#[derive(Debug, Clone)]
pub enum Body {
    Ucrpq(UcrpqQuery),
    Term(Term),
}

#[derive(Debug, Clone)]
pub struct Query {
    pub id: String,
    pub body: Body,
}

impl Query {
    pub fn text(&self) -> String {
        match &self.body {
            Body::Ucrpq(q) => q.to_string(),
            Body::Term(t) => t.to_string(),
        }
    }

    /// Space-separated classes; `none` for non-recursive queries and `-`
    /// for terms.
    pub fn classes(&self) -> String {
        match &self.body {
            Body::Ucrpq(q) => {
                let c = classify(q);
                if c.is_empty() {
                    "none".into()
                } else {
                    c.0.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(" ")
                }
            }
            Body::Term(_) => "-".into(),
        }
    }

    pub fn term(&self) -> Result<Term, Failure> {
        match &self.body {
            Body::Ucrpq(q) => translate(q, EDGES).map_err(|e| Failure::Schema(format!("{}: {e}", self.id))),
            Body::Term(t) => Ok(t.clone()),
        }
    }

    /// Output columns in head order, or `None` to keep the relation's order.
    pub fn head(&self) -> Option<Vec<Col>> {
        match &self.body {
            Body::Ucrpq(q) => Some(q.head.iter().map(|v| variable_column(v)).collect()),
            Body::Term(_) => None,
        }
    }

    pub fn rebind(&self, labels: &[String], nodes: &[Value]) -> Query {
        match &self.body {
            Body::Ucrpq(q) => Query {
                id: self.id.clone(),
                body: Body::Ucrpq(q.rebind(labels, nodes)),
            },
            Body::Term(_) => self.clone(),
        }
    }
}

fn is_ucrpq(line: &str) -> bool {
    line.contains("<-") || line.contains('←')
}

/// One query per line; `#` starts a comment. Lines with `<-` are path
/// queries, all others terms.
pub fn parse_queries(text: &str, name: &str) -> Result<Vec<Query>, Failure> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let id = format!("{name}:{}", i + 1);
        let body = if is_ucrpq(line) {
            Body::Ucrpq(parse_query(line).map_err(|e| Failure::Parse(format!("{id}: {e}")))?)
        } else {
            Body::Term(parse_term(line).map_err(|e| Failure::Parse(format!("{id}: {e}")))?)
        };
        out.push(Query { id, body });
    }
    Ok(out)
}

pub fn load_queries(path: &Path) -> Result<Vec<Query>, Failure> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Failure::Runtime(format!("cannot read {}: {e}", path.display())))?;
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    parse_queries(&text, &name)
}
