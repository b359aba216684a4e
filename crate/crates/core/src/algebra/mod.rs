//! Terms of the recursive relational algebra and the data they range over.

mod fcond;
mod parse;
mod relation;
mod schema;
mod term;
mod value;
mod vars;

use thiserror::Error;

pub use fcond::{
    decompose, strict_in, validate_fcond, DecomposeError, EmptySeedCheck, FconditionReport, FixpointDecomposition,
    Violation, ViolationKind,
};
pub use parse::{parse_term, TermParseError};
pub use relation::{row_set_with_capacity, Database, Relation, Row, RowSet, Schema, Tuple};
pub use schema::{schema_of, SchemaEnv, SchemaError};
pub use term::{PredAtom, Predicate, Term, TermPath};
pub use value::{col, Col, Datum, Value};
pub use vars::{all_var_names, free_vars, fresh_name, occurs_free, substitute};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AlgebraError {
    #[error("invalid column name `{0}`")]
    InvalidColumnName(String),
    #[error("duplicate column `{0}`")]
    DuplicateColumn(Col),
    #[error("unknown column `{0}`")]
    UnknownColumn(Col),
    #[error("row has {found} values, schema has {expected} columns")]
    ArityMismatch { expected: usize, found: usize },
    #[error("tuple {tuple} does not match the relation schema")]
    TupleSchemaMismatch { tuple: String },
    #[error("schemas differ: {left:?} vs {right:?}")]
    SchemaMismatch { left: Schema, right: Schema },
}
