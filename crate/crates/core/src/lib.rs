//! Recursive relational algebra: terms, evaluation, rewriting, planning and
//! partitioned execution, plus a regular path query front end.

pub mod algebra;
pub mod distexec;
pub mod eval;
pub mod graph;
pub mod planner;
pub mod rewrite;
pub mod sample;
pub mod ucrpq;
