//! Partitioned execution over a fixed number of logical workers.
//!
//! A shuffle is simulated by re-hashing rows across partitions; every shuffle
//! and broadcast is counted in [`ExecMetrics`].

mod execute;
mod fixpoint;

use std::hash::Hasher;
use std::sync::Arc;

use rayon::prelude::*;
use rustc_hash::FxHasher;
use serde::Serialize;
use thiserror::Error;

use crate::algebra::{row_set_with_capacity, AlgebraError, Col, Relation, Row, RowSet, Schema};
use crate::eval::{EvalConfig, EvalError};

pub use execute::{execute, execute_with};
pub use fixpoint::{run_gld, run_plw, run_plw_partitioned};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExecError {
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("partitioned operands disagree: {0}")]
    PartitionerMismatch(String),
    #[error("unknown column `{0}`")]
    UnknownColumn(Col),
    #[error("partition key {key:?} is not stable for fixpoint `{var}`")]
    InvalidKey { var: String, key: Vec<Col> },
    #[error("worker count must be at least 1")]
    InvalidWorkers,
    #[error("worker results of fixpoint `{0}` overlap")]
    DisjointnessViolated(String),
}

impl From<AlgebraError> for ExecError {
    fn from(e: AlgebraError) -> Self {
        ExecError::Eval(e.into())
    }
}

/// A fixed-size group of logical workers backed by a thread pool.
pub struct WorkerPool {
    workers: usize,
    pool: rayon::ThreadPool,
}

impl WorkerPool {
    pub fn new(workers: usize) -> Result<Self, ExecError> {
        if workers == 0 {
            return Err(ExecError::InvalidWorkers);
        }
        let threads = std::thread::available_parallelism().map_or(1, |n| n.get()).min(workers);
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .expect("thread pool");
        Ok(WorkerPool { workers, pool })
    }

    pub fn workers(&self) -> usize {
        self.workers
    }

    /// Runs `f(i, item)` for every item concurrently, keeping input order.
    pub fn map<T, R, F>(&self, items: Vec<T>, f: F) -> Vec<R>
    where
        T: Send,
        R: Send,
        F: Fn(usize, T) -> R + Sync,
    {
        self.pool
            .install(|| items.into_par_iter().enumerate().map(|(i, t)| f(i, t)).collect())
    }
}

impl std::fmt::Debug for WorkerPool {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("WorkerPool").field("workers", &self.workers).finish()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum Partitioner {
    /// No placement guarantee.
    None,
    /// A row lives on `hash(row restricted to these columns) mod W`. The
    /// column order is the order values are hashed in.
    HashOn(Vec<Col>),
}

impl Partitioner {
    fn renamed(&self, from: &Col, to: &Col) -> Partitioner {
        match self {
            Partitioner::None => Partitioner::None,
            Partitioner::HashOn(cols) => Partitioner::HashOn(
                cols.iter()
                    .map(|c| if c == from { to.clone() } else { c.clone() })
                    .collect(),
            ),
        }
    }
}

pub(crate) fn bucket(row: &Row, positions: &[usize], workers: usize) -> usize {
    let mut h = FxHasher::default();
    for &p in positions {
        h.write_u32(row[p].id());
    }
    let mixed = h.finish().wrapping_mul(0x9E37_79B9_7F4A_7C15);
    ((mixed >> 32) as usize) % workers
}

fn positions_of(columns: &[Col], key: &[Col]) -> Result<Vec<usize>, ExecError> {
    key.iter()
        .map(|k| {
            columns
                .iter()
                .position(|c| c == k)
                .ok_or_else(|| ExecError::UnknownColumn(k.clone()))
        })
        .collect()
}

/// A relation split over W workers. Partitions are pairwise disjoint.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionedRelation {
    columns: Arc<[Col]>,
    parts: Vec<Relation>,
    partitioner: Partitioner,
}

impl PartitionedRelation {
    /// Assembles partitions, laying every part out like the first.
    pub fn from_parts(parts: Vec<Relation>, partitioner: Partitioner) -> Result<Self, ExecError> {
        let columns = parts.first().ok_or(ExecError::InvalidWorkers)?.columns_arc().clone();
        let parts = parts
            .into_iter()
            .map(|p| Ok(p.aligned_to(&columns)?.into_owned()))
            .collect::<Result<Vec<_>, AlgebraError>>()?;
        Ok(PartitionedRelation {
            columns,
            parts,
            partitioner,
        })
    }

    pub(crate) fn from_row_sets(columns: Arc<[Col]>, sets: Vec<RowSet>, partitioner: Partitioner) -> Self {
        let parts = sets
            .into_iter()
            .map(|s| Relation::from_set(columns.clone(), s))
            .collect();
        PartitionedRelation {
            columns,
            parts,
            partitioner,
        }
    }

    /// Deals rows out in sorted order, one worker after the other.
    pub fn round_robin(rel: &Relation, workers: usize) -> Result<Self, ExecError> {
        if workers == 0 {
            return Err(ExecError::InvalidWorkers);
        }
        let mut rows: Vec<&Row> = rel.rows().iter().collect();
        rows.sort_unstable();
        let mut sets = vec![row_set_with_capacity(rel.len() / workers + 1); workers];
        for (i, row) in rows.into_iter().enumerate() {
            sets[i % workers].insert(row.clone());
        }
        Ok(Self::from_row_sets(rel.columns_arc().clone(), sets, Partitioner::None))
    }

    /// Every row on worker 0.
    pub(crate) fn single(rel: Relation, workers: usize) -> Self {
        let columns = rel.columns_arc().clone();
        let mut parts = vec![Relation::from_set(columns.clone(), RowSet::default()); workers];
        parts[0] = rel;
        PartitionedRelation {
            columns,
            parts,
            partitioner: Partitioner::None,
        }
    }

    pub fn columns(&self) -> &[Col] {
        &self.columns
    }

    pub fn schema(&self) -> Schema {
        self.columns.iter().cloned().collect()
    }

    pub fn workers(&self) -> usize {
        self.parts.len()
    }

    pub fn parts(&self) -> &[Relation] {
        &self.parts
    }

    pub fn partitioner(&self) -> &Partitioner {
        &self.partitioner
    }

    pub fn len(&self) -> usize {
        self.parts.iter().map(Relation::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.parts.iter().all(Relation::is_empty)
    }

    /// Concatenates the partitions. No deduplication is needed since the
    /// partitions are disjoint.
    pub fn gather(&self) -> Relation {
        let mut rows = row_set_with_capacity(self.len());
        for p in &self.parts {
            rows.extend(p.rows().iter().cloned());
        }
        Relation::from_set(self.columns.clone(), rows)
    }

    /// Like [`gather`](Self::gather), reusing the largest partition's rows.
    pub fn into_relation(self) -> Relation {
        let mut parts = self.parts;
        let Some(big) = (0..parts.len()).max_by_key(|&i| parts[i].len()) else {
            return Relation::from_set(self.columns, RowSet::default());
        };
        let columns = self.columns;
        let mut rows = match parts.swap_remove(big).aligned_to(&columns) {
            Ok(r) => r.into_owned().into_rows(),
            Err(_) => unreachable!("partitions share the layout"),
        };
        rows.reserve(parts.iter().map(Relation::len).sum());
        for p in &parts {
            rows.extend(p.rows().iter().cloned());
        }
        Relation::from_set(columns, rows)
    }

    /// Checks disjointness and, for hash partitioning, placement. Correct
    /// placement already implies disjointness.
    pub fn check_invariants(&self) -> Result<(), String> {
        match &self.partitioner {
            Partitioner::HashOn(key) => {
                let pos = positions_of(&self.columns, key).map_err(|e| e.to_string())?;
                for (i, p) in self.parts.iter().enumerate() {
                    if p.rows().iter().any(|r| bucket(r, &pos, self.parts.len()) != i) {
                        return Err(format!("row misplaced on worker {i}"));
                    }
                }
            }
            Partitioner::None => {
                if self.gather().len() != self.len() {
                    return Err("partitions overlap".into());
                }
            }
        }
        Ok(())
    }

    fn debug_check(&self) {
        debug_assert!(self.check_invariants().is_ok(), "{:?}", self.check_invariants());
    }

    pub(crate) fn map_parts<F>(&self, pool: &WorkerPool, f: F) -> Result<Vec<Relation>, ExecError>
    where
        F: Fn(usize, &Relation) -> Result<Relation, ExecError> + Sync,
    {
        pool.map(self.parts.iter().collect(), f).into_iter().collect()
    }

    pub(crate) fn renamed(&self, from: &Col, to: &Col) -> Result<Self, ExecError> {
        let parts = self
            .parts
            .iter()
            .map(|p| p.renamed(from, to))
            .collect::<Result<Vec<_>, _>>()?;
        let columns = parts[0].columns_arc().clone();
        Ok(PartitionedRelation {
            columns,
            parts,
            partitioner: self.partitioner.renamed(from, to),
        })
    }
}

/// Summary of one fixpoint's distributed evaluation.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct FixpointMetrics {
    pub var: String,
    pub strategy: String,
    pub iterations: usize,
    pub shuffle_events: usize,
    pub rows_shuffled: u64,
    pub rows_broadcast: u64,
    /// Whether a deduplicating shuffle ran after the local loops.
    pub final_distinct: bool,
    /// Result size on each worker.
    pub worker_rows: Vec<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ExecMetrics {
    pub shuffle_events: usize,
    pub rows_shuffled: u64,
    pub rows_broadcast: u64,
    /// Fixpoint steps; for local loops the slowest worker's count.
    pub iterations: usize,
    /// Rows moved by each shuffle event, in order.
    pub per_iteration_rows_shuffled: Vec<u64>,
    pub fixpoints: Vec<FixpointMetrics>,
    pub tuples_produced: u64,
}

impl ExecMetrics {
    pub(crate) fn shuffle(&mut self, rows: usize) {
        self.shuffle_events += 1;
        self.rows_shuffled += rows as u64;
        self.per_iteration_rows_shuffled.push(rows as u64);
    }

    pub(crate) fn broadcast(&mut self, rows: usize, workers: usize) {
        self.rows_broadcast += (rows * workers) as u64;
    }
}

#[derive(Debug, Clone)]
pub struct ExecConfig {
    pub eval: EvalConfig,
    /// Check that keyed local loops produce disjoint, correctly placed results.
    pub verify_disjoint: bool,
}

impl Default for ExecConfig {
    fn default() -> Self {
        ExecConfig {
            eval: EvalConfig::default(),
            verify_disjoint: true,
        }
    }
}

/// Hash-partitions `rel` on `cols` (hashed in sorted column order). Records
/// one shuffle of every row.
pub fn partition_by(
    rel: &Relation,
    cols: &Schema,
    workers: usize,
    metrics: &mut ExecMetrics,
) -> Result<PartitionedRelation, ExecError> {
    if workers == 0 {
        return Err(ExecError::InvalidWorkers);
    }
    let key: Vec<Col> = cols.iter().cloned().collect();
    let pos = positions_of(rel.columns(), &key)?;
    let mut sets = vec![row_set_with_capacity(rel.len() / workers + 1); workers];
    for row in rel.rows() {
        sets[bucket(row, &pos, workers)].insert(row.clone());
    }
    metrics.shuffle(rel.len());
    let out = PartitionedRelation::from_row_sets(rel.columns_arc().clone(), sets, Partitioner::HashOn(key));
    out.debug_check();
    Ok(out)
}

/// Moves the rows of `pr` to their `key` hash owners, deduplicating on
/// arrival. Records one shuffle of every row.
pub(crate) fn repartition(
    pr: &PartitionedRelation,
    key: Vec<Col>,
    pool: &WorkerPool,
    metrics: &mut ExecMetrics,
) -> Result<PartitionedRelation, ExecError> {
    let w = pr.workers();
    let pos = positions_of(&pr.columns, &key)?;
    let outgoing: Vec<Vec<Vec<Row>>> = pool.map(pr.parts.iter().collect(), |_, p: &Relation| {
        let mut buckets = vec![Vec::new(); w];
        for row in p.rows() {
            buckets[bucket(row, &pos, w)].push(row.clone());
        }
        buckets
    });
    metrics.shuffle(pr.len());
    let sets = receive(outgoing, pool);
    let out = PartitionedRelation::from_row_sets(pr.columns.clone(), sets, Partitioner::HashOn(key));
    out.debug_check();
    Ok(out)
}

/// `outgoing[src][dst]` rows, merged per destination into sets.
pub(crate) fn receive(outgoing: Vec<Vec<Vec<Row>>>, pool: &WorkerPool) -> Vec<RowSet> {
    let w = pool.workers();
    let mut incoming: Vec<Vec<Vec<Row>>> = (0..w).map(|_| Vec::with_capacity(w)).collect();
    for buckets in outgoing {
        for (dst, rows) in buckets.into_iter().enumerate() {
            incoming[dst].push(rows);
        }
    }
    pool.map(incoming, |_, batches| {
        let mut set = row_set_with_capacity(batches.iter().map(Vec::len).sum());
        for rows in batches {
            set.extend(rows);
        }
        set
    })
}

fn check_compatible(a: &PartitionedRelation, b: &PartitionedRelation) -> Result<(), ExecError> {
    if a.workers() != b.workers() {
        return Err(ExecError::PartitionerMismatch(format!(
            "{} vs {} workers",
            a.workers(),
            b.workers()
        )));
    }
    if a.schema() != b.schema() {
        return Err(ExecError::PartitionerMismatch(format!(
            "schemas {:?} vs {:?}",
            a.schema(),
            b.schema()
        )));
    }
    if a.partitioner != b.partitioner || a.partitioner == Partitioner::None {
        return Err(ExecError::PartitionerMismatch(format!(
            "{:?} vs {:?}",
            a.partitioner, b.partitioner
        )));
    }
    Ok(())
}

/// Per-partition union of two relations hash-partitioned the same way.
pub fn partitionwise_union(a: &PartitionedRelation, b: &PartitionedRelation) -> Result<PartitionedRelation, ExecError> {
    check_compatible(a, b)?;
    let parts = a
        .parts
        .iter()
        .zip(&b.parts)
        .map(|(x, y)| x.union(y))
        .collect::<Result<Vec<_>, _>>()?;
    let out = PartitionedRelation::from_parts(parts, a.partitioner.clone())?;
    out.debug_check();
    Ok(out)
}

/// Per-partition difference of two relations hash-partitioned the same way.
pub fn partitionwise_difference(
    a: &PartitionedRelation,
    b: &PartitionedRelation,
) -> Result<PartitionedRelation, ExecError> {
    check_compatible(a, b)?;
    let parts = a
        .parts
        .iter()
        .zip(&b.parts)
        .map(|(x, y)| x.difference(y))
        .collect::<Result<Vec<_>, _>>()?;
    let out = PartitionedRelation::from_parts(parts, a.partitioner.clone())?;
    out.debug_check();
    Ok(out)
}
