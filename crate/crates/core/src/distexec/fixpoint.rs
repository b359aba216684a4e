//! Fixpoint strategies: a global loop that shuffles every step's new rows,
//! and independent per-worker loops.

use std::sync::Arc;

use super::{
    bucket, receive, repartition, ExecError, ExecMetrics, FixpointMetrics, PartitionedRelation, Partitioner, WorkerPool,
};
use crate::algebra::{free_vars, Col, FixpointDecomposition, Relation, Row, RowSet, Schema, Term};
use crate::eval::{eval_unchecked, hoist_invariants, seminaive_from, step_rows, EvalEnv, EvalError};
use crate::rewrite::stable_columns;

/// Hoists the recursion-free parts of the body and counts shipping them to
/// every worker.
fn prepare<'a>(
    d: &FixpointDecomposition,
    env: &EvalEnv<'a>,
    workers: usize,
    metrics: &mut ExecMetrics,
) -> Result<(Option<Term>, EvalEnv<'a>), ExecError> {
    let Some(phi) = d.variable_part() else {
        return Ok((None, env.clone()));
    };
    let (phi, loop_env) = hoist_invariants(&phi, &d.var, env)?;
    for name in free_vars(&phi).iter().filter(|v| **v != d.var) {
        if let Some(rel) = loop_env.lookup(name) {
            metrics.broadcast(rel.len(), workers);
        }
    }
    Ok((Some(phi), loop_env))
}

fn check_iteration(d: &FixpointDecomposition, env: &EvalEnv, done: usize) -> Result<(), ExecError> {
    let cap = env.config().iteration_cap;
    if done >= cap {
        return Err(EvalError::IterationLimitExceeded {
            var: d.var.clone(),
            cap,
        }
        .into());
    }
    Ok(env.check_deadline()?)
}

/// Records the fixpoint's share of `metrics` accumulated since `before`.
fn summarize(
    d: &FixpointDecomposition,
    strategy: String,
    before: &ExecMetrics,
    metrics: &mut ExecMetrics,
    iterations: usize,
    final_distinct: bool,
    result: &PartitionedRelation,
) {
    metrics.iterations += iterations;
    metrics.fixpoints.push(FixpointMetrics {
        var: d.var.clone(),
        strategy,
        iterations,
        shuffle_events: metrics.shuffle_events - before.shuffle_events,
        rows_shuffled: metrics.rows_shuffled - before.rows_shuffled,
        rows_broadcast: metrics.rows_broadcast - before.rows_broadcast,
        final_distinct,
        worker_rows: result.parts().iter().map(Relation::len).collect(),
    });
}

/// Global loop: each step evaluates the body on every worker's share of the
/// new rows, then shuffles the candidates by full row so each worker can
/// deduplicate against its slice of the accumulated result.
pub(crate) fn gld(
    d: &FixpointDecomposition,
    seed: &PartitionedRelation,
    env: &EvalEnv,
    pool: &WorkerPool,
    metrics: &mut ExecMetrics,
) -> Result<PartitionedRelation, ExecError> {
    let before = metrics.clone();
    let w = pool.workers();
    let layout: Arc<[Col]> = seed.columns().into();
    let full: Vec<Col> = layout.to_vec();
    let pos: Vec<usize> = (0..layout.len()).collect();
    let (phi, loop_env) = prepare(d, env, w, metrics)?;
    let start = repartition(seed, full.clone(), pool, metrics)?;
    let mut x: Vec<RowSet> = start.parts().iter().map(|p| p.rows().clone()).collect();
    let mut delta: Vec<Relation> = start.parts().to_vec();
    let mut iterations = 1;
    if let Some(phi) = &phi {
        while delta.iter().any(|p| !p.is_empty()) {
            check_iteration(d, env, iterations)?;
            let outgoing = pool
                .map(delta, |_, part| -> Result<Vec<Vec<Row>>, EvalError> {
                    let step_env = loop_env.with_binding(d.var.clone(), part);
                    let mut buckets = vec![Vec::new(); w];
                    step_rows(phi, &step_env, &layout, |row| buckets[bucket(&row, &pos, w)].push(row))?;
                    Ok(buckets)
                })
                .into_iter()
                .collect::<Result<Vec<_>, _>>()?;
            metrics.shuffle(outgoing.iter().flatten().map(Vec::len).sum());
            let incoming = receive(outgoing, pool);
            let merged = pool.map(
                x.into_iter().zip(incoming).collect(),
                |_, (mut xi, candidates): (RowSet, RowSet)| {
                    let mut new = RowSet::default();
                    for row in candidates {
                        if xi.insert(row.clone()) {
                            new.insert(row);
                        }
                    }
                    (xi, new)
                },
            );
            (x, delta) = merged
                .into_iter()
                .map(|(xi, new)| (xi, Relation::from_set(layout.clone(), new)))
                .unzip();
            iterations += 1;
        }
    }
    env.count_fixpoint(iterations);
    let out = PartitionedRelation::from_row_sets(layout, x, Partitioner::HashOn(full));
    out.debug_check();
    summarize(d, "gld".into(), &before, metrics, iterations, false, &out);
    Ok(out)
}

/// Local loops: worker `i` computes `mu(X = R_i U phi)` on its own share of
/// the seed. With a stable key the shares are hash-partitioned on it and the
/// local results are disjoint; without one the seed is used as split and a
/// final deduplicating shuffle merges the results.
pub(crate) fn plw(
    d: &FixpointDecomposition,
    seed: &PartitionedRelation,
    key: Option<&[Col]>,
    env: &EvalEnv,
    pool: &WorkerPool,
    metrics: &mut ExecMetrics,
    verify: bool,
) -> Result<PartitionedRelation, ExecError> {
    let before = metrics.clone();
    let w = pool.workers();
    if let Some(k) = key {
        if !stable_columns(d).contains_all(k) {
            return Err(ExecError::InvalidKey {
                var: d.var.clone(),
                key: k.to_vec(),
            });
        }
    }
    let seed = match key {
        Some(k) => repartition(seed, k.to_vec(), pool, metrics)?,
        None => seed.clone(),
    };
    let (phi, loop_env) = prepare(d, env, w, metrics)?;
    let local = FixpointDecomposition {
        variable: phi.into_iter().collect(),
        ..d.clone()
    };
    let results = pool
        .map(seed.parts().to_vec(), |_, part| seminaive_from(&local, part, &loop_env))
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?;
    let iterations = results.iter().map(|(_, t)| t.iterations).max().unwrap_or(1);
    let layout: Arc<[Col]> = seed.columns().into();
    let sets: Vec<RowSet> = results
        .into_iter()
        .map(|(rel, _)| Ok(rel.aligned_to(&layout)?.into_owned().into_rows()))
        .collect::<Result<_, crate::algebra::AlgebraError>>()?;
    let (out, final_distinct, name) = match key {
        Some(k) => {
            let out = PartitionedRelation::from_row_sets(layout, sets, Partitioner::HashOn(k.to_vec()));
            if verify {
                out.check_invariants()
                    .map_err(|_| ExecError::DisjointnessViolated(d.var.clone()))?;
            }
            let names: Vec<&str> = k.iter().map(Col::as_str).collect();
            (out, false, format!("plw[{}]", names.join(",")))
        }
        None => {
            let merged = PartitionedRelation::from_row_sets(layout.clone(), sets, Partitioner::None);
            let out = repartition(&merged, layout.to_vec(), pool, metrics)?;
            (out, true, "plw".to_string())
        }
    };
    summarize(d, name, &before, metrics, iterations, final_distinct, &out);
    Ok(out)
}

fn eval_seed(d: &FixpointDecomposition, env: &EvalEnv) -> Result<Relation, ExecError> {
    Ok(match d.constant_part() {
        Some(r) => eval_unchecked(&r, env)?,
        None => Relation::empty_with_schema(&d.schema),
    })
}

fn finish(
    out: Result<PartitionedRelation, ExecError>,
    env: &EvalEnv,
    before: u64,
    mut metrics: ExecMetrics,
) -> Result<(Relation, ExecMetrics), ExecError> {
    let out = out?;
    metrics.tuples_produced = env.stats().tuples_produced - before;
    Ok((out.into_relation(), metrics))
}

/// Evaluates a fixpoint with the global-loop strategy. The seed starts out
/// dealt round-robin over the workers.
pub fn run_gld(
    d: &FixpointDecomposition,
    env: &EvalEnv,
    pool: &WorkerPool,
) -> Result<(Relation, ExecMetrics), ExecError> {
    let before = env.stats().tuples_produced;
    let seed = PartitionedRelation::round_robin(&eval_seed(d, env)?, pool.workers())?;
    let mut metrics = ExecMetrics::default();
    let out = gld(d, &seed, env, pool, &mut metrics);
    finish(out, env, before, metrics)
}

/// Evaluates a fixpoint with local loops, partitioned on `key` if given and
/// dealt round-robin otherwise.
pub fn run_plw(
    d: &FixpointDecomposition,
    env: &EvalEnv,
    pool: &WorkerPool,
    key: Option<&Schema>,
) -> Result<(Relation, ExecMetrics), ExecError> {
    let seed = eval_seed(d, env)?;
    let parts = PartitionedRelation::round_robin(&seed, pool.workers())?;
    run_plw_partitioned(d, parts.parts().to_vec(), env, pool, key)
}

/// Like [`run_plw`] with the seed already split into one part per worker.
pub fn run_plw_partitioned(
    d: &FixpointDecomposition,
    seed_parts: Vec<Relation>,
    env: &EvalEnv,
    pool: &WorkerPool,
    key: Option<&Schema>,
) -> Result<(Relation, ExecMetrics), ExecError> {
    if seed_parts.len() != pool.workers() {
        return Err(ExecError::PartitionerMismatch(format!(
            "{} seed parts for {} workers",
            seed_parts.len(),
            pool.workers()
        )));
    }
    let before = env.stats().tuples_produced;
    let seed = PartitionedRelation::from_parts(seed_parts, Partitioner::None)?;
    let key: Option<Vec<Col>> = key.map(|k| k.iter().cloned().collect());
    let mut metrics = ExecMetrics::default();
    let out = plw(d, &seed, key.as_deref(), env, pool, &mut metrics, true);
    finish(out, env, before, metrics)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::col;
    use crate::eval::{decompose_in, eval_fixpoint_seminaive};
    use crate::sample;

    fn pairs(rows: &[(i64, i64)]) -> Relation {
        Relation::from_values(&["src", "dst"], rows.iter().map(|&(a, b)| [a, b])).unwrap()
    }

    #[test]
    fn gld_matches_local_and_shuffles_every_step() {
        let db = sample::database();
        let env = EvalEnv::new(&db);
        let d = decompose_in(&sample::fixpoint_term(), &env).unwrap();
        for w in [1, 2, 4] {
            let pool = WorkerPool::new(w).unwrap();
            let (out, m) = run_gld(&d, &env, &pool).unwrap();
            assert_eq!(out, sample::closure());
            assert_eq!(m.iterations, 4);
            assert!(m.shuffle_events >= m.iterations);
            assert_eq!(m.rows_broadcast, (10 * w) as u64);
            assert_eq!(m.rows_shuffled, m.per_iteration_rows_shuffled.iter().sum::<u64>());
        }
    }

    #[test]
    fn unkeyed_split_finds_overlapping_paths() {
        let db = sample::database();
        let env = EvalEnv::new(&db);
        let d = decompose_in(&sample::fixpoint_term(), &env).unwrap();
        let pool = WorkerPool::new(2).unwrap();
        let parts = vec![pairs(&[(1, 2), (10, 11)]), pairs(&[(1, 4), (10, 13)])];
        let local = FixpointDecomposition {
            constant: vec![],
            ..d.clone()
        };
        let found: Vec<Relation> = parts
            .iter()
            .map(|p| {
                let (r, _) = seminaive_from(&local, p.clone(), &env).unwrap();
                r.difference(p).unwrap()
            })
            .collect();
        assert_eq!(found[0], pairs(&[(1, 3), (10, 5), (10, 6), (10, 12)]));
        assert_eq!(found[1], pairs(&[(1, 5), (1, 6), (10, 12)]));

        let (out, m) = run_plw_partitioned(&d, parts, &env, &pool, None).unwrap();
        assert_eq!(out, sample::closure());
        assert_eq!(m.shuffle_events, 1);
        assert!(m.fixpoints[0].final_distinct);
    }

    #[test]
    fn keyed_local_loops_are_disjoint() {
        let db = sample::database();
        let env = EvalEnv::new(&db);
        let d = decompose_in(&sample::fixpoint_term(), &env).unwrap();
        let key = Schema::from([col("src")]);
        for w in [1, 2, 4] {
            let pool = WorkerPool::new(w).unwrap();
            let (out, m) = run_plw(&d, &env, &pool, Some(&key)).unwrap();
            assert_eq!(out, eval_fixpoint_seminaive(&d, &env).unwrap());
            assert_eq!(m.shuffle_events, 1);
            let f = &m.fixpoints[0];
            assert!(!f.final_distinct);
            assert_eq!(f.worker_rows.iter().sum::<usize>(), 10);
        }
        let pool = WorkerPool::new(2).unwrap();
        let bad = Schema::from([col("dst")]);
        assert!(matches!(
            run_plw(&d, &env, &pool, Some(&bad)),
            Err(ExecError::InvalidKey { .. })
        ));
    }

    #[test]
    fn iteration_cap_applies() {
        let db = sample::database();
        let env = EvalEnv::new(&db).with_config(crate::eval::EvalConfig {
            iteration_cap: 2,
            deadline: None,
        });
        let d = decompose_in(&sample::fixpoint_term(), &env).unwrap();
        let pool = WorkerPool::new(2).unwrap();
        assert!(matches!(
            run_gld(&d, &env, &pool),
            Err(ExecError::Eval(EvalError::IterationLimitExceeded { .. }))
        ));
        assert!(matches!(
            run_plw(&d, &env, &pool, None),
            Err(ExecError::Eval(EvalError::IterationLimitExceeded { .. }))
        ));
    }
}
