use std::time::{Duration, Instant};

use mura_core::algebra::{Col, Database, Relation, Value};
use mura_core::distexec::{execute_with, ExecConfig, ExecError, ExecMetrics, WorkerPool};
use mura_core::eval::{EvalConfig, EvalError, DEFAULT_ITERATION_CAP};
use mura_core::planner::{Optimized, Planner, StrategyChoice};
use serde_json::json;

use crate::queries::Query;
use crate::Failure;

pub const ITER_CAP_VAR: &str = "MURA_ITER_CAP";

#[derive(Debug, Clone)]
pub struct Settings {
    pub plan: StrategyChoice,
    pub budget: usize,
    pub timeout: Duration,
    pub iteration_cap: usize,
}

pub fn iteration_cap_from_env() -> Result<usize, Failure> {
    match std::env::var(ITER_CAP_VAR) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| Failure::Usage(format!("{ITER_CAP_VAR}={v} is not a positive integer"))),
        Err(_) => Ok(DEFAULT_ITERATION_CAP),
    }
}

pub fn plan_name(p: StrategyChoice) -> &'static str {
    match p {
        StrategyChoice::Auto => "auto",
        StrategyChoice::Gld => "gld",
        StrategyChoice::Plw => "plw",
    }
}

pub struct Outcome {
    pub optimized: Optimized,
    pub result: Relation,
    pub metrics: ExecMetrics,
    pub wall: Duration,
}

impl Outcome {
    pub fn metrics_json(&self, q: &Query, plan: StrategyChoice, workers: usize) -> serde_json::Value {
        let m = &self.metrics;
        json!({
            "query": q.id,
            "text": q.text(),
            "plan": plan_name(plan),
            "W": workers,
            "iterations": m.iterations,
            "shuffle_events": m.shuffle_events,
            "rows_shuffled": m.rows_shuffled,
            "rows_broadcast": m.rows_broadcast,
            "per_iteration_rows_shuffled": m.per_iteration_rows_shuffled,
            "wall_time_ms": self.wall.as_secs_f64() * 1e3,
            "result_count": self.result.len(),
            "tuples_produced": m.tuples_produced,
            "chosen": self.optimized.chosen,
            "fixpoints": m.fixpoints,
        })
    }
}

fn exec_failure(id: &str, e: ExecError) -> Failure {
    let msg = format!("{id}: {e}");
    match e {
        ExecError::Eval(EvalError::Schema(_) | EvalError::Decompose(_) | EvalError::UnboundVariable(_)) => {
            Failure::Schema(msg)
        }
        _ => Failure::Runtime(msg),
    }
}

pub fn optimize(q: &Query, planner: &Planner, s: &Settings) -> Result<Optimized, Failure> {
    Ok(planner.optimize(&q.term()?, s.budget, s.plan))
}

/// Plans and executes `q`; the timeout covers planning and execution.
pub fn run(q: &Query, db: &Database, planner: &Planner, pool: &WorkerPool, s: &Settings) -> Result<Outcome, Failure> {
    let start = Instant::now();
    let config = ExecConfig {
        eval: EvalConfig {
            iteration_cap: s.iteration_cap,
            deadline: Some(start + s.timeout),
        },
        ..ExecConfig::default()
    };
    let optimized = optimize(q, planner, s)?;
    let (result, metrics) = execute_with(&optimized.plan, db, pool, &config).map_err(|e| exec_failure(&q.id, e))?;
    Ok(Outcome {
        optimized,
        result,
        metrics,
        wall: start.elapsed(),
    })
}

/// Rows of `rel` sorted, with columns in `head` order when given.
pub fn sorted_rows(rel: &Relation, head: Option<&[Col]>) -> (Vec<Col>, Vec<Vec<Value>>) {
    let (cols, rows) = rel.sorted_values();
    let Some(head) = head else {
        return (cols, rows);
    };
    let at: Vec<usize> = head
        .iter()
        .map(|h| cols.iter().position(|c| c == h).expect("head column in result"))
        .collect();
    let mut rows: Vec<Vec<Value>> = rows
        .into_iter()
        .map(|r| at.iter().map(|&i| r[i].clone()).collect())
        .collect();
    rows.sort();
    (head.to_vec(), rows)
}
