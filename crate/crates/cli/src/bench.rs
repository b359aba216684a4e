use std::io::Write;
use std::path::Path;

use mura_core::algebra::Database;
use mura_core::distexec::WorkerPool;
use mura_core::planner::{Planner, StrategyChoice};
use mura_core::ucrpq::{corpus, parse_query};

use crate::pipeline::{self, plan_name, Settings};
use crate::queries::{load_queries, Body, Query};
use crate::Failure;

pub const HEADER: [&str; 8] = [
    "query",
    "classes",
    "plan",
    "W",
    "wall_ms",
    "shuffles",
    "rows_shuffled",
    "result_count",
];

/// Queries of a file, or of every file in a directory in name order.
pub fn load_corpus(path: &Path) -> Result<Vec<Query>, Failure> {
    if !path.is_dir() {
        return load_queries(path);
    }
    let mut files: Vec<_> = std::fs::read_dir(path)
        .map_err(|e| Failure::Runtime(format!("cannot read {}: {e}", path.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file())
        .collect();
    files.sort();
    let mut out = Vec::new();
    for f in files {
        out.extend(load_queries(&f)?);
    }
    Ok(out)
}

/// `a1+/.../ak+` for `k` in `2..=max`.
pub fn closure_family(max: usize) -> Vec<Query> {
    (2..=max)
        .map(|k| Query {
            id: format!("concat-closures:{k}"),
            body: Body::Ucrpq(parse_query(&corpus::concatenated_closures(k)).expect("family query parses")),
        })
        .collect()
}

pub struct Grid<'a> {
    pub plans: &'a [StrategyChoice],
    pub workers: &'a [usize],
    pub settings: Settings,
}

/// Runs every query under every plan and worker count, one CSV row each.
/// Failed runs are reported on stderr and leave `result_count` as `error`.
/// Returns the number of failed runs.
pub fn run(queries: &[Query], db: &Database, grid: &Grid, out: impl Write) -> Result<usize, Failure> {
    let planner = Planner::for_database(db);
    let mut csv = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Failure::Runtime(format!("writing csv: {e}"));
    csv.write_record(HEADER).map_err(io)?;
    let mut failures = 0;
    for &w in grid.workers {
        let pool = WorkerPool::new(w).map_err(|e| Failure::Usage(e.to_string()))?;
        for &plan in grid.plans {
            let settings = Settings {
                plan,
                ..grid.settings.clone()
            };
            for q in queries {
                let classes = q.classes();
                let row = match pipeline::run(q, db, &planner, &pool, &settings) {
                    Ok(o) => [
                        format!("{:.3}", o.wall.as_secs_f64() * 1e3),
                        o.metrics.shuffle_events.to_string(),
                        o.metrics.rows_shuffled.to_string(),
                        o.result.len().to_string(),
                    ],
                    Err(e) => {
                        failures += 1;
                        eprintln!("{} (plan {}, W={w}): {}", q.id, plan_name(plan), e.message());
                        [String::new(), String::new(), String::new(), "error".into()]
                    }
                };
                let [wall, shuffles, moved, count] = row;
                csv.write_record([
                    q.id.as_str(),
                    &classes,
                    plan_name(plan),
                    &w.to_string(),
                    &wall,
                    &shuffles,
                    &moved,
                    &count,
                ])
                .map_err(io)?;
                csv.flush().map_err(|e| Failure::Runtime(format!("writing csv: {e}")))?;
            }
        }
    }
    Ok(failures)
}
