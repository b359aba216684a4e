mod bench;
mod pipeline;
mod queries;
mod source;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mura_core::distexec::WorkerPool;
use mura_core::graph;
use mura_core::planner::{Planner, StrategyChoice};

use pipeline::Settings;
use queries::Query;
use source::GraphArgs;

/// Error of one pipeline stage; each kind has its own exit code.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Parse(String),
    Schema(String),
    Runtime(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Parse(_) => 2,
            Failure::Schema(_) => 3,
            Failure::Runtime(_) => 4,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Parse(m) | Failure::Schema(m) | Failure::Runtime(m) => m,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PlanArg {
    Auto,
    Gld,
    Plw,
}

impl From<PlanArg> for StrategyChoice {
    fn from(p: PlanArg) -> Self {
        match p {
            PlanArg::Auto => StrategyChoice::Auto,
            PlanArg::Gld => StrategyChoice::Gld,
            PlanArg::Plw => StrategyChoice::Plw,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "mura",
    version,
    about = "Recursive relational algebra over edge-labelled graphs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Args)]
struct PlanArgs {
    /// Fixpoint strategy.
    #[arg(long, value_enum, default_value_t = PlanArg::Auto)]
    plan: PlanArg,
    /// Number of rewritten terms explored by the optimizer.
    #[arg(long, default_value_t = 64)]
    budget: usize,
    /// Map query labels and constants onto the graph's labels and nodes.
    #[arg(long)]
    rebind: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Evaluate every query of a file and print result counts.
    Run {
        queries: PathBuf,
        #[command(flatten)]
        graph: GraphArgs,
        #[command(flatten)]
        plan: PlanArgs,
        #[arg(long, default_value_t = 4)]
        workers: usize,
        /// Seconds allowed per query.
        #[arg(long, default_value_t = 300)]
        timeout: u64,
        /// Write per-query metrics as a JSON array.
        #[arg(long)]
        metrics_out: Option<PathBuf>,
        /// Print result rows.
        #[arg(long)]
        print: bool,
    },
    /// Show the rewrites and physical plan chosen for each query.
    Explain {
        queries: PathBuf,
        #[command(flatten)]
        graph: GraphArgs,
        #[command(flatten)]
        plan: PlanArgs,
        /// Print the optimizer output as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Run a query corpus across plans and worker counts, writing CSV.
    Bench {
        /// Query file or directory of query files.
        corpus: PathBuf,
        #[command(flatten)]
        graph: GraphArgs,
        #[arg(long, value_enum, value_delimiter = ',', default_values_t = [PlanArg::Gld, PlanArg::Plw])]
        plans: Vec<PlanArg>,
        #[arg(long, value_delimiter = ',', default_values_t = [1, 2, 4, 8])]
        workers: Vec<usize>,
        /// Add `a1+/.../ak+` for k up to this value; 0 or 1 adds none.
        #[arg(long, default_value_t = 10)]
        family: usize,
        #[arg(long, default_value_t = 64)]
        budget: usize,
        /// Seconds allowed per run.
        #[arg(long, default_value_t = 300)]
        timeout: u64,
        #[arg(long)]
        rebind: bool,
        /// CSV destination; standard output when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a graph as TSV.
    Gen {
        /// `er:n=N,p=P[,labels=K][,seed=S]` or `tree:n=N[,labels=K][,seed=S]`.
        spec: String,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        large: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn create(path: &PathBuf) -> Result<BufWriter<File>, Failure> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Failure::Runtime(format!("cannot write {}: {e}", path.display())))
}

fn write_failed(e: io::Error) -> Failure {
    Failure::Runtime(format!("write failed: {e}"))
}

fn load_for(path: &std::path::Path, db: &mura_core::algebra::Database, rebind: bool) -> Result<Vec<Query>, Failure> {
    let qs = queries::load_queries(path)?;
    Ok(rebound(qs, db, rebind))
}

fn rebound(qs: Vec<Query>, db: &mura_core::algebra::Database, rebind: bool) -> Vec<Query> {
    if !rebind {
        return qs;
    }
    let (labels, nodes) = source::labels_and_nodes(db);
    qs.iter().map(|q| q.rebind(&labels, &nodes)).collect()
}

fn settings(plan: StrategyChoice, budget: usize, timeout: u64) -> Result<Settings, Failure> {
    let iteration_cap = pipeline::iteration_cap_from_env()?;
    if iteration_cap == 0 {
        return Err(Failure::Usage(format!("{} must be positive", pipeline::ITER_CAP_VAR)));
    }
    Ok(Settings {
        plan,
        budget,
        timeout: Duration::from_secs(timeout),
        iteration_cap,
    })
}

fn run(command: Command) -> Result<(), Failure> {
    let stdout = io::stdout();
    let mut out = stdout.lock();
    match command {
        Command::Run {
            queries,
            graph,
            plan,
            workers,
            timeout,
            metrics_out,
            print,
        } => {
            let s = settings(plan.plan.into(), plan.budget, timeout)?;
            let db = graph.load()?;
            let qs = load_for(&queries, &db, plan.rebind)?;
            let pool = WorkerPool::new(workers).map_err(|e| Failure::Usage(e.to_string()))?;
            let planner = Planner::for_database(&db);
            let mut metrics = Vec::new();
            for q in &qs {
                let o = pipeline::run(q, &db, &planner, &pool, &s)?;
                writeln!(out, "{}\t{}\t{}", q.id, o.result.len(), q.text()).map_err(write_failed)?;
                if print {
                    let head = q.head();
                    let (cols, rows) = pipeline::sorted_rows(&o.result, head.as_deref());
                    let names: Vec<&str> = cols.iter().map(|c| c.as_str()).collect();
                    writeln!(out, "#\t{}", names.join("\t")).map_err(write_failed)?;
                    for r in rows {
                        let vals: Vec<String> = r.iter().map(ToString::to_string).collect();
                        writeln!(out, "\t{}", vals.join("\t")).map_err(write_failed)?;
                    }
                }
                metrics.push(o.metrics_json(q, s.plan, workers));
            }
            if let Some(path) = metrics_out {
                let mut f = create(&path)?;
                serde_json::to_writer_pretty(&mut f, &metrics).map_err(|e| Failure::Runtime(e.to_string()))?;
                writeln!(f).and_then(|_| f.flush()).map_err(write_failed)?;
            }
            Ok(())
        }
        Command::Explain {
            queries,
            graph,
            plan,
            json,
        } => {
            let s = settings(plan.plan.into(), plan.budget, 0)?;
            let db = graph.load()?;
            let qs = load_for(&queries, &db, plan.rebind)?;
            let planner = Planner::for_database(&db);
            let mut all = Vec::new();
            for q in &qs {
                let o = pipeline::optimize(q, &planner, &s)?;
                if json {
                    all.push(serde_json::json!({ "query": q.id, "text": q.text(), "optimized": o }));
                } else {
                    write!(out, "{}", explain_text(q, &o)).map_err(write_failed)?;
                }
            }
            if json {
                serde_json::to_writer_pretty(&mut out, &all).map_err(|e| Failure::Runtime(e.to_string()))?;
                writeln!(out).map_err(write_failed)?;
            }
            Ok(())
        }
        Command::Bench {
            corpus,
            graph,
            plans,
            workers,
            family,
            budget,
            timeout,
            rebind,
            out: csv_out,
        } => {
            let s = settings(StrategyChoice::Auto, budget, timeout)?;
            let db = graph.load()?;
            let mut qs = bench::load_corpus(&corpus)?;
            qs.extend(bench::closure_family(family));
            let qs = rebound(qs, &db, rebind);
            let plans: Vec<StrategyChoice> = plans.into_iter().map(Into::into).collect();
            let grid = bench::Grid {
                plans: &plans,
                workers: &workers,
                settings: s,
            };
            let failures = match csv_out {
                Some(path) => bench::run(&qs, &db, &grid, create(&path)?)?,
                None => bench::run(&qs, &db, &grid, &mut out)?,
            };
            if failures > 0 {
                eprintln!("{failures} run(s) failed");
            }
            Ok(())
        }
        Command::Gen {
            spec,
            seed,
            large,
            out: path,
        } => {
            let spec = source::parse_gen_spec(&spec, seed).map_err(Failure::Usage)?;
            source::check_scale(&spec, large)?;
            let db = graph::generate(&spec).map_err(Failure::Usage)?;
            let tsv = graph::to_tsv(&db);
            match path {
                Some(p) => {
                    std::fs::write(&p, tsv).map_err(|e| Failure::Runtime(format!("cannot write {}: {e}", p.display())))
                }
                None => out.write_all(tsv.as_bytes()).map_err(write_failed),
            }
        }
    }
}

fn explain_text(q: &Query, o: &mura_core::planner::Optimized) -> String {
    use std::fmt::Write as _;
    let mut s = String::new();
    let _ = writeln!(s, "query {}: {}", q.id, q.text());
    let _ = writeln!(s, "classes: {}", q.classes());
    let _ = writeln!(s, "input: {}", o.input);
    let _ = writeln!(s, "plans explored: {}", o.candidates);
    let _ = writeln!(s, "chosen: {}", o.chosen);
    let _ = writeln!(s, "estimated rows: {:.1}, cost: {:.1}", o.estimate, o.cost);
    let _ = writeln!(s, "rewrite trace:");
    if o.trace.is_empty() {
        let _ = writeln!(s, "  (none)");
    }
    for (i, step) in o.trace.iter().enumerate() {
        let _ = writeln!(s, "  {}. {} at {:?}", i + 1, step.rule, step.path);
        let _ = writeln!(s, "     before: {}", step.before);
        let _ = writeln!(s, "     after:  {}", step.after);
    }
    let _ = writeln!(s, "strategies:");
    if o.plan.fixpoints.is_empty() {
        let _ = writeln!(s, "  no fixpoint");
    }
    for line in o.plan.explain_text().lines().skip(1) {
        let _ = writeln!(s, "  {line}");
    }
    s.push('\n');
    s
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("mura: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
