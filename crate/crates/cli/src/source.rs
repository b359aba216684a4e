use std::path::PathBuf;

use clap::Args;
use mura_core::algebra::{col, Database, Value};
use mura_core::graph::{self, GenSpec, LoadError, EDGES};

use crate::Failure;

/// Largest generated graph accepted without `--large`.
pub const DESK_NODES: u64 = 10_000;

#[derive(Debug, Clone, Args)]
pub struct GraphArgs {
    /// Edge file with `src<TAB>label<TAB>dst` lines.
    #[arg(long, conflicts_with = "gen")]
    pub graph: Option<PathBuf>,
    /// Generated graph, e.g. `er:n=200,p=0.05,labels=3` or `tree:n=1000`.
    #[arg(long = "gen", value_name = "SPEC")]
    pub gen: Option<String>,
    /// Seed for generated graphs that do not set their own.
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Allow generated graphs above the desk-scale node limit.
    #[arg(long)]
    pub large: bool,
}

impl GraphArgs {
    pub fn load(&self) -> Result<Database, Failure> {
        match (&self.graph, &self.gen) {
            (Some(path), _) => graph::load(path).map_err(|e| match e {
                LoadError::Io { .. } => Failure::Runtime(e.to_string()),
                LoadError::Format { .. } => Failure::Parse(format!("{}: {e}", path.display())),
            }),
            (None, Some(spec)) => {
                let spec = parse_gen_spec(spec, self.seed).map_err(Failure::Usage)?;
                check_scale(&spec, self.large)?;
                graph::generate(&spec).map_err(Failure::Usage)
            }
            (None, None) => Err(Failure::Usage("one of --graph or --gen is required".into())),
        }
    }
}

fn nodes_of(spec: &GenSpec) -> u64 {
    match spec {
        GenSpec::ErdosRenyi { n, .. } | GenSpec::RandomTree { n, .. } => *n,
        GenSpec::Labeled { base, .. } => nodes_of(base),
    }
}

pub fn check_scale(spec: &GenSpec, large: bool) -> Result<(), Failure> {
    let n = nodes_of(spec);
    if n > DESK_NODES && !large {
        return Err(Failure::Usage(format!(
            "{n} nodes is above the desk-scale limit of {DESK_NODES}; pass --large to generate it"
        )));
    }
    Ok(())
}

/// Parses `KIND:key=value,...` with kinds `er` (keys `n`, `p`) and `tree`
/// (key `n`). Both accept `labels` and `seed`.
pub fn parse_gen_spec(text: &str, default_seed: u64) -> Result<GenSpec, String> {
    let (kind, params) = text.split_once(':').unwrap_or((text, ""));
    let (mut n, mut p, mut labels, mut seed) = (None, None, None, default_seed);
    for kv in params.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| format!("expected key=value in graph spec, found `{kv}`"))?;
        let bad = |e: &dyn std::fmt::Display| format!("graph spec `{k}={v}`: {e}");
        match k {
            "n" => n = Some(v.parse::<u64>().map_err(|e| bad(&e))?),
            "p" => p = Some(v.parse::<f64>().map_err(|e| bad(&e))?),
            "labels" => labels = Some(v.parse::<usize>().map_err(|e| bad(&e))?),
            "seed" => seed = v.parse::<u64>().map_err(|e| bad(&e))?,
            _ => return Err(format!("unknown graph spec key `{k}`")),
        }
    }
    let n = n.ok_or("graph spec needs n=<nodes>")?;
    let base = match kind {
        "er" => GenSpec::ErdosRenyi {
            n,
            p: p.ok_or("er graphs need p=<probability>")?,
            seed,
        },
        "tree" if p.is_some() => return Err("tree graphs take no p".into()),
        "tree" => GenSpec::RandomTree { n, seed },
        _ => return Err(format!("unknown graph kind `{kind}`, expected er or tree")),
    };
    let spec = match labels {
        Some(k) => GenSpec::Labeled {
            base: Box::new(base),
            labels: k,
            seed: seed.wrapping_add(1),
        },
        None => base,
    };
    spec.validate()?;
    Ok(spec)
}

/// Sorted edge labels and sorted source nodes of `db`.
pub fn labels_and_nodes(db: &Database) -> (Vec<String>, Vec<Value>) {
    let Some(edges) = db.get(EDGES) else {
        return (Vec::new(), Vec::new());
    };
    let (cols, rows) = edges.sorted_values();
    let at = |name: &str| cols.iter().position(|c| *c == col(name)).expect("edge column");
    let (l, s) = (at("lbl"), at("src"));
    let mut labels: Vec<String> = rows.iter().map(|r| r[l].to_string()).collect();
    labels.sort();
    labels.dedup();
    let mut nodes: Vec<Value> = rows.iter().map(|r| r[s].clone()).collect();
    nodes.sort();
    nodes.dedup();
    (labels, nodes)
}
