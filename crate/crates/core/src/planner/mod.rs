//! Cardinality estimation, logical plan selection and physical planning.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::Serialize;
use thiserror::Error;

use crate::algebra::{decompose, Col, Database, PredAtom, Schema, SchemaEnv, Term, TermPath};
use crate::rewrite::{stable_columns, ExploredTerm, RewriteStep, Rewriter};

pub const DEFAULT_EXPANSION_FACTOR: f64 = 10.0;
pub const DEFAULT_BROADCAST_THRESHOLD: f64 = 100_000.0;

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct RelationStats {
    pub rows: u64,
    pub distinct: BTreeMap<Col, u64>,
}

/// Row and per-column distinct counts of base relations.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct Synopsis {
    relations: BTreeMap<String, RelationStats>,
}

impl Synopsis {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_database(db: &Database) -> Self {
        let mut syn = Synopsis::new();
        for (name, rel) in db.iter() {
            let distinct = rel
                .columns()
                .iter()
                .enumerate()
                .map(|(i, c)| {
                    let values: rustc_hash::FxHashSet<_> = rel.rows().iter().map(|r| r[i]).collect();
                    (c.clone(), values.len() as u64)
                })
                .collect();
            syn.insert(
                name,
                RelationStats {
                    rows: rel.len() as u64,
                    distinct,
                },
            );
        }
        syn
    }

    pub fn insert(&mut self, name: impl Into<String>, stats: RelationStats) {
        self.relations.insert(name.into(), stats);
    }

    pub fn get(&self, name: &str) -> Option<&RelationStats> {
        self.relations.get(name)
    }

    pub fn schemas(&self) -> SchemaEnv {
        self.relations
            .iter()
            .map(|(k, v)| (k.clone(), v.distinct.keys().cloned().collect()))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlanError {
    #[error("unknown relation `{0}`")]
    UnknownRelation(String),
    #[error("cannot plan term: {0}")]
    Invalid(String),
}

/// Estimated size of an intermediate result.
#[derive(Debug, Clone, PartialEq)]
struct Estimate {
    rows: f64,
    distinct: BTreeMap<Col, f64>,
}

impl Estimate {
    fn distinct_of(&self, c: &Col) -> f64 {
        self.distinct.get(c).copied().unwrap_or(self.rows).max(1.0)
    }

    fn capped(mut self) -> Self {
        let rows = self.rows;
        for d in self.distinct.values_mut() {
            *d = d.min(rows);
        }
        self
    }

    fn schema(&self) -> Schema {
        self.distinct.keys().cloned().collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub enum StrategyChoice {
    /// Partitioned local loops when a stable column exists, else a global loop.
    #[default]
    Auto,
    Gld,
    Plw,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum FixpointStrategy {
    /// Global loop with a shuffle of the new rows at every step.
    Gld,
    /// Independent local loops per worker.
    Plw {
        key: Option<Vec<Col>>,
        skip_final_distinct: bool,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Side {
    Left,
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum JoinMode {
    /// Replicate the given operand to every worker.
    Broadcast(Side),
    /// Hash both operands on the shared columns.
    Partitioned,
}

/// A term annotated with execution choices. Nodes are identified by their
/// pre-order index in the term.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhysicalPlan {
    pub term: Term,
    pub fixpoints: BTreeMap<usize, FixpointStrategy>,
    pub joins: BTreeMap<usize, JoinMode>,
}

impl PhysicalPlan {
    /// Pre-order index of every node path.
    pub fn node_ids(&self) -> BTreeMap<TermPath, usize> {
        self.term
            .positions()
            .into_iter()
            .enumerate()
            .map(|(i, (p, _))| (p, i))
            .collect()
    }

    pub fn explain_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "term: {}", self.term).unwrap();
        let positions = self.term.positions();
        for (id, s) in &self.fixpoints {
            let (path, t) = &positions[*id];
            let var = match t {
                Term::Fixpoint { var, .. } => var.as_str(),
                _ => "?",
            };
            let s = match s {
                FixpointStrategy::Gld => "gld".to_string(),
                FixpointStrategy::Plw { key: Some(k), .. } => {
                    let k: Vec<&str> = k.iter().map(|c| c.as_str()).collect();
                    format!("plw key={{{}}} no final distinct", k.join(","))
                }
                FixpointStrategy::Plw { key: None, .. } => "plw round-robin, final distinct".to_string(),
            };
            writeln!(out, "fixpoint #{id} {var} at {path:?}: {s}").unwrap();
        }
        for (id, m) in &self.joins {
            let m = match m {
                JoinMode::Broadcast(Side::Left) => "broadcast left",
                JoinMode::Broadcast(Side::Right) => "broadcast right",
                JoinMode::Partitioned => "partitioned",
            };
            writeln!(out, "join #{id} at {:?}: {m}", positions[*id].0).unwrap();
        }
        out
    }
}

/// Plan chosen for a term, with the rewrites that produced it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Optimized {
    pub input: String,
    pub chosen: String,
    pub estimate: f64,
    pub cost: f64,
    pub candidates: usize,
    pub trace: Vec<RewriteStep>,
    pub plan: PhysicalPlan,
}

#[derive(Debug, Clone)]
pub struct Planner {
    synopsis: Synopsis,
    schemas: SchemaEnv,
    /// Rows of a fixpoint relative to its constant part.
    pub expansion_factor: f64,
    /// Multiplier for the per-step cost of a fixpoint body.
    pub depth_proxy: f64,
    pub broadcast_threshold: f64,
}

impl Planner {
    pub fn new(synopsis: Synopsis) -> Self {
        let schemas = synopsis.schemas();
        Planner {
            synopsis,
            schemas,
            expansion_factor: DEFAULT_EXPANSION_FACTOR,
            depth_proxy: 1.0,
            broadcast_threshold: DEFAULT_BROADCAST_THRESHOLD,
        }
    }

    pub fn for_database(db: &Database) -> Self {
        Planner::new(Synopsis::from_database(db))
    }

    pub fn synopsis(&self) -> &Synopsis {
        &self.synopsis
    }

    pub fn rewriter(&self) -> Rewriter {
        Rewriter::new(self.schemas.clone())
    }

    /// Estimated number of rows of `term`.
    pub fn estimate(&self, term: &Term) -> Result<f64, PlanError> {
        Ok(self.est(term, &BTreeMap::new(), &mut 0.0)?.rows)
    }

    /// Sum of the estimated sizes of every materialized intermediate result,
    /// counting a fixpoint's body once at the fixpoint's estimated size.
    pub fn cost(&self, term: &Term) -> Result<f64, PlanError> {
        let mut cost = 0.0;
        self.est(term, &BTreeMap::new(), &mut cost)?;
        Ok(cost)
    }

    fn env_with(&self, bound: &BTreeMap<String, Estimate>) -> SchemaEnv {
        let mut env = self.schemas.clone();
        env.extend(bound.iter().map(|(k, v)| (k.clone(), v.schema())));
        env
    }

    fn est(&self, t: &Term, bound: &BTreeMap<String, Estimate>, cost: &mut f64) -> Result<Estimate, PlanError> {
        let out = match t {
            Term::Var(x) => {
                if let Some(e) = bound.get(x) {
                    return Ok(e.clone());
                }
                let s = self
                    .synopsis
                    .get(x)
                    .ok_or_else(|| PlanError::UnknownRelation(x.clone()))?;
                return Ok(Estimate {
                    rows: s.rows as f64,
                    distinct: s.distinct.iter().map(|(c, d)| (c.clone(), *d as f64)).collect(),
                });
            }
            Term::Rename { from, to, term } => {
                let mut e = self.est(term, bound, cost)?;
                if let Some(d) = e.distinct.remove(from) {
                    e.distinct.insert(to.clone(), d);
                }
                return Ok(e);
            }
            Term::Const(c, _) => Estimate {
                rows: 1.0,
                distinct: BTreeMap::from([(c.clone(), 1.0)]),
            },
            Term::Filter(p, inner) => {
                let mut e = self.est(inner, bound, cost)?;
                for atom in p.atoms() {
                    match atom {
                        PredAtom::EqLit(c, _) => {
                            e.rows /= e.distinct_of(c);
                            e.distinct.insert(c.clone(), 1.0);
                        }
                        PredAtom::EqCol(a, b) => {
                            let d = e.distinct_of(a).max(e.distinct_of(b));
                            e.rows /= d;
                            let m = e.distinct_of(a).min(e.distinct_of(b));
                            e.distinct.insert(a.clone(), m);
                            e.distinct.insert(b.clone(), m);
                        }
                    }
                }
                e.capped()
            }
            Term::Union(a, b) => {
                let l = self.est(a, bound, cost)?;
                let r = self.est(b, bound, cost)?;
                let distinct = l
                    .distinct
                    .iter()
                    .map(|(c, d)| (c.clone(), d + r.distinct.get(c).copied().unwrap_or(0.0)))
                    .collect();
                Estimate {
                    rows: l.rows + r.rows,
                    distinct,
                }
                .capped()
            }
            Term::Join(a, b) => {
                let l = self.est(a, bound, cost)?;
                let r = self.est(b, bound, cost)?;
                let mut rows = l.rows * r.rows;
                let mut distinct = l.distinct.clone();
                for (c, d) in &r.distinct {
                    match l.distinct.get(c) {
                        Some(ld) => {
                            rows /= ld.max(*d).max(1.0);
                            distinct.insert(c.clone(), ld.min(*d));
                        }
                        None => {
                            distinct.insert(c.clone(), *d);
                        }
                    }
                }
                Estimate { rows, distinct }.capped()
            }
            Term::Antijoin(a, b) => {
                self.est(b, bound, cost)?;
                self.est(a, bound, cost)?
            }
            Term::Antiproject(c, inner) => {
                let mut e = self.est(inner, bound, cost)?;
                e.distinct.remove(c);
                e
            }
            Term::Fixpoint { var, .. } => {
                let d = decompose(t, &self.env_with(bound), None).map_err(|e| PlanError::Invalid(e.to_string()))?;
                let seed = match d.constant_part() {
                    Some(r) => self.est(&r, bound, cost)?,
                    None => Estimate {
                        rows: 0.0,
                        distinct: d.schema.iter().map(|c| (c.clone(), 0.0)).collect(),
                    },
                };
                let k = self.expansion_factor * self.depth_proxy;
                let fix = Estimate {
                    rows: k * seed.rows,
                    distinct: seed.distinct.iter().map(|(c, v)| (c.clone(), k * v)).collect(),
                }
                .capped();
                if let Some(phi) = d.variable_part() {
                    let mut inner = bound.clone();
                    inner.insert(var.clone(), fix.clone());
                    let mut body_cost = 0.0;
                    self.est(&phi, &inner, &mut body_cost)?;
                    *cost += body_cost * self.depth_proxy;
                }
                *cost += fix.rows;
                return Ok(fix);
            }
        };
        *cost += out.rows;
        Ok(out)
    }

    /// Cheapest candidate by [`cost`](Self::cost); ties go to the smaller
    /// term, then to the lexicographically smaller printed form.
    pub fn select_logical(&self, candidates: &[Term]) -> Term {
        self.select_index(candidates)
            .map(|i| candidates[i].clone())
            .expect("at least one candidate")
    }

    fn select_index(&self, candidates: &[Term]) -> Option<usize> {
        let keyed: Vec<(f64, usize, String, usize)> = candidates
            .iter()
            .enumerate()
            .map(|(i, t)| (self.cost(t).unwrap_or(f64::INFINITY), t.size(), t.to_string(), i))
            .collect();
        keyed
            .into_iter()
            .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then_with(|| a.2.cmp(&b.2)))
            .map(|k| k.3)
    }

    /// Rule-based physical choices for every fixpoint and join of `term`.
    pub fn plan_physical(&self, term: &Term, choice: StrategyChoice) -> PhysicalPlan {
        let rewriter = self.rewriter();
        let sites = rewriter.sites(term);
        let mut fixpoints = BTreeMap::new();
        let mut joins = BTreeMap::new();
        for (id, site) in sites.iter().enumerate() {
            match site.term {
                Term::Fixpoint { .. } => {
                    let strategy = self.fixpoint_strategy(site.term, &site.bound, choice);
                    fixpoints.insert(id, strategy);
                }
                Term::Join(a, b) => {
                    let recursive: Vec<bool> = [a, b]
                        .iter()
                        .map(|s| site.bound.keys().any(|v| crate::algebra::occurs_free(s, v)))
                        .collect();
                    let mode = match (recursive[0], recursive[1]) {
                        (true, false) => JoinMode::Broadcast(Side::Right),
                        (false, true) => JoinMode::Broadcast(Side::Left),
                        _ => {
                            let bound: BTreeMap<String, Estimate> = BTreeMap::new();
                            let ea = self.est(a, &bound, &mut 0.0).map(|e| e.rows).unwrap_or(f64::INFINITY);
                            let eb = self.est(b, &bound, &mut 0.0).map(|e| e.rows).unwrap_or(f64::INFINITY);
                            if ea.min(eb) < self.broadcast_threshold {
                                JoinMode::Broadcast(if ea <= eb { Side::Left } else { Side::Right })
                            } else {
                                JoinMode::Partitioned
                            }
                        }
                    };
                    joins.insert(id, mode);
                }
                _ => {}
            }
        }
        PhysicalPlan {
            term: term.clone(),
            fixpoints,
            joins,
        }
    }

    fn fixpoint_strategy(
        &self,
        fix: &Term,
        bound: &BTreeMap<String, Schema>,
        choice: StrategyChoice,
    ) -> FixpointStrategy {
        let mut env = self.schemas.clone();
        env.extend(bound.iter().map(|(k, v)| (k.clone(), v.clone())));
        let key = decompose(fix, &env, None).ok().and_then(|d| {
            let stable = stable_columns(&d).columns;
            let seed_est = d
                .constant_part()
                .and_then(|r| self.est(&r, &BTreeMap::new(), &mut 0.0).ok());
            // Highest distinct count balances partitions best.
            stable
                .into_iter()
                .map(|c| {
                    let d = seed_est.as_ref().map_or(0.0, |e| e.distinct_of(&c));
                    (d, c)
                })
                .max_by(|a, b| a.0.total_cmp(&b.0).then_with(|| b.1.cmp(&a.1)))
                .map(|(_, c)| vec![c])
        });
        match (choice, key) {
            (StrategyChoice::Gld, _) | (StrategyChoice::Auto, None) => FixpointStrategy::Gld,
            (_, Some(key)) => FixpointStrategy::Plw {
                key: Some(key),
                skip_final_distinct: true,
            },
            (StrategyChoice::Plw, None) => FixpointStrategy::Plw {
                key: None,
                skip_final_distinct: false,
            },
        }
    }

    /// Explores rewrites of `term`, picks the cheapest and plans it.
    pub fn optimize(&self, term: &Term, budget: usize, choice: StrategyChoice) -> Optimized {
        let explored: Vec<ExploredTerm> = self.rewriter().explore_traced(term, budget);
        let terms: Vec<Term> = explored.iter().map(|e| e.term.clone()).collect();
        let i = self.select_index(&terms).unwrap_or(0);
        let chosen = &explored[i];
        Optimized {
            input: term.to_string(),
            chosen: chosen.term.to_string(),
            estimate: self.estimate(&chosen.term).unwrap_or(f64::NAN),
            cost: self.cost(&chosen.term).unwrap_or(f64::NAN),
            candidates: explored.len(),
            trace: chosen.trace.clone(),
            plan: self.plan_physical(&chosen.term, choice),
        }
    }
}

/// Columns each stable-keyed fixpoint is partitioned on, for inspection.
pub fn plan_keys(plan: &PhysicalPlan) -> BTreeSet<Col> {
    plan.fixpoints
        .values()
        .filter_map(|s| match s {
            FixpointStrategy::Plw { key: Some(k), .. } => Some(k.clone()),
            _ => None,
        })
        .flatten()
        .collect()
}
