//! Operator-by-operator execution of a [`PhysicalPlan`] over partitions.

use std::collections::{BTreeMap, BTreeSet};

use super::fixpoint::{gld, plw};
use super::{
    partitionwise_union, repartition, ExecConfig, ExecError, ExecMetrics, PartitionedRelation, Partitioner, WorkerPool,
};
use crate::algebra::{occurs_free, schema_of, validate_fcond, Col, DecomposeError, Relation, Term, TermPath};
use crate::eval::{decompose_in, eval_unchecked, ops, EvalEnv};
use crate::planner::{FixpointStrategy, JoinMode, PhysicalPlan, Side};

pub fn execute(
    plan: &PhysicalPlan,
    db: &crate::algebra::Database,
    pool: &WorkerPool,
) -> Result<(Relation, ExecMetrics), ExecError> {
    execute_with(plan, db, pool, &ExecConfig::default())
}

/// Runs `plan` on `pool`. Base relations start out dealt round-robin over
/// the workers; every repartitioning and broadcast is counted.
pub fn execute_with(
    plan: &PhysicalPlan,
    db: &crate::algebra::Database,
    pool: &WorkerPool,
    config: &ExecConfig,
) -> Result<(Relation, ExecMetrics), ExecError> {
    let env = EvalEnv::new(db).with_config(config.eval.clone());
    schema_of(&plan.term, &env.schema_env(), &BTreeMap::new()).map_err(crate::eval::EvalError::from)?;
    let report = validate_fcond(&plan.term);
    if !report.ok {
        return Err(crate::eval::EvalError::from(DecomposeError::Fcond(report)).into());
    }
    let mut ex = Executor {
        plan,
        ids: plan.node_ids(),
        pool,
        env,
        verify: config.verify_disjoint,
        metrics: ExecMetrics::default(),
    };
    let out = ex.exec(&plan.term, &mut Vec::new())?;
    let mut metrics = ex.metrics;
    metrics.tuples_produced += ex.env.stats().tuples_produced;
    Ok((out.into_relation(), metrics))
}

struct Executor<'a> {
    plan: &'a PhysicalPlan,
    ids: BTreeMap<TermPath, usize>,
    pool: &'a WorkerPool,
    env: EvalEnv<'a>,
    verify: bool,
    metrics: ExecMetrics,
}

impl Executor<'_> {
    fn w(&self) -> usize {
        self.pool.workers()
    }

    fn child(&mut self, t: &Term, path: &mut TermPath, i: usize) -> Result<PartitionedRelation, ExecError> {
        path.push(i);
        let out = self.exec(t, path);
        path.pop();
        out
    }

    fn exec(&mut self, t: &Term, path: &mut TermPath) -> Result<PartitionedRelation, ExecError> {
        let out = match t {
            Term::Var(x) => {
                let rel = self
                    .env
                    .lookup(x)
                    .ok_or_else(|| crate::eval::EvalError::UnboundVariable(x.clone()))?;
                return PartitionedRelation::round_robin(rel, self.w());
            }
            Term::Rename { from, to, term } => return self.child(term, path, 0)?.renamed(from, to),
            Term::Const(..) => PartitionedRelation::single(eval_unchecked(t, &self.env)?, self.w()),
            Term::Filter(p, inner) => {
                let input = self.child(inner, path, 0)?;
                let parts = input.map_parts(self.pool, |_, part| Ok(ops::filter(p, part)))?;
                PartitionedRelation::from_parts(parts, input.partitioner().clone())?
            }
            Term::Antiproject(..) => {
                let mut drops = BTreeSet::new();
                let mut inner = t;
                let mut depth = 0;
                while let Term::Antiproject(c, next) = inner {
                    drops.insert(c.clone());
                    inner = next;
                    depth += 1;
                }
                path.extend(std::iter::repeat_n(0, depth));
                let out = match inner {
                    Term::Join(a, b) => self.join(a, b, &drops, path),
                    _ => self.exec(inner, path).and_then(|input| {
                        let parts = input.map_parts(self.pool, |_, part| {
                            Ok(drops.iter().fold(part.clone(), |rel, c| ops::antiproject(c, &rel)))
                        })?;
                        PartitionedRelation::from_parts(parts, input.partitioner().clone())
                    }),
                };
                path.truncate(path.len() - depth);
                self.settle(out?, &drops)?
            }
            Term::Join(a, b) => self.join(a, b, &BTreeSet::new(), path)?,
            Term::Antijoin(a, b) => {
                let left = self.child(a, path, 0)?;
                let right = self.child(b, path, 1)?.gather();
                self.metrics.broadcast(right.len(), self.w());
                let parts = left.map_parts(self.pool, |_, part| Ok(ops::antijoin(part, &right)))?;
                PartitionedRelation::from_parts(parts, left.partitioner().clone())?
            }
            Term::Union(a, b) => {
                let left = self.child(a, path, 0)?;
                let right = self.child(b, path, 1)?;
                self.union(left, right)?
            }
            Term::Fixpoint { var, body } => self.fixpoint(t, var, body, path)?,
        };
        self.metrics.tuples_produced += out.len() as u64;
        Ok(out)
    }

    /// Restores disjointness after columns were dropped, shuffling by full
    /// row unless the partitioning key survived.
    fn settle(&mut self, pr: PartitionedRelation, dropped: &BTreeSet<Col>) -> Result<PartitionedRelation, ExecError> {
        let keeps_key = match pr.partitioner() {
            Partitioner::HashOn(k) => !k.iter().any(|c| dropped.contains(c)),
            Partitioner::None => false,
        };
        if dropped.is_empty() || keeps_key {
            return Ok(pr);
        }
        let mut key: Vec<Col> = pr.columns().to_vec();
        key.sort();
        repartition(&pr, key, self.pool, &mut self.metrics)
    }

    fn hashed_on(&mut self, pr: PartitionedRelation, key: &[Col]) -> Result<PartitionedRelation, ExecError> {
        match pr.partitioner() {
            Partitioner::HashOn(k) if k == key => Ok(pr),
            _ => repartition(&pr, key.to_vec(), self.pool, &mut self.metrics),
        }
    }

    fn join(
        &mut self,
        a: &Term,
        b: &Term,
        drops: &BTreeSet<Col>,
        path: &mut TermPath,
    ) -> Result<PartitionedRelation, ExecError> {
        let id = self.ids[path.as_slice()];
        let left = self.child(a, path, 0)?;
        let right = self.child(b, path, 1)?;
        let shared: Vec<Col> = {
            let r = right.schema();
            let mut s: Vec<Col> = left.columns().iter().filter(|c| r.contains(*c)).cloned().collect();
            s.sort();
            s
        };
        let mode = match self.plan.joins.get(&id) {
            Some(JoinMode::Partitioned) if shared.is_empty() => JoinMode::Broadcast(Side::Right),
            Some(m) => *m,
            None => JoinMode::Broadcast(Side::Right),
        };
        match mode {
            JoinMode::Broadcast(side) => {
                let (kept, full) = match side {
                    Side::Right => (&left, right.gather()),
                    Side::Left => (&right, left.gather()),
                };
                self.metrics.broadcast(full.len(), self.w());
                let parts = kept.map_parts(self.pool, |_, part| {
                    Ok(match side {
                        Side::Right => ops::join_project(part, &full, drops),
                        Side::Left => ops::join_project(&full, part, drops),
                    })
                })?;
                Ok(PartitionedRelation::from_parts(parts, kept.partitioner().clone())?)
            }
            JoinMode::Partitioned => {
                let left = self.hashed_on(left, &shared)?;
                let right = self.hashed_on(right, &shared)?;
                let pairs: Vec<(&Relation, &Relation)> = left.parts().iter().zip(right.parts()).collect();
                let parts = self.pool.map(pairs, |_, (l, r)| ops::join_project(l, r, drops));
                Ok(PartitionedRelation::from_parts(parts, Partitioner::HashOn(shared))?)
            }
        }
    }

    fn union(&mut self, a: PartitionedRelation, b: PartitionedRelation) -> Result<PartitionedRelation, ExecError> {
        if a.partitioner() == b.partitioner() && *a.partitioner() != Partitioner::None {
            return partitionwise_union(&a, &b);
        }
        let mut key: Vec<Col> = a.columns().to_vec();
        key.sort();
        let a = self.hashed_on(a, &key)?;
        let b = self.hashed_on(b, &key)?;
        partitionwise_union(&a, &b)
    }

    fn fixpoint(
        &mut self,
        t: &Term,
        var: &str,
        body: &Term,
        path: &mut TermPath,
    ) -> Result<PartitionedRelation, ExecError> {
        let id = self.ids[path.as_slice()];
        let d = decompose_in(t, &self.env)?;
        let mut branches = Vec::new();
        path.push(0);
        collect_branches(body, path, &mut branches);
        path.pop();
        let constant: Vec<(TermPath, &Term)> = branches.into_iter().filter(|(_, b)| !occurs_free(b, var)).collect();
        let seed = if !constant.is_empty() && constant.iter().map(|(_, b)| *b).eq(d.constant.iter()) {
            let mut acc: Option<PartitionedRelation> = None;
            for (mut p, b) in constant {
                let part = self.exec(b, &mut p)?;
                acc = Some(match acc {
                    Some(prev) => self.union(prev, part)?,
                    None => part,
                });
            }
            acc.expect("nonempty")
        } else {
            let rel = match d.constant_part() {
                Some(r) => eval_unchecked(&r, &self.env)?,
                None => Relation::empty_with_schema(&d.schema),
            };
            PartitionedRelation::round_robin(&rel, self.w())?
        };
        let strategy = self.plan.fixpoints.get(&id).cloned().unwrap_or(FixpointStrategy::Gld);
        match strategy {
            FixpointStrategy::Gld => gld(&d, &seed, &self.env, self.pool, &mut self.metrics),
            FixpointStrategy::Plw { key, .. } => plw(
                &d,
                &seed,
                key.as_deref(),
                &self.env,
                self.pool,
                &mut self.metrics,
                self.verify,
            ),
        }
    }
}

fn collect_branches<'t>(t: &'t Term, path: &mut TermPath, out: &mut Vec<(TermPath, &'t Term)>) {
    if let Term::Union(a, b) = t {
        for (i, c) in [a, b].into_iter().enumerate() {
            path.push(i);
            collect_branches(c, path, out);
            path.pop();
        }
    } else {
        out.push((path.clone(), t));
    }
}
