//! Reference and semi-naive evaluation of terms over a [`Database`].

pub mod ops;

use std::collections::{BTreeMap, BTreeSet};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::Instant;

use serde::Serialize;
use thiserror::Error;

use crate::algebra::{
    all_var_names, decompose, fresh_name, occurs_free, row_set_with_capacity, schema_of, validate_fcond, AlgebraError,
    Col, Database, Datum, DecomposeError, EmptySeedCheck, FixpointDecomposition, Relation, Row, RowSet, SchemaEnv,
    SchemaError, Term,
};

pub const DEFAULT_ITERATION_CAP: usize = 1_000_000;

#[derive(Debug, Clone)]
pub struct EvalConfig {
    /// Maximum number of semi-naive (or naive) steps per fixpoint.
    pub iteration_cap: usize,
    /// Abort once this instant has passed; checked between fixpoint steps.
    pub deadline: Option<Instant>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            iteration_cap: DEFAULT_ITERATION_CAP,
            deadline: None,
        }
    }
}

#[derive(Debug, Default)]
struct Counters {
    tuples_produced: AtomicU64,
    iterations: AtomicU64,
    fixpoints: AtomicU64,
}

/// Work counters accumulated by every evaluation sharing an environment.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct EvalStats {
    /// Sum of the output sizes of every materialized operator.
    pub tuples_produced: u64,
    /// Fixpoint steps over all fixpoints evaluated.
    pub iterations: u64,
    pub fixpoints: u64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error(transparent)]
    Schema(#[from] SchemaError),
    #[error(transparent)]
    Decompose(#[from] DecomposeError),
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
    #[error("unbound relation `{0}`")]
    UnboundVariable(String),
    #[error("fixpoint `{var}` did not converge within {cap} iterations")]
    IterationLimitExceeded { var: String, cap: usize },
    #[error("evaluation deadline exceeded")]
    DeadlineExceeded,
}

/// Database plus bindings for recursion variables and hoisted subresults.
#[derive(Debug, Clone)]
pub struct EvalEnv<'a> {
    db: &'a Database,
    bindings: BTreeMap<String, Relation>,
    config: EvalConfig,
    counters: Arc<Counters>,
}

impl<'a> EvalEnv<'a> {
    pub fn new(db: &'a Database) -> Self {
        EvalEnv {
            db,
            bindings: BTreeMap::new(),
            config: EvalConfig::default(),
            counters: Arc::default(),
        }
    }

    pub fn with_config(mut self, config: EvalConfig) -> Self {
        self.config = config;
        self
    }

    pub fn config(&self) -> &EvalConfig {
        &self.config
    }

    pub fn db(&self) -> &'a Database {
        self.db
    }

    /// Binds `name`, shadowing any database relation of the same name.
    pub fn bind(&mut self, name: impl Into<String>, rel: Relation) {
        self.bindings.insert(name.into(), rel);
    }

    pub fn with_binding(&self, name: impl Into<String>, rel: Relation) -> Self {
        let mut env = self.clone();
        env.bind(name, rel);
        env
    }

    pub fn lookup(&self, name: &str) -> Option<&Relation> {
        self.bindings.get(name).or_else(|| self.db.get(name))
    }

    /// Schemas of all database relations and bindings.
    pub fn schema_env(&self) -> SchemaEnv {
        let mut env = self.db.schemas();
        for (k, v) in &self.bindings {
            env.insert(k.clone(), v.schema());
        }
        env
    }

    fn names(&self) -> BTreeSet<String> {
        self.db
            .iter()
            .map(|(k, _)| k.to_string())
            .chain(self.bindings.keys().cloned())
            .collect()
    }

    pub fn stats(&self) -> EvalStats {
        EvalStats {
            tuples_produced: self.counters.tuples_produced.load(Ordering::Relaxed),
            iterations: self.counters.iterations.load(Ordering::Relaxed),
            fixpoints: self.counters.fixpoints.load(Ordering::Relaxed),
        }
    }

    /// Gives this environment fresh counters, detached from its clones.
    pub fn reset_stats(&mut self) {
        self.counters = Arc::default();
    }

    pub(crate) fn count_fixpoint(&self, iterations: usize) {
        self.counters.fixpoints.fetch_add(1, Ordering::Relaxed);
        self.counters.iterations.fetch_add(iterations as u64, Ordering::Relaxed);
    }

    pub(crate) fn count_tuples(&self, n: usize) {
        self.counters.tuples_produced.fetch_add(n as u64, Ordering::Relaxed);
    }

    pub(crate) fn check_deadline(&self) -> Result<(), EvalError> {
        match self.config.deadline {
            Some(d) if Instant::now() > d => Err(EvalError::DeadlineExceeded),
            _ => Ok(()),
        }
    }
}

/// Step-by-step record of one fixpoint evaluation.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct FixpointTrace {
    /// Number of steps, counting the seed step and the final step that finds
    /// nothing new.
    pub iterations: usize,
    /// `|X|` after each step.
    pub sizes: Vec<usize>,
    /// Number of new rows found at each step.
    pub deltas: Vec<usize>,
}

/// Evaluates `term`. The term is type-checked and every fixpoint in it is
/// checked for well-formedness first.
pub fn eval(term: &Term, env: &EvalEnv) -> Result<Relation, EvalError> {
    schema_of(term, &env.schema_env(), &BTreeMap::new())?;
    let report = validate_fcond(term);
    if !report.ok {
        return Err(DecomposeError::Fcond(report).into());
    }
    eval_unchecked(term, env)
}

/// Evaluation without the up-front checks of [`eval`].
pub(crate) fn eval_unchecked(term: &Term, env: &EvalEnv) -> Result<Relation, EvalError> {
    let out = match term {
        Term::Var(x) => {
            return env
                .lookup(x)
                .cloned()
                .ok_or_else(|| EvalError::UnboundVariable(x.clone()))
        }
        Term::Rename { from, to, term } => return Ok(eval_unchecked(term, env)?.renamed(from, to)?),
        Term::Const(c, v) => ops::constant(c, Datum::intern(v)),
        Term::Union(a, b) => eval_unchecked(a, env)?.union(&eval_unchecked(b, env)?)?,
        Term::Join(a, b) => ops::join(&eval_unchecked(a, env)?, &eval_unchecked(b, env)?),
        Term::Antijoin(a, b) => ops::antijoin(&eval_unchecked(a, env)?, &eval_unchecked(b, env)?),
        Term::Filter(p, t) => ops::filter(p, &eval_unchecked(t, env)?),
        Term::Antiproject(..) => {
            let mut drops = BTreeSet::new();
            let mut inner = term;
            while let Term::Antiproject(c, t) = inner {
                drops.insert(c.clone());
                inner = t;
            }
            if let Term::Join(a, b) = inner {
                ops::join_project(&eval_unchecked(a, env)?, &eval_unchecked(b, env)?, &drops)
            } else {
                let mut rel = eval_unchecked(inner, env)?;
                for c in &drops {
                    rel = ops::antiproject(c, &rel);
                }
                rel
            }
        }
        Term::Fixpoint { .. } => {
            let d = decompose_in(term, env)?;
            return eval_fixpoint_seminaive(&d, env);
        }
    };
    env.count_tuples(out.len());
    Ok(out)
}

/// Decomposes a fixpoint, checking `φ(∅) = ∅` against `env` (bindings
/// included) when the shape alone does not establish it.
pub fn decompose_in(fix: &Term, env: &EvalEnv) -> Result<FixpointDecomposition, EvalError> {
    let mut d = decompose(fix, &env.schema_env(), None)?;
    if d.empty_seed_check == EmptySeedCheck::Unverified {
        let probe = env.with_binding(d.var.clone(), Relation::empty_with_schema(&d.schema));
        for b in d.variable.iter().filter(|b| !crate::algebra::strict_in(b, &d.var)) {
            if !eval_unchecked(b, &probe)?.is_empty() {
                return Err(DecomposeError::NonEmptyOnEmpty(b.to_string()).into());
            }
        }
        d.empty_seed_check = EmptySeedCheck::Evaluated;
    }
    Ok(d)
}

/// Replaces every maximal subterm of `phi` that does not mention `var` (other
/// than plain names) by a fresh name bound to its value, so the iteration
/// does not recompute it.
pub(crate) fn hoist_invariants<'a>(phi: &Term, var: &str, env: &EvalEnv<'a>) -> Result<(Term, EvalEnv<'a>), EvalError> {
    let mut taken = env.names();
    taken.extend(all_var_names(phi));
    taken.insert(var.to_string());
    let mut out_env = env.clone();
    let term = hoist_rec(phi, var, env, &mut out_env, &mut taken)?;
    Ok((term, out_env))
}

/// `drop[..](a join b)` (or a bare join) at the top of a body, split into
/// operands and dropped columns.
fn join_shape(t: &Term) -> Option<(&Term, &Term, BTreeSet<Col>)> {
    let mut drops = BTreeSet::new();
    let mut cur = t;
    while let Term::Antiproject(c, inner) = cur {
        drops.insert(c.clone());
        cur = inner;
    }
    match cur {
        Term::Join(a, b) => Some((a, b, drops)),
        _ => None,
    }
}

fn hoist_rec(
    t: &Term,
    var: &str,
    env: &EvalEnv,
    out_env: &mut EvalEnv,
    taken: &mut BTreeSet<String>,
) -> Result<Term, EvalError> {
    if !occurs_free(t, var) {
        if matches!(t, Term::Var(_) | Term::Const(..)) {
            return Ok(t.clone());
        }
        let rel = eval_unchecked(t, env)?;
        let name = fresh_name("hoisted", taken);
        taken.insert(name.clone());
        out_env.bind(name.clone(), rel);
        return Ok(Term::Var(name));
    }
    let mut out = t.clone();
    let children: Vec<Term> = t
        .children()
        .into_iter()
        .map(|c| hoist_rec(c, var, env, out_env, taken))
        .collect::<Result<_, _>>()?;
    for (slot, c) in out.children_mut().into_iter().zip(children) {
        *slot = c;
    }
    Ok(out)
}

/// Feeds every row of `phi` under `env` to `sink` in `layout` order, possibly
/// with repeats. A top-level join is streamed without materializing it.
pub(crate) fn step_rows(phi: &Term, env: &EvalEnv, layout: &[Col], mut sink: impl FnMut(Row)) -> Result<(), EvalError> {
    if let Some((a, b, drops)) = join_shape(phi) {
        let (l, r) = (eval_unchecked(a, env)?, eval_unchecked(b, env)?);
        let mut produced = 0usize;
        let streamed = ops::join_project_each(&l, &r, &drops, layout, |row| {
            produced += 1;
            sink(row);
        });
        if streamed.is_some() {
            env.count_tuples(produced);
            return Ok(());
        }
    }
    for row in eval_unchecked(phi, env)?.aligned_to(layout)?.into_owned().into_rows() {
        sink(row);
    }
    Ok(())
}

pub fn eval_fixpoint_seminaive(d: &FixpointDecomposition, env: &EvalEnv) -> Result<Relation, EvalError> {
    Ok(eval_fixpoint_seminaive_traced(d, env)?.0)
}

fn seed(d: &FixpointDecomposition, env: &EvalEnv) -> Result<Relation, EvalError> {
    Ok(match d.constant_part() {
        Some(r) => eval_unchecked(&r, env)?,
        None => Relation::empty_with_schema(&d.schema),
    })
}

/// Semi-naive evaluation starting from an already evaluated seed.
pub(crate) fn seminaive_from(
    d: &FixpointDecomposition,
    seed: Relation,
    env: &EvalEnv,
) -> Result<(Relation, FixpointTrace), EvalError> {
    let layout: Arc<[Col]> = seed.columns_arc().clone();
    let mut x: RowSet = seed.into_rows();
    let mut delta = Relation::from_set(layout.clone(), x.clone());
    let mut trace = FixpointTrace {
        iterations: 1,
        sizes: vec![x.len()],
        deltas: vec![x.len()],
    };
    env.counters.fixpoints.fetch_add(1, Ordering::Relaxed);
    let Some(phi) = d.variable_part() else {
        env.counters.iterations.fetch_add(1, Ordering::Relaxed);
        return Ok((Relation::from_set(layout, x), trace));
    };
    let (phi, loop_env) = hoist_invariants(&phi, &d.var, env)?;
    if layout.len() <= 2 {
        return seminaive_packed(d, &phi, &loop_env, layout, x, trace);
    }
    while !delta.is_empty() {
        if trace.iterations >= env.config.iteration_cap {
            return Err(EvalError::IterationLimitExceeded {
                var: d.var.clone(),
                cap: env.config.iteration_cap,
            });
        }
        env.check_deadline()?;
        let step_env = loop_env.with_binding(d.var.clone(), delta);
        let mut new = RowSet::default();
        step_rows(&phi, &step_env, &layout, |row| {
            if x.insert(row.clone()) {
                new.insert(row);
            }
        })?;
        drop(step_env);
        trace.iterations += 1;
        trace.sizes.push(x.len());
        trace.deltas.push(new.len());
        delta = Relation::from_set(layout.clone(), new);
    }
    env.counters
        .iterations
        .fetch_add(trace.iterations as u64, Ordering::Relaxed);
    Ok((Relation::from_set(layout, x), trace))
}

fn pack(row: &Row) -> u64 {
    row.iter().fold(0, |acc, d| acc << 32 | u64::from(d.id()))
}

fn unpack(key: u64, arity: usize) -> Row {
    (0..arity)
        .rev()
        .map(|i| Datum::from_id((key >> (32 * i)) as u32))
        .collect()
}

fn unpacked(keys: &[u64], arity: usize) -> RowSet {
    let mut rows = row_set_with_capacity(keys.len());
    rows.extend(keys.iter().map(|&k| unpack(k, arity)));
    rows
}

/// Semi-naive loop for relations of at most two columns. Rows are packed into
/// words and `X` is kept as a sorted vector, so each step is a sort of the
/// candidates and two linear merges.
fn seminaive_packed(
    d: &FixpointDecomposition,
    phi: &Term,
    loop_env: &EvalEnv,
    layout: Arc<[Col]>,
    seed: RowSet,
    mut trace: FixpointTrace,
) -> Result<(Relation, FixpointTrace), EvalError> {
    let arity = layout.len();
    let mut x: Vec<u64> = seed.iter().map(pack).collect();
    x.sort_unstable();
    let mut delta = Relation::from_set(layout.clone(), seed);
    let mut cand: Vec<u64> = Vec::new();
    while !delta.is_empty() {
        if trace.iterations >= loop_env.config.iteration_cap {
            return Err(EvalError::IterationLimitExceeded {
                var: d.var.clone(),
                cap: loop_env.config.iteration_cap,
            });
        }
        loop_env.check_deadline()?;
        let step_env = loop_env.with_binding(d.var.clone(), delta);
        cand.clear();
        step_rows(phi, &step_env, &layout, |row| cand.push(pack(&row)))?;
        drop(step_env);
        cand.sort_unstable();
        cand.dedup();
        let new = difference(&cand, &x);
        x = merge(&x, &new);
        trace.iterations += 1;
        trace.sizes.push(x.len());
        trace.deltas.push(new.len());
        delta = Relation::from_set(layout.clone(), unpacked(&new, arity));
    }
    loop_env
        .counters
        .iterations
        .fetch_add(trace.iterations as u64, Ordering::Relaxed);
    Ok((Relation::from_set(layout, unpacked(&x, arity)), trace))
}

/// Elements of sorted `a` absent from sorted `b`.
fn difference(a: &[u64], b: &[u64]) -> Vec<u64> {
    let mut out = Vec::new();
    let mut j = 0;
    for &v in a {
        while j < b.len() && b[j] < v {
            j += 1;
        }
        if j == b.len() || b[j] != v {
            out.push(v);
        }
    }
    out
}

fn merge(a: &[u64], b: &[u64]) -> Vec<u64> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        if a[i] < b[j] {
            out.push(a[i]);
            i += 1;
        } else {
            out.push(b[j]);
            j += 1;
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    out
}

/// Semi-naive evaluation: `X := R; new := R; while new != ∅ { new := φ(new) \ X; X := X ∪ new }`.
pub fn eval_fixpoint_seminaive_traced(
    d: &FixpointDecomposition,
    env: &EvalEnv,
) -> Result<(Relation, FixpointTrace), EvalError> {
    let r = seed(d, env)?;
    seminaive_from(d, r, env)
}

/// Naive iteration `X_{i+1} := R ∪ φ(X_i)` from `X_0 = ∅` until stable.
pub fn eval_fixpoint_naive(d: &FixpointDecomposition, env: &EvalEnv) -> Result<Relation, EvalError> {
    let r = seed(d, env)?;
    let Some(phi) = d.variable_part() else {
        return Ok(r);
    };
    let (phi, loop_env) = hoist_invariants(&phi, &d.var, env)?;
    let mut x = Relation::empty_with_schema(&d.schema);
    let mut steps = 0;
    loop {
        if steps >= env.config.iteration_cap {
            return Err(EvalError::IterationLimitExceeded {
                var: d.var.clone(),
                cap: env.config.iteration_cap,
            });
        }
        env.check_deadline()?;
        let step_env = loop_env.with_binding(d.var.clone(), x.clone());
        let next = r.union(&eval_unchecked(&phi, &step_env)?)?;
        steps += 1;
        if next == x {
            return Ok(x);
        }
        x = next;
    }
}
