//! Logical rewriting: stable columns, the fixpoint rules, classical
//! relational rules, and bounded exploration of equivalent terms.

mod rules;
pub mod shape;
mod stable;

use std::collections::{BTreeMap, HashSet, VecDeque};
use std::fmt;

use serde::Serialize;

use crate::algebra::{schema_of, validate_fcond, Schema, SchemaEnv, Term, TermPath};

pub use shape::{compose, match_closure, match_compose, Closure, Direction};
pub use stable::{stable_columns, StableColumnSet};

pub const DEFAULT_BUDGET: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Rule {
    PushFilter,
    PushJoin,
    PushAntiproject,
    MergeFixpoints,
    ReverseFixpoint,
    ClassicalRA,
}

impl Rule {
    pub const ALL: [Rule; 6] = [
        Rule::PushFilter,
        Rule::PushJoin,
        Rule::PushAntiproject,
        Rule::MergeFixpoints,
        Rule::ReverseFixpoint,
        Rule::ClassicalRA,
    ];
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// One applied rewrite: the rule, where it fired, and the subterm before and
/// after.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RewriteStep {
    pub rule: Rule,
    pub path: TermPath,
    pub before: String,
    pub after: String,
}

/// A term reached by exploration together with the rewrites leading to it
/// from the input.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExploredTerm {
    pub term: Term,
    pub trace: Vec<RewriteStep>,
}

/// A subterm position with the schemas of the recursion variables in scope.
pub(crate) struct Site<'t> {
    pub path: TermPath,
    pub term: &'t Term,
    pub bound: BTreeMap<String, Schema>,
}

/// Applies rewrite rules to terms over relations with known schemas.
#[derive(Debug, Clone, Default)]
pub struct Rewriter {
    schemas: SchemaEnv,
}

impl Rewriter {
    pub fn new(schemas: SchemaEnv) -> Self {
        Rewriter { schemas }
    }

    pub fn schemas(&self) -> &SchemaEnv {
        &self.schemas
    }

    /// Schema environment extended with in-scope recursion variables.
    pub(crate) fn env_with(&self, bound: &BTreeMap<String, Schema>) -> SchemaEnv {
        let mut env = self.schemas.clone();
        env.extend(bound.iter().map(|(k, v)| (k.clone(), v.clone())));
        env
    }

    pub(crate) fn schema_in(&self, t: &Term, bound: &BTreeMap<String, Schema>) -> Option<Schema> {
        schema_of(t, &self.schemas, bound).ok()
    }

    pub(crate) fn sites<'t>(&self, term: &'t Term) -> Vec<Site<'t>> {
        let mut out = Vec::new();
        self.collect_sites(term, &mut Vec::new(), &BTreeMap::new(), &mut out);
        out
    }

    fn collect_sites<'t>(
        &self,
        t: &'t Term,
        path: &mut TermPath,
        bound: &BTreeMap<String, Schema>,
        out: &mut Vec<Site<'t>>,
    ) {
        out.push(Site {
            path: path.clone(),
            term: t,
            bound: bound.clone(),
        });
        let mut inner = bound.clone();
        if let Term::Fixpoint { var, .. } = t {
            match self.schema_in(t, bound) {
                Some(s) => {
                    inner.insert(var.clone(), s);
                }
                None => {
                    inner.remove(var);
                }
            }
        }
        for (i, c) in t.children().into_iter().enumerate() {
            path.push(i);
            self.collect_sites(c, path, &inner, out);
            path.pop();
        }
    }

    /// Every single-step rewrite of `term` by `rule`, as whole terms paired
    /// with the step taken. Results that change the term's schema or break
    /// fixpoint well-formedness are discarded.
    pub fn apply(&self, rule: Rule, term: &Term) -> Vec<(Term, RewriteStep)> {
        let want = self.schema_in(term, &BTreeMap::new());
        let mut out = Vec::new();
        for site in self.sites(term) {
            for repl in self.apply_local(rule, &site) {
                if &repl == site.term {
                    continue;
                }
                let whole = term.replaced_at(&site.path, repl.clone());
                if self.schema_in(&whole, &BTreeMap::new()) != want || !validate_fcond(&whole).ok {
                    continue;
                }
                out.push((
                    whole,
                    RewriteStep {
                        rule,
                        path: site.path.clone(),
                        before: site.term.pretty(),
                        after: repl.pretty(),
                    },
                ));
            }
        }
        out
    }

    fn apply_local(&self, rule: Rule, site: &Site) -> Vec<Term> {
        match rule {
            Rule::PushFilter => self.push_filter_at(site.term, &site.bound),
            Rule::PushJoin => self.push_join_at(site.term, &site.bound),
            Rule::PushAntiproject => self.push_antiproject_at(site.term, &site.bound),
            Rule::MergeFixpoints => self.merge_at(site.term, &site.bound),
            Rule::ReverseFixpoint => self.reverse_at(site.term, &site.bound),
            Rule::ClassicalRA => self.classical_at(site.term, &site.bound),
        }
    }

    fn terms(&self, rule: Rule, term: &Term) -> Vec<Term> {
        self.apply(rule, term).into_iter().map(|(t, _)| t).collect()
    }

    /// `filter[f](mu(X = R U phi))` → `mu(X = filter[f](R) U phi)` when every
    /// column of `f` is stable.
    pub fn push_filter(&self, term: &Term) -> Vec<Term> {
        self.terms(Rule::PushFilter, term)
    }

    /// `B join mu(X = R U phi)` → `mu(X = (B join R) U phi)`.
    pub fn push_join(&self, term: &Term) -> Vec<Term> {
        self.terms(Rule::PushJoin, term)
    }

    /// `drop[a](mu(X = R U phi))` → `mu(X = drop[a](R) U phi)`.
    pub fn push_antiproject(&self, term: &Term) -> Vec<Term> {
        self.terms(Rule::PushAntiproject, term)
    }

    /// `A+ ∘ B+` → a single fixpoint seeded with `A ∘ B`.
    pub fn merge_fixpoints(&self, term: &Term) -> Vec<Term> {
        self.terms(Rule::MergeFixpoints, term)
    }

    /// Switches a closure-shaped fixpoint between appending and prepending.
    pub fn reverse_fixpoint(&self, term: &Term) -> Vec<Term> {
        self.terms(Rule::ReverseFixpoint, term)
    }

    pub fn classical(&self, term: &Term) -> Vec<Term> {
        self.terms(Rule::ClassicalRA, term)
    }

    /// Breadth-first closure of `term` under all rules, deduplicated and cut
    /// at `budget` terms. The input comes first.
    pub fn explore(&self, term: &Term, budget: usize) -> Vec<Term> {
        self.explore_traced(term, budget).into_iter().map(|e| e.term).collect()
    }

    pub fn explore_traced(&self, term: &Term, budget: usize) -> Vec<ExploredTerm> {
        let budget = budget.max(1);
        let mut seen: HashSet<Term> = HashSet::from([term.clone()]);
        let mut out = vec![ExploredTerm {
            term: term.clone(),
            trace: Vec::new(),
        }];
        let mut queue = VecDeque::from([0usize]);
        while let Some(i) = queue.pop_front() {
            if out.len() >= budget {
                break;
            }
            let current = out[i].clone();
            for rule in Rule::ALL {
                for (t, step) in self.apply(rule, &current.term) {
                    if out.len() >= budget {
                        break;
                    }
                    if seen.insert(t.clone()) {
                        let mut trace = current.trace.clone();
                        trace.push(step);
                        out.push(ExploredTerm { term: t, trace });
                        queue.push_back(out.len() - 1);
                    }
                }
            }
        }
        out
    }
}
