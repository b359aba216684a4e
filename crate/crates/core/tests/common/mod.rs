//! Independent oracles and shared helpers for the integration tests.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use mura_core::algebra::{col, Col, Database, Relation, Term, Value};
use mura_core::distexec::{execute, ExecMetrics, WorkerPool};
use mura_core::graph::{generate, GenSpec, EDGES};
use mura_core::planner::{Planner, StrategyChoice};
use mura_core::rewrite::Rule;
use mura_core::ucrpq::{translate, variable_column, Node, PathExpr, UcrpqQuery};

pub type Rows = BTreeSet<Vec<Value>>;

/// Adjacency view of the `edges` relation.
pub struct Graph {
    pub nodes: BTreeSet<Value>,
    out: HashMap<Value, Vec<(String, Value)>>,
    inc: HashMap<Value, Vec<(String, Value)>>,
}

impl Graph {
    pub fn of(db: &Database) -> Graph {
        let mut g = Graph {
            nodes: BTreeSet::new(),
            out: HashMap::new(),
            inc: HashMap::new(),
        };
        let Some(edges) = db.get(EDGES) else { return g };
        for (s, l, d) in triples(edges) {
            g.nodes.insert(s.clone());
            g.nodes.insert(d.clone());
            g.out.entry(s.clone()).or_default().push((l.clone(), d.clone()));
            g.inc.entry(d).or_default().push((l, s));
        }
        g
    }

    /// Labels in sorted order.
    pub fn labels(&self) -> Vec<String> {
        let set: BTreeSet<&String> = self.out.values().flatten().map(|(l, _)| l).collect();
        set.into_iter().cloned().collect()
    }
}

pub fn triples(edges: &Relation) -> Vec<(Value, String, Value)> {
    let (cols, rows) = edges.sorted_values();
    let at = |n: &str| cols.iter().position(|c| *c == col(n)).unwrap();
    let (s, l, d) = (at("src"), at("lbl"), at("dst"));
    rows.into_iter()
        .map(|r| (r[s].clone(), r[l].to_string(), r[d].clone()))
        .collect()
}

/// Pairs `(u, v)` with a non-empty directed path from `u` to `v`.
pub fn bfs_closure(pairs: &[(Value, Value)]) -> BTreeSet<(Value, Value)> {
    let mut adj: HashMap<&Value, Vec<&Value>> = HashMap::new();
    for (a, b) in pairs {
        adj.entry(a).or_default().push(b);
    }
    let mut out = BTreeSet::new();
    for start in adj.keys() {
        let mut seen: BTreeSet<&Value> = BTreeSet::new();
        let mut queue = VecDeque::from([*start]);
        while let Some(u) = queue.pop_front() {
            for v in adj.get(u).into_iter().flatten() {
                if seen.insert(v) {
                    queue.push_back(v);
                }
            }
        }
        out.extend(seen.into_iter().map(|v| ((*start).clone(), v.clone())));
    }
    out
}

/// Number of pairs in the transitive closure, by BFS from every node.
pub fn bfs_closure_count(n: usize, edges: &[(u64, u64)]) -> u64 {
    let mut adj = vec![Vec::new(); n + 1];
    for &(a, b) in edges {
        adj[a as usize].push(b as usize);
    }
    let mut seen = vec![usize::MAX; n + 1];
    let mut queue = VecDeque::new();
    let mut total = 0u64;
    for start in 1..=n {
        queue.push_back(start);
        while let Some(u) = queue.pop_front() {
            for &v in &adj[u] {
                if seen[v] != start {
                    seen[v] = start;
                    total += 1;
                    queue.push_back(v);
                }
            }
        }
    }
    total
}

#[derive(Clone)]
enum Sym {
    Fwd(String),
    Bwd(String),
}

/// Thompson automaton of a path expression.
struct Nfa {
    eps: Vec<Vec<usize>>,
    moves: Vec<Vec<(Sym, usize)>>,
    start: usize,
    accept: usize,
}

impl Nfa {
    fn new(p: &PathExpr) -> Nfa {
        let mut nfa = Nfa {
            eps: Vec::new(),
            moves: Vec::new(),
            start: 0,
            accept: 0,
        };
        let (s, e) = nfa.build(p);
        nfa.start = s;
        nfa.accept = e;
        nfa
    }

    fn state(&mut self) -> usize {
        self.eps.push(Vec::new());
        self.moves.push(Vec::new());
        self.eps.len() - 1
    }

    fn build(&mut self, p: &PathExpr) -> (usize, usize) {
        match p {
            PathExpr::Label(l) | PathExpr::Inverse(l) => {
                let (s, e) = (self.state(), self.state());
                let sym = match p {
                    PathExpr::Label(_) => Sym::Fwd(l.clone()),
                    _ => Sym::Bwd(l.clone()),
                };
                self.moves[s].push((sym, e));
                (s, e)
            }
            PathExpr::Concat(a, b) => {
                let (s1, e1) = self.build(a);
                let (s2, e2) = self.build(b);
                self.eps[e1].push(s2);
                (s1, e2)
            }
            PathExpr::Alt(a, b) => {
                let (s, e) = (self.state(), self.state());
                for x in [a, b] {
                    let (xs, xe) = self.build(x);
                    self.eps[s].push(xs);
                    self.eps[xe].push(e);
                }
                (s, e)
            }
            PathExpr::Plus(a) => {
                let (s, e) = (self.state(), self.state());
                let (xs, xe) = self.build(a);
                self.eps[s].push(xs);
                self.eps[xe].push(xs);
                self.eps[xe].push(e);
                (s, e)
            }
        }
    }

    /// Nodes reached from `from` along a word of the automaton, by BFS over
    /// the product of the graph and the automaton.
    fn reach(&self, g: &Graph, from: &Value) -> BTreeSet<Value> {
        let mut seen: BTreeSet<(Value, usize)> = BTreeSet::new();
        let mut queue = VecDeque::new();
        let mut out = BTreeSet::new();
        seen.insert((from.clone(), self.start));
        queue.push_back((from.clone(), self.start));
        while let Some((v, q)) = queue.pop_front() {
            if q == self.accept {
                out.insert(v.clone());
            }
            let mut next: Vec<(Value, usize)> = self.eps[q].iter().map(|&r| (v.clone(), r)).collect();
            for (sym, r) in &self.moves[q] {
                let (adj, want) = match sym {
                    Sym::Fwd(l) => (g.out.get(&v), l),
                    Sym::Bwd(l) => (g.inc.get(&v), l),
                };
                for (l, w) in adj.into_iter().flatten() {
                    if l == want {
                        next.push((w.clone(), *r));
                    }
                }
            }
            for n in next {
                if seen.insert(n.clone()) {
                    queue.push_back(n);
                }
            }
        }
        out
    }
}

/// Subject/object pairs of `path` in `g`.
pub fn rpq_pairs(g: &Graph, path: &PathExpr, from: Option<&Value>) -> BTreeSet<(Value, Value)> {
    let nfa = Nfa::new(path);
    let starts: Vec<&Value> = match from {
        Some(v) => vec![v],
        None => g.nodes.iter().collect(),
    };
    starts
        .into_iter()
        .flat_map(|s| nfa.reach(g, s).into_iter().map(move |o| (s.clone(), o)))
        .collect()
}

/// Answers of `q` over `g`: each atom by the product automaton, then a
/// backtracking join of the atoms.
pub fn ucrpq_oracle(g: &Graph, q: &UcrpqQuery) -> Rows {
    let atoms: Vec<AtomPairs> = q
        .atoms
        .iter()
        .map(|a| {
            let from = match &a.subject {
                Node::Const(c) => Some(c),
                Node::Var(_) => None,
            };
            let pairs = rpq_pairs(g, &a.path, from)
                .into_iter()
                .filter(|(_, o)| match &a.object {
                    Node::Const(c) => o == c,
                    Node::Var(_) => true,
                })
                .collect();
            (pairs, &a.subject, &a.object)
        })
        .collect();
    let mut out = Rows::new();
    let mut binding: BTreeMap<String, Value> = BTreeMap::new();
    join_atoms(&atoms, 0, &mut binding, &q.head, &mut out);
    out
}

type AtomPairs<'a> = (Vec<(Value, Value)>, &'a Node, &'a Node);

fn join_atoms(atoms: &[AtomPairs], i: usize, binding: &mut BTreeMap<String, Value>, head: &[String], out: &mut Rows) {
    if i == atoms.len() {
        out.insert(head.iter().map(|h| binding[h].clone()).collect());
        return;
    }
    let (pairs, s, o) = &atoms[i];
    for (a, b) in pairs {
        let mut added = Vec::new();
        let ok = [(s, a), (o, b)].into_iter().all(|(node, val)| match node {
            Node::Const(_) => true,
            Node::Var(v) => match binding.get(v) {
                Some(bound) => bound == val,
                None => {
                    binding.insert(v.clone(), val.clone());
                    added.push(v.clone());
                    true
                }
            },
        });
        if ok {
            join_atoms(atoms, i + 1, binding, head, out);
        }
        for v in added {
            binding.remove(&v);
        }
    }
}

/// Rows of `rel` with columns in the given order.
pub fn rows_in(rel: &Relation, order: &[Col]) -> Rows {
    let (cols, rows) = rel.sorted_values();
    let at: Vec<usize> = order
        .iter()
        .map(|c| cols.iter().position(|x| x == c).unwrap())
        .collect();
    rows.into_iter()
        .map(|r| at.iter().map(|&i| r[i].clone()).collect())
        .collect()
}

pub fn head_columns(q: &UcrpqQuery) -> Vec<Col> {
    q.head.iter().map(|v| variable_column(v)).collect()
}

/// Plans `q` for `db` and executes it.
pub fn engine(
    q: &UcrpqQuery,
    db: &Database,
    planner: &Planner,
    choice: StrategyChoice,
    pool: &WorkerPool,
) -> (Rows, ExecMetrics) {
    let term = translate(q, EDGES).unwrap();
    let plan = planner.optimize(&term, 32, choice).plan;
    let (rel, m) = execute(&plan, db, pool).unwrap_or_else(|e| panic!("{q}: {e}"));
    (rows_in(&rel, &head_columns(q)), m)
}

pub fn pairs_of(rel: &Relation) -> BTreeSet<(Value, Value)> {
    rows_in(rel, &[col("src"), col("dst")])
        .into_iter()
        .map(|r| (r[0].clone(), r[1].clone()))
        .collect()
}

/// Erdős–Rényi graph with `labels` edge labels.
pub fn labelled_er(n: u64, p: f64, labels: usize, seed: u64) -> Database {
    let base = Box::new(GenSpec::ErdosRenyi { n, p, seed });
    generate(&GenSpec::Labeled {
        base,
        labels,
        seed: seed.wrapping_add(1),
    })
    .unwrap()
}

/// `q` with its labels and constants mapped onto those of `g`.
pub fn rebound(q: &UcrpqQuery, g: &Graph) -> UcrpqQuery {
    let nodes: Vec<Value> = g.nodes.iter().cloned().collect();
    q.rebind(&g.labels(), &nodes)
}

/// Runs `q` under both strategies on every pool and compares each result
/// with the automaton oracle.
pub fn check_against_oracle(q: &UcrpqQuery, db: &Database, g: &Graph, pools: &[WorkerPool]) -> Result<(), String> {
    let want = ucrpq_oracle(g, q);
    let planner = Planner::for_database(db);
    let term = translate(q, EDGES).map_err(|e| format!("{q}: {e}"))?;
    let chosen = planner.optimize(&term, 16, StrategyChoice::Auto).plan.term;
    let head = head_columns(q);
    for choice in [StrategyChoice::Gld, StrategyChoice::Plw] {
        let plan = planner.plan_physical(&chosen, choice);
        for pool in pools {
            let (rel, _) = execute(&plan, db, pool).map_err(|e| format!("{q}: {e}"))?;
            let got = rows_in(&rel, &head);
            if got != want {
                return Err(format!(
                    "{q} under {choice:?} with W={}: {} rows, oracle {}",
                    pool.workers(),
                    got.len(),
                    want.len()
                ));
            }
        }
    }
    Ok(())
}

/// The rule's rewrites at every site of `term`.
pub fn rewrites(planner: &Planner, rule: Rule, term: &Term) -> Vec<Term> {
    planner
        .rewriter()
        .apply(rule, term)
        .into_iter()
        .map(|(t, _)| t)
        .collect()
}
