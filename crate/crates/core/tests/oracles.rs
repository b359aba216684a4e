mod common;

use std::collections::BTreeSet;

use mura_core::algebra::{Database, Value};
use mura_core::distexec::WorkerPool;
use mura_core::eval::{eval, EvalEnv};
use mura_core::graph::{from_triples, node, workloads};
use mura_core::ucrpq::{Atom, Node, PathExpr, UcrpqQuery};
use proptest::prelude::*;

use common::{bfs_closure, check_against_oracle, pairs_of, rows_in, Graph};

type Pairs = BTreeSet<(u64, u64)>;

fn edge_list(max_node: u64, max_len: usize) -> impl Strategy<Value = Vec<(u64, u64)>> {
    prop::collection::vec((1..=max_node, 1..=max_node), 0..max_len)
}

fn labelled(max_node: u64, max_len: usize) -> impl Strategy<Value = Vec<(u64, &'static str, u64)>> {
    prop::collection::vec(
        (1..=max_node, prop::sample::select(vec!["a", "b"]), 1..=max_node),
        0..max_len,
    )
}

fn db_of(edges: &[(u64, &str, u64)]) -> Database {
    from_triples(edges.iter().map(|&(s, l, d)| (node(s), Value::str(l), node(d))))
}

fn unlabelled_db(edges: &[(u64, u64)]) -> Database {
    from_triples(edges.iter().map(|&(s, d)| (node(s), Value::str("e"), node(d))))
}

fn values(pairs: &Pairs) -> BTreeSet<(Value, Value)> {
    pairs.iter().map(|&(a, b)| (node(a), node(b))).collect()
}

fn compose(r: &Pairs, s: &Pairs) -> Pairs {
    r.iter()
        .flat_map(|&(a, m)| s.iter().filter(move |&&(n, _)| n == m).map(move |&(_, b)| (a, b)))
        .collect()
}

fn with_label(edges: &[(u64, &str, u64)], l: &str) -> Pairs {
    edges.iter().filter(|e| e.1 == l).map(|&(s, _, d)| (s, d)).collect()
}

/// `a^n b^n` pairs by iterating the pair of powers `(a^n, b^n)` until it
/// repeats.
fn anbn_oracle(edges: &[(u64, &str, u64)]) -> Pairs {
    let (a, b) = (with_label(edges, "a"), with_label(edges, "b"));
    let (mut an, mut bn) = (a.clone(), b.clone());
    let mut seen = BTreeSet::new();
    let mut out = Pairs::new();
    while seen.insert((an.clone(), bn.clone())) {
        out.extend(compose(&an, &bn));
        an = compose(&an, &a);
        bn = compose(&bn, &b);
    }
    out
}

/// Pairs of nodes reached from one node by walks of the same length.
fn same_generation_oracle(edges: &[(u64, u64)]) -> Pairs {
    let e: Pairs = edges.iter().copied().collect();
    let mut walks = e.clone();
    let mut seen = BTreeSet::new();
    let mut out = Pairs::new();
    while seen.insert(walks.clone()) {
        for &(c, x) in &walks {
            out.extend(walks.iter().filter(|&&(d, _)| d == c).map(|&(_, y)| (x, y)));
        }
        walks = compose(&walks, &e);
    }
    out
}

fn path() -> impl Strategy<Value = PathExpr> {
    let leaf = prop_oneof![
        Just(PathExpr::label("a")),
        Just(PathExpr::label("b")),
        Just(PathExpr::inverse("a")),
        Just(PathExpr::inverse("b")),
    ];
    leaf.prop_recursive(3, 8, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(x, y)| PathExpr::concat(x, y)),
            (inner.clone(), inner.clone()).prop_map(|(x, y)| PathExpr::alt(x, y)),
            inner.prop_map(PathExpr::plus),
        ]
    })
}

fn query(p: PathExpr, from: Option<u64>) -> UcrpqQuery {
    let subject = match from {
        Some(c) => Node::Const(node(c)),
        None => Node::Var("x".into()),
    };
    let mut head = vec!["y".to_string()];
    if from.is_none() {
        head.insert(0, "x".into());
    }
    UcrpqQuery {
        head,
        atoms: vec![Atom {
            subject,
            path: p,
            object: Node::Var("y".into()),
        }],
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn transitive_closure_matches_bfs(edges in edge_list(12, 30)) {
        let db = unlabelled_db(&edges);
        let got = eval(&workloads::transitive_closure(), &EvalEnv::new(&db)).unwrap();
        let want: Vec<(Value, Value)> = edges.iter().map(|&(a, b)| (node(a), node(b))).collect();
        prop_assert_eq!(pairs_of(&got), bfs_closure(&want));
    }

    #[test]
    fn reach_matches_bfs(edges in edge_list(12, 30), from in 1u64..=12) {
        let db = unlabelled_db(&edges);
        let got = eval(&workloads::reach(node(from)), &EvalEnv::new(&db)).unwrap();
        let all: Vec<(Value, Value)> = edges.iter().map(|&(a, b)| (node(a), node(b))).collect();
        let want: BTreeSet<Vec<Value>> = bfs_closure(&all)
            .into_iter()
            .filter(|(s, _)| *s == node(from))
            .map(|(_, d)| vec![d])
            .collect();
        prop_assert_eq!(rows_in(&got, &[mura_core::algebra::col("dst")]), want);
    }

    #[test]
    fn anbn_matches_powers(edges in labelled(8, 24)) {
        let db = db_of(&edges);
        let got = eval(&workloads::anbn("a", "b"), &EvalEnv::new(&db)).unwrap();
        prop_assert_eq!(pairs_of(&got), values(&anbn_oracle(&edges)));
    }

    #[test]
    fn same_generation_matches_walks(edges in edge_list(10, 16)) {
        let db = unlabelled_db(&edges);
        let got = eval(&workloads::same_generation(), &EvalEnv::new(&db)).unwrap();
        prop_assert_eq!(pairs_of(&got), values(&same_generation_oracle(&edges)));
    }

    #[test]
    fn path_queries_match_the_automaton(edges in labelled(8, 20), p in path(), from in prop::option::of(1u64..=8)) {
        let db = db_of(&edges);
        let g = Graph::of(&db);
        let pools = [WorkerPool::new(1).unwrap(), WorkerPool::new(3).unwrap()];
        let q = query(p, from);
        if let Err(e) = check_against_oracle(&q, &db, &g, &pools) {
            prop_assert!(false, "{}", e);
        }
    }
}

#[test]
fn tree_closure_is_ancestor_relation() {
    let db = mura_core::graph::generate(&mura_core::graph::GenSpec::RandomTree { n: 300, seed: 9 }).unwrap();
    let edges: Vec<(Value, Value)> = common::triples(db.get(mura_core::graph::EDGES).unwrap())
        .into_iter()
        .map(|(s, _, d)| (s, d))
        .collect();
    let got = eval(&workloads::transitive_closure(), &EvalEnv::new(&db)).unwrap();
    assert_eq!(pairs_of(&got), bfs_closure(&edges));
}

#[test]
fn anbn_on_a_ladder() {
    // 1 -a-> 2 -a-> 3 -b-> 4 -b-> 5
    let edges = [(1, "a", 2), (2, "a", 3), (3, "b", 4), (4, "b", 5)];
    let got = pairs_of(&eval(&workloads::anbn("a", "b"), &EvalEnv::new(&db_of(&edges))).unwrap());
    assert_eq!(got, values(&[(2, 4), (1, 5)].into()));
}
