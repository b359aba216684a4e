//! Acceptance run: one line per criterion with its outcome and timing.
//! Exits with a failure status if any criterion fails.

mod common;

use std::collections::BTreeSet;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use mura_core::algebra::{col, parse_term, schema_of, Col, Database, Predicate, Relation, Term, Value};
use mura_core::distexec::{execute, run_gld, run_plw, WorkerPool};
use mura_core::eval::{decompose_in, eval, eval_fixpoint_seminaive_traced, EvalEnv};
use mura_core::graph::{from_triples, generate, node, workloads, GenSpec, EDGES};
use mura_core::planner::{Planner, StrategyChoice};
use mura_core::rewrite::Rule;
use mura_core::sample;
use mura_core::ucrpq::{classify, corpus, parse_query, translate, QueryClass, UcrpqQuery};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{bfs_closure, bfs_closure_count, check_against_oracle, labelled_er, pairs_of, rebound, rewrites, Graph};

type Outcome = Result<String, String>;
type Criterion = (&'static str, Duration, fn() -> Outcome);

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn pools(sizes: &[usize]) -> Vec<WorkerPool> {
    sizes.iter().map(|&w| WorkerPool::new(w).unwrap()).collect()
}

fn example_fixture() -> Outcome {
    let db = sample::database();
    let env = EvalEnv::new(&db);
    let d = decompose_in(&sample::fixpoint_term(), &env).map_err(|e| e.to_string())?;
    let (rel, trace) = eval_fixpoint_seminaive_traced(&d, &env).map_err(|e| e.to_string())?;
    let seeds: Vec<(Value, Value)> = sample::SEEDS.iter().map(|&(a, b)| (a.into(), b.into())).collect();
    let edges: Vec<(Value, Value)> = sample::EDGES.iter().map(|&(a, b)| (a.into(), b.into())).collect();
    let oracle: BTreeSet<(Value, Value)> = bfs_closure(&edges)
        .into_iter()
        .filter(|(s, _)| seeds.iter().any(|(a, _)| a == s))
        .collect();
    let got = pairs_of(&rel);
    ensure(got == oracle, || {
        format!("{} tuples, reachability gives {}", got.len(), oracle.len())
    })?;
    ensure(rel == sample::closure(), || "differs from the listed ten pairs".into())?;
    ensure(got.len() == 10, || format!("{} tuples", got.len()))?;
    ensure(trace.iterations == 4, || format!("{} iterations", trace.iterations))?;
    ensure(trace.deltas.last() == Some(&0), || format!("deltas {:?}", trace.deltas))?;
    let sizes = &trace.sizes;
    ensure(sizes[sizes.len() - 1] == sizes[sizes.len() - 2], || {
        format!("sizes {sizes:?}")
    })?;
    Ok(format!("10 tuples, sizes {sizes:?}, 4 iterations"))
}

fn corpus_queries() -> Vec<UcrpqQuery> {
    corpus::CLASS_EXEMPLARS
        .iter()
        .chain(corpus::all())
        .map(|c| parse_query(c.text).unwrap())
        .collect()
}

/// Graph `i` of the oracle sweep: both densities alternate, with sizes and
/// label counts varying across the run.
fn sweep_graph(i: u64) -> Database {
    let (p, n) = if i.is_multiple_of(2) {
        (0.01, 60 + (i * 37) % 141)
    } else {
        (0.05, 20 + (i * 53) % 51)
    };
    labelled_er(n, p, 2 + (i as usize / 2) % 9, 1000 + i)
}

fn oracle_equivalence() -> Outcome {
    let qs = corpus_queries();
    let pools = pools(&[1, 2, 4, 8]);
    let mut runs = 0;
    for i in 0..200 {
        let db = sweep_graph(i);
        let g = Graph::of(&db);
        for q in &qs {
            check_against_oracle(&rebound(q, &g), &db, &g, &pools).map_err(|e| format!("graph {i}: {e}"))?;
            runs += 8;
        }
    }
    Ok(format!("200 graphs x {} queries, {runs} runs agree", qs.len()))
}

/// Candidate sites for the rules: the explored rewrites of a query plus
/// filters and column drops wrapped around each closed fixpoint in them.
fn candidate_terms(planner: &Planner, term: &Term, node_value: &Value) -> Vec<Term> {
    let schemas = planner.synopsis().schemas();
    let mut out = planner.rewriter().explore(term, 8);
    let mut extra = Vec::new();
    for t in &out {
        for (_, sub) in t.positions() {
            if !sub.is_fixpoint() || !mura_core::algebra::free_vars(sub).is_empty() {
                continue;
            }
            let Ok(schema) = schema_of(sub, &schemas, &Default::default()) else {
                continue;
            };
            for c in &schema {
                extra.push(Term::drop(c.clone(), sub.clone()));
                extra.push(Term::filter(
                    Predicate::eq_lit(c.clone(), node_value.clone()),
                    sub.clone(),
                ));
            }
        }
    }
    out.extend(extra);
    out
}

const REWRITE_RULES: [Rule; 5] = [
    Rule::PushFilter,
    Rule::PushJoin,
    Rule::PushAntiproject,
    Rule::MergeFixpoints,
    Rule::ReverseFixpoint,
];

fn rewrite_safety() -> Outcome {
    let qs = corpus_queries();
    let mut counts = Vec::new();
    for (r, rule) in REWRITE_RULES.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(7 + r as u64);
        let mut trials = 0;
        let mut attempts = 0;
        while trials < 100 {
            attempts += 1;
            ensure(attempts < 5_000, || {
                format!("{rule:?}: only {trials} applicable trials")
            })?;
            let db = labelled_er(rng.gen_range(15..60), 0.08, rng.gen_range(1..4), rng.gen());
            let g = Graph::of(&db);
            let Some(v) = g.nodes.iter().nth(rng.gen_range(0..g.nodes.len().max(1))).cloned() else {
                continue;
            };
            let q = rebound(qs.choose(&mut rng).unwrap(), &g);
            let planner = Planner::for_database(&db);
            let term = translate(&q, EDGES).map_err(|e| e.to_string())?;
            let sites: Vec<(Term, Term)> = candidate_terms(&planner, &term, &v)
                .into_iter()
                .flat_map(|t| rewrites(&planner, *rule, &t).into_iter().map(move |a| (t.clone(), a)))
                .collect();
            let Some((before, after)) = sites.choose(&mut rng) else {
                continue;
            };
            let env = EvalEnv::new(&db);
            let a = eval(before, &env).map_err(|e| format!("{before}: {e}"))?;
            let b = eval(after, &env).map_err(|e| format!("{after}: {e}"))?;
            ensure(a == b, || {
                format!("{rule:?} changed the result of {before}\ninto {after}")
            })?;
            trials += 1;
        }
        counts.push(format!("{rule:?} {trials}"));
    }
    Ok(counts.join(", "))
}

fn pair_relation(pairs: &[(u64, u64)]) -> Relation {
    Relation::from_values(&["src", "dst"], pairs.iter().map(|&(a, b)| [node(a), node(b)])).unwrap()
}

fn distributivity() -> Outcome {
    let pool = WorkerPool::new(4).unwrap();
    let mut keyed = 0;
    for seed in 0..50u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spec = GenSpec::ErdosRenyi {
            n: rng.gen_range(20..80),
            p: 0.05,
            seed,
        };
        let edges: Vec<(u64, u64)> = spec.edges().into_iter().map(|(a, _, b)| (a, b)).collect();
        let (mut r1, mut r2, mut e) = (Vec::new(), Vec::new(), Vec::new());
        for &pair in &edges {
            match rng.gen_range(0..4) {
                0 => r1.push(pair),
                1 => r2.push(pair),
                _ => e.push(pair),
            }
        }
        let db = Database::new()
            .with("R1", pair_relation(&r1))
            .with("R2", pair_relation(&r2))
            .with("E", pair_relation(&e));
        let (phi, key) = if seed % 2 == 0 {
            ("drop[m](rename[dst->m](X) join rename[src->m](E))", "src")
        } else {
            ("drop[m](rename[src->m](X) join rename[dst->m](E))", "dst")
        };
        let fix = |seeds: &str| parse_term(&format!("mu(X = {seeds} U {phi})")).unwrap();
        let env = EvalEnv::new(&db);
        let whole = eval(&fix("R1 U R2"), &env).map_err(|e| e.to_string())?;
        let one = eval(&fix("R1"), &env).map_err(|e| e.to_string())?;
        let two = eval(&fix("R2"), &env).map_err(|e| e.to_string())?;
        let split = one.union(&two).map_err(|e| e.to_string())?;
        ensure(whole == split, || {
            format!("seed {seed}: {} rows vs {}", whole.len(), split.len())
        })?;

        let d = decompose_in(&fix("R1 U R2"), &env).map_err(|e| e.to_string())?;
        let stable = mura_core::rewrite::stable_columns(&d);
        ensure(stable.contains(&col(key)), || format!("seed {seed}: {key} not stable"))?;
        let key_set: BTreeSet<Col> = [col(key)].into();
        let (rel, m) = run_plw(&d, &env, &pool, Some(&key_set)).map_err(|e| e.to_string())?;
        ensure(rel == whole, || format!("seed {seed}: partitioned result differs"))?;
        let per_worker: usize = m.fixpoints[0].worker_rows.iter().sum();
        ensure(per_worker == rel.len(), || {
            format!(
                "seed {seed}: worker results overlap ({per_worker} rows for {})",
                rel.len()
            )
        })?;
        keyed += 1;
    }
    Ok(format!("50 decompositions, {keyed} keyed runs disjoint"))
}

fn communication() -> Outcome {
    let db = sample::database();
    let env = EvalEnv::new(&db);
    let pool = WorkerPool::new(4).unwrap();
    let d = decompose_in(&sample::fixpoint_term(), &env).map_err(|e| e.to_string())?;
    let (g_rel, g) = run_gld(&d, &env, &pool).map_err(|e| e.to_string())?;
    ensure(g.shuffle_events >= g.iterations, || {
        format!("gld: {} shuffles for {} iterations", g.shuffle_events, g.iterations)
    })?;
    let key: BTreeSet<Col> = [col("src")].into();
    let (p_rel, p) = run_plw(&d, &env, &pool, Some(&key)).map_err(|e| e.to_string())?;
    ensure(p.shuffle_events == 1, || format!("plw: {} shuffles", p.shuffle_events))?;
    ensure(!p.fixpoints[0].final_distinct, || "plw ran a final distinct".into())?;
    let (_, q) = run_plw(&d, &env, &pool, None).map_err(|e| e.to_string())?;
    ensure(q.fixpoints[0].final_distinct, || {
        "unkeyed plw skipped the final distinct".into()
    })?;
    ensure(g_rel == p_rel && p_rel == sample::closure(), || {
        "strategies disagree".into()
    })?;
    Ok(format!(
        "gld {} shuffles / {} iterations; keyed plw {} shuffle, no final distinct",
        g.shuffle_events, g.iterations, p.shuffle_events
    ))
}

fn tuples_for(
    plan_term: &Term,
    planner: &Planner,
    db: &Database,
    pool: &WorkerPool,
) -> Result<(u64, Relation), String> {
    let plan = planner.plan_physical(plan_term, StrategyChoice::Auto);
    let (rel, m) = execute(&plan, db, pool).map_err(|e| e.to_string())?;
    Ok((m.tuples_produced, rel))
}

fn optimization_effect() -> Outcome {
    let pool = WorkerPool::new(4).unwrap();
    let spec = GenSpec::ErdosRenyi {
        n: 2000,
        p: 0.001,
        seed: 5,
    };
    let db = generate(&spec).unwrap();
    let edges: Vec<(u64, u64)> = spec.edges().into_iter().map(|(a, _, b)| (a, b)).collect();
    let closure = bfs_closure_count(2000, &edges);
    let planner = Planner::for_database(&db);
    let q = parse_query("?x <- ?x e+ 7").unwrap();
    let plain = translate(&q, EDGES).map_err(|e| e.to_string())?;
    let reversed = rewrites(&planner, Rule::ReverseFixpoint, &plain);
    let pushed = reversed
        .iter()
        .flat_map(|t| rewrites(&planner, Rule::PushFilter, t))
        .next()
        .ok_or("filter could not be pushed")?;
    let (unpushed_tuples, a) = tuples_for(&plain, &planner, &db, &pool)?;
    let (pushed_tuples, b) = tuples_for(&pushed, &planner, &db, &pool)?;
    ensure(a == b, || "pushed plan changed the answer".into())?;
    ensure(unpushed_tuples >= closure, || {
        format!("unpushed plan produced {unpushed_tuples}, below the closure size {closure}")
    })?;
    ensure(pushed_tuples < closure, || {
        format!("pushed plan produced {pushed_tuples}, closure size {closure}")
    })?;

    let layers = [("a", 0.00003, 11), ("b", 0.0012, 12)];
    let layer_edges: Vec<Vec<(u64, u64)>> = layers
        .iter()
        .map(|&(_, p, seed)| {
            let spec = GenSpec::ErdosRenyi { n: 2000, p, seed };
            spec.edges().into_iter().map(|(s, _, d)| (s, d)).collect()
        })
        .collect();
    let db6 = from_triples(
        layers
            .iter()
            .zip(&layer_edges)
            .flat_map(|((l, _, _), es)| es.iter().map(move |&(s, d)| (node(s), Value::str(l), node(d)))),
    );
    let planner6 = Planner::for_database(&db6);
    let q6 = parse_query("?x,?y <- ?x a+/b+ ?y").unwrap();
    let naive = translate(&q6, EDGES).map_err(|e| e.to_string())?;
    let merged = rewrites(&planner6, Rule::MergeFixpoints, &naive)
        .into_iter()
        .next()
        .ok_or("closures could not be merged")?;
    let (naive_tuples, c) = tuples_for(&naive, &planner6, &db6, &pool)?;
    let (merged_tuples, d) = tuples_for(&merged, &planner6, &db6, &pool)?;
    ensure(c == d, || "merged plan changed the answer".into())?;
    let closures: u64 = layer_edges.iter().map(|es| bfs_closure_count(2000, es)).sum();
    ensure(naive_tuples >= closures, || {
        format!("join of closures produced {naive_tuples}, below both closures {closures}")
    })?;
    ensure(merged_tuples < naive_tuples, || {
        format!("merged {merged_tuples} vs join of closures {naive_tuples}")
    })?;
    Ok(format!(
        "C2 pushed {pushed_tuples} < closure {closure} <= unpushed {unpushed_tuples}; \
         C6 merged {merged_tuples} < join {naive_tuples} (closures {closures})"
    ))
}

fn classification() -> Outcome {
    let mut n = 0;
    for c in corpus::all().chain(corpus::CLASS_EXEMPLARS.iter()) {
        let got = classify(&parse_query(c.text).map_err(|e| format!("{}: {e}", c.id))?);
        let want = QueryClass::of(c.classes);
        ensure(got == want, || format!("{}: {got} instead of {want}", c.id))?;
        n += 1;
    }
    Ok(format!("{n} queries match"))
}

fn generators() -> Outcome {
    for n in [1u64, 2, 10, 100, 1000] {
        for seed in 0..10 {
            let edges = GenSpec::RandomTree { n, seed }.edges();
            ensure(edges.len() as u64 == n - 1, || {
                format!("tree n={n} has {} edges", edges.len())
            })?;
            let mut parents = vec![0usize; n as usize + 1];
            for &(p, _, c) in &edges {
                ensure(p < c, || format!("edge {p}->{c} points backwards"))?;
                parents[c as usize] += 1;
            }
            ensure(parents.iter().skip(2).all(|&k| k == 1), || {
                "a node lacks a unique parent".into()
            })?;
        }
    }
    let (n, p) = (300u64, 0.02);
    let trials = (n * (n - 1)) as f64;
    let mean = trials * p;
    let sd = (trials * p * (1.0 - p)).sqrt();
    let mut worst: f64 = 0.0;
    for seed in 0..30 {
        let m = GenSpec::ErdosRenyi { n, p, seed }.edges().len() as f64;
        let z = (m - mean) / sd;
        worst = worst.max(z.abs());
        ensure(z.abs() <= 3.0, || format!("seed {seed}: {m} edges, z = {z:.2}"))?;
    }
    Ok(format!("trees exact; ER worst |z| = {worst:.2} over 30 seeds"))
}

/// Closure size of the pinned graph, from BFS over every node.
const PINNED_CLOSURE: u64 = 24_656_178;

fn scalability() -> Outcome {
    let spec = GenSpec::ErdosRenyi {
        n: 5000,
        p: 0.001,
        seed: 42,
    };
    let db = generate(&spec).unwrap();
    let planner = Planner::for_database(&db);
    let plan = planner
        .optimize(&workloads::transitive_closure(), 32, StrategyChoice::Plw)
        .plan;
    let pool = WorkerPool::new(8).unwrap();
    let start = Instant::now();
    let (rel, m) = execute(&plan, &db, &pool).map_err(|e| e.to_string())?;
    let took = start.elapsed();
    ensure(rel.len() as u64 == PINNED_CLOSURE, || {
        format!("{} pairs, pinned {PINNED_CLOSURE}", rel.len())
    })?;
    ensure(took < Duration::from_secs(60), || format!("took {took:.1?}"))?;
    Ok(format!(
        "{} pairs in {took:.1?}, {} iterations, {} shuffles",
        rel.len(),
        m.iterations,
        m.shuffle_events
    ))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("example fixture", Duration::from_secs(1), example_fixture),
        ("oracle equivalence", Duration::from_secs(300), oracle_equivalence),
        ("rewrite safety", Duration::from_secs(120), rewrite_safety),
        (
            "distributivity and disjointness",
            Duration::from_secs(60),
            distributivity,
        ),
        ("communication structure", Duration::from_secs(10), communication),
        ("optimization effect", Duration::from_secs(60), optimization_effect),
        ("classification", Duration::from_secs(1), classification),
        ("generators", Duration::from_secs(30), generators),
        ("scalability smoke", Duration::from_secs(60), scalability),
    ];
    // Criterion numbers given on the command line restrict the run.
    let only: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (i, (name, limit, run)) in criteria.iter().enumerate() {
        if !only.is_empty() && !only.contains(&(i + 1)) {
            continue;
        }
        let start = Instant::now();
        let outcome = run();
        let took = start.elapsed();
        let outcome = match outcome {
            Ok(detail) if took > *limit => Err(format!("{detail}; over the {limit:?} limit")),
            other => other,
        };
        match outcome {
            Ok(detail) => println!("criterion {}: PASS {name} ({took:.2?}): {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {}: FAIL {name} ({took:.2?}): {why}", i + 1);
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
