//! Recursive terms over `edges` that are not regular path queries.

use crate::algebra::{col, Predicate, Term, Value};
use crate::rewrite::shape::{closure_term, compose, dst, src, Direction};

use super::EDGES;

/// `{src, dst}` view of the edges labelled `label`.
pub fn label_view(label: &str) -> Term {
    Term::drop(
        col("lbl"),
        Term::filter(Predicate::eq_lit(col("lbl"), label), Term::var(EDGES)),
    )
}

/// All edges as `{src, dst}`, labels ignored.
pub fn unlabelled() -> Term {
    Term::drop(col("lbl"), Term::var(EDGES))
}

/// Pairs joined by `n` edges labelled `a` followed by `n` labelled `b`, `n >= 1`.
pub fn anbn(a: &str, b: &str) -> Term {
    let (m, n) = (col("m"), col("n"));
    let base = compose(label_view(a), label_view(b), &m);
    let rec = Term::drop(
        m.clone(),
        Term::drop(
            n.clone(),
            Term::join(
                Term::join(
                    Term::rename(dst(), m.clone(), label_view(a)),
                    Term::rename(src(), m, Term::rename(dst(), n.clone(), Term::var("X"))),
                ),
                Term::rename(src(), n, label_view(b)),
            ),
        ),
    );
    Term::fix("X", Term::union(base, rec))
}

/// Pairs of nodes at the same depth below a common ancestor, edges pointing
/// from parent to child.
pub fn same_generation() -> Term {
    let (m, n) = (col("m"), col("n"));
    // Edge seen as {m: parent, src: child}.
    let child_as_src = || Term::rename(dst(), src(), Term::rename(src(), m.clone(), unlabelled()));
    let siblings = Term::drop(
        m.clone(),
        Term::join(child_as_src(), Term::rename(src(), m.clone(), unlabelled())),
    );
    let rec = Term::drop(
        m.clone(),
        Term::drop(
            n.clone(),
            Term::join(
                Term::join(
                    child_as_src(),
                    Term::rename(src(), m.clone(), Term::rename(dst(), n.clone(), Term::var("X"))),
                ),
                Term::rename(src(), n, unlabelled()),
            ),
        ),
    );
    Term::fix("X", Term::union(siblings, rec))
}

/// Nodes reachable from `from` by one or more edges, as `{dst}`.
pub fn reach(from: impl Into<Value>) -> Term {
    let seed = Term::filter(Predicate::eq_lit(src(), from), unlabelled());
    Term::drop(
        src(),
        closure_term("X", seed, unlabelled(), Direction::Right, &col("m")),
    )
}

/// Transitive closure of the unlabelled edges.
pub fn transitive_closure() -> Term {
    closure_term("X", unlabelled(), unlabelled(), Direction::Right, &col("m"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{Relation, Value};
    use crate::eval::{eval, EvalEnv};
    use crate::graph::{from_triples, parse_tsv};

    fn pairs(rows: &[(i64, i64)]) -> Relation {
        Relation::from_values(&["src", "dst"], rows.iter().map(|&(a, b)| [a, b])).unwrap()
    }

    #[test]
    fn anbn_matches_balanced_paths() {
        let db = parse_tsv("1\ta\t2\n2\ta\t3\n3\tb\t4\n4\tb\t5\n2\tb\t6\n").unwrap();
        let out = eval(&anbn("a", "b"), &EvalEnv::new(&db)).unwrap();
        assert_eq!(out, pairs(&[(2, 4), (1, 5), (1, 6)]));
    }

    #[test]
    fn same_generation_on_a_tree() {
        let db = parse_tsv("1\te\t2\n1\te\t3\n2\te\t4\n3\te\t5\n").unwrap();
        let out = eval(&same_generation(), &EvalEnv::new(&db)).unwrap();
        let want = pairs(&[(2, 2), (2, 3), (3, 2), (3, 3), (4, 4), (4, 5), (5, 4), (5, 5)]);
        assert_eq!(out, want);
    }

    #[test]
    fn reach_and_closure() {
        let db = from_triples([(1, 2), (2, 3), (4, 5)].map(|(a, b)| (Value::Int(a), Value::str("e"), Value::Int(b))));
        let out = eval(&reach(1), &EvalEnv::new(&db)).unwrap();
        assert_eq!(out, Relation::from_values(&["dst"], [[2], [3]]).unwrap());
        assert_eq!(eval(&transitive_closure(), &EvalEnv::new(&db)).unwrap().len(), 4);
    }
}
