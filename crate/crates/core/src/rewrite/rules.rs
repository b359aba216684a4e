use std::collections::{BTreeMap, BTreeSet};

use super::shape::{closure_term, compose, match_closure, match_compose, Direction};
use super::stable::stable_columns;
use super::Rewriter;
use crate::algebra::{
    all_var_names, decompose, free_vars, fresh_name, occurs_free, Col, FixpointDecomposition, Predicate, Schema, Term,
};

type Bound = BTreeMap<String, Schema>;

/// Strips a chain of renames, returning them innermost first.
fn peel_renames(t: &Term) -> (Vec<(Col, Col)>, &Term) {
    let mut chain = Vec::new();
    let mut cur = t;
    while let Term::Rename { from, to, term } = cur {
        chain.push((from.clone(), to.clone()));
        cur = term;
    }
    chain.reverse();
    (chain, cur)
}

fn fresh_col(base: &Col, taken: &mut BTreeSet<String>) -> Col {
    let name = fresh_name(base.as_str(), taken);
    taken.insert(name.clone());
    Col::new(&name).expect("fresh names extend identifiers")
}

impl Rewriter {
    fn decompose_in(&self, fix: &Term, bound: &Bound) -> Option<FixpointDecomposition> {
        let d = decompose(fix, &self.env_with(bound), None).ok()?;
        (!d.constant.is_empty()).then_some(d)
    }

    /// Columns the recursive branches of `d` reference, directly or through
    /// the schemas of the relations they read.
    fn body_columns(&self, d: &FixpointDecomposition, bound: &Bound) -> BTreeSet<Col> {
        let env = self.env_with(bound);
        let mut cols = BTreeSet::new();
        for b in &d.variable {
            cols.extend(b.mentioned_columns());
            for v in free_vars(b) {
                if v != d.var {
                    if let Some(s) = env.get(&v) {
                        cols.extend(s.iter().cloned());
                    }
                }
            }
        }
        cols
    }

    pub(super) fn push_filter_at(&self, t: &Term, bound: &Bound) -> Vec<Term> {
        let Term::Filter(p, inner) = t else {
            return vec![];
        };
        if !inner.is_fixpoint() {
            return vec![];
        }
        let cols = p.columns();
        let push = || -> Option<Term> {
            let d = self.decompose_in(inner, bound)?;
            if !stable_columns(&d).contains_all(&cols) {
                return None;
            }
            let seed = Term::filter(p.clone(), d.constant_part()?);
            Some(d.with_constant(vec![seed]).to_term())
        };
        push().into_iter().collect()
    }

    pub(super) fn push_join_at(&self, t: &Term, bound: &Bound) -> Vec<Term> {
        let Term::Join(a, b) = t else {
            return vec![];
        };
        [(a, b), (b, a)]
            .into_iter()
            .filter_map(|(other, fix_side)| self.push_join_into(other, fix_side, bound))
            .collect()
    }

    fn push_join_into(&self, b: &Term, fix_side: &Term, bound: &Bound) -> Option<Term> {
        let (chain, fix) = peel_renames(fix_side);
        let Term::Fixpoint { var, .. } = fix else {
            return None;
        };
        if occurs_free(b, var) {
            return None;
        }
        let d = self.decompose_in(fix, bound)?;
        let stable = stable_columns(&d);
        let sb = self.schema_in(b, bound)?;
        let st = self.schema_in(fix_side, bound)?;

        // Fixpoint column -> column name outside the rename chain.
        let mut outer: BTreeMap<Col, Col> = d.schema.iter().map(|c| (c.clone(), c.clone())).collect();
        for (from, to) in &chain {
            for v in outer.values_mut() {
                if v == from {
                    *v = to.clone();
                }
            }
        }
        let inner_of: BTreeMap<Col, Col> = outer.iter().map(|(k, v)| (v.clone(), k.clone())).collect();

        let shared: Vec<&Col> = sb.intersection(&st).collect();
        if !shared.iter().all(|o| stable.contains(&inner_of[*o])) {
            return None;
        }
        let body_cols = self.body_columns(&d, bound);
        let private: Vec<&Col> = sb.difference(&st).collect();
        if private.iter().any(|p| body_cols.contains(*p) && !d.schema.contains(*p)) {
            return None;
        }

        let chain_cols: BTreeSet<Col> = chain.iter().flat_map(|(f, t)| [f.clone(), t.clone()]).collect();
        let mut taken: BTreeSet<String> = sb
            .iter()
            .chain(&st)
            .chain(&d.schema)
            .chain(&body_cols)
            .chain(&chain_cols)
            .map(|c| c.as_str().to_string())
            .collect();
        let mut b2 = b.clone();
        let mut restore = Vec::new();
        for p in private {
            if d.schema.contains(p) || chain_cols.contains(p) {
                let fresh = fresh_col(p, &mut taken);
                b2 = Term::rename(p.clone(), fresh.clone(), b2);
                restore.push((fresh, p.clone()));
            }
        }
        let mut moved = Vec::new();
        for o in shared {
            let target = &inner_of[o];
            if target != o {
                let tmp = fresh_col(o, &mut taken);
                b2 = Term::rename(o.clone(), tmp.clone(), b2);
                moved.push((tmp, target.clone()));
            }
        }
        for (tmp, target) in moved {
            b2 = Term::rename(tmp, target, b2);
        }

        let seed = Term::join(b2, d.constant_part()?);
        let mut out = d.with_constant(vec![seed]).to_term();
        for (from, to) in chain {
            out = Term::rename(from, to, out);
        }
        for (fresh, orig) in restore {
            out = Term::rename(fresh, orig, out);
        }
        Some(out)
    }

    pub(super) fn push_antiproject_at(&self, t: &Term, bound: &Bound) -> Vec<Term> {
        let Term::Antiproject(a, fix) = t else {
            return vec![];
        };
        if !fix.is_fixpoint() {
            return vec![];
        }
        let Some(d) = self.decompose_in(fix, bound) else {
            return vec![];
        };
        if !stable_columns(&d).contains(a) {
            return vec![];
        }
        let mut inner_bound = bound.clone();
        inner_bound.insert(d.var.clone(), d.schema.clone());
        if d.variable
            .iter()
            .any(|b| self.touches_on_var_path(b, &d.var, a, &inner_bound))
        {
            return vec![];
        }
        let Some(seed) = d.constant_part() else {
            return vec![];
        };
        vec![d.with_constant(vec![Term::drop(a.clone(), seed)]).to_term()]
    }

    /// True when an operator on the path from the recursion variable to the
    /// output of `t` reads or writes column `a`.
    fn touches_on_var_path(&self, t: &Term, x: &str, a: &Col, bound: &Bound) -> bool {
        if !occurs_free(t, x) {
            return false;
        }
        match t {
            Term::Var(_) => false,
            Term::Const(..) | Term::Fixpoint { .. } => true,
            Term::Filter(p, c) => p.columns().contains(a) || self.touches_on_var_path(c, x, a, bound),
            Term::Rename { from, to, term } => from == a || to == a || self.touches_on_var_path(term, x, a, bound),
            Term::Antiproject(c, term) => c == a || self.touches_on_var_path(term, x, a, bound),
            Term::Union(l, r) => self.touches_on_var_path(l, x, a, bound) || self.touches_on_var_path(r, x, a, bound),
            Term::Join(l, r) | Term::Antijoin(l, r) => {
                let (xs, other) = if occurs_free(l, x) { (l, r) } else { (r, l) };
                let other_has = self.schema_in(other, bound).is_none_or(|s| s.contains(a));
                other_has || self.touches_on_var_path(xs, x, a, bound)
            }
        }
    }

    pub(super) fn reverse_at(&self, t: &Term, bound: &Bound) -> Vec<Term> {
        let Some(c) = match_closure(t, &self.env_with(bound)) else {
            return vec![];
        };
        let flipped = match c.direction {
            Direction::Right => Direction::Left,
            Direction::Left => Direction::Right,
        };
        if c.is_pure() {
            return vec![closure_term(&c.var, c.step.clone(), c.step, flipped, &c.mid)];
        }
        // R∘B* = R ∪ R∘B+ and B*∘R = R ∪ B+∘R, with B+ built the other way.
        let plus = closure_term(&c.var, c.step.clone(), c.step, flipped, &c.mid);
        let extended = match c.direction {
            Direction::Right => compose(c.seed.clone(), plus, &c.mid),
            Direction::Left => compose(plus, c.seed.clone(), &c.mid),
        };
        vec![Term::union(c.seed, extended)]
    }

    pub(super) fn merge_at(&self, t: &Term, bound: &Bound) -> Vec<Term> {
        let Some((l, r, m)) = match_compose(t) else {
            return vec![];
        };
        let env = self.env_with(bound);
        let (Some(a), Some(b)) = (match_closure(l, &env), match_closure(r, &env)) else {
            return vec![];
        };
        if !a.is_pure() || !b.is_pure() {
            return vec![];
        }
        let mut taken = all_var_names(&a.step);
        taken.extend(all_var_names(&b.step));
        let x = fresh_name(&a.var, &taken);
        let xv = Term::var(x.clone());
        let body = Term::union(
            Term::union(
                compose(a.step.clone(), b.step.clone(), &m),
                compose(a.step, xv.clone(), &m),
            ),
            compose(xv, b.step, &m),
        );
        vec![Term::fix(x, body)]
    }

    pub(super) fn classical_at(&self, t: &Term, bound: &Bound) -> Vec<Term> {
        let mut out = Vec::new();
        match t {
            Term::Filter(p, inner) => match inner.as_ref() {
                Term::Union(a, b) => out.push(Term::union(
                    Term::filter(p.clone(), (**a).clone()),
                    Term::filter(p.clone(), (**b).clone()),
                )),
                Term::Join(a, b) => {
                    if let Some(pushed) = self.filter_into_join(p, a, b, bound) {
                        out.push(pushed);
                    }
                }
                Term::Rename { from, to, term } => {
                    let q = Predicate(p.atoms().iter().map(|a| a.rename_column(to, from)).collect());
                    out.push(Term::rename(
                        from.clone(),
                        to.clone(),
                        Term::filter(q, (**term).clone()),
                    ));
                }
                Term::Antiproject(c, term) => {
                    out.push(Term::drop(c.clone(), Term::filter(p.clone(), (**term).clone())));
                }
                _ => {}
            },
            Term::Antiproject(c, inner) => match inner.as_ref() {
                Term::Rename { from, to, term } if c == to => out.push(Term::drop(from.clone(), (**term).clone())),
                Term::Rename { from, to, term } if c != from => out.push(Term::rename(
                    from.clone(),
                    to.clone(),
                    Term::drop(c.clone(), (**term).clone()),
                )),
                Term::Join(a, b) => {
                    let (sa, sb) = (self.schema_in(a, bound), self.schema_in(b, bound));
                    if let (Some(sa), Some(sb)) = (sa, sb) {
                        if sa.contains(c) && !sb.contains(c) {
                            out.push(Term::join(Term::drop(c.clone(), (**a).clone()), (**b).clone()));
                        } else if sb.contains(c) && !sa.contains(c) {
                            out.push(Term::join((**a).clone(), Term::drop(c.clone(), (**b).clone())));
                        }
                    }
                }
                _ => {}
            },
            Term::Join(a, b) if !bound.keys().any(|v| occurs_free(t, v)) => {
                out.push(Term::join((**b).clone(), (**a).clone()));
                if let Term::Join(x, y) = a.as_ref() {
                    out.push(Term::join((**x).clone(), Term::join((**y).clone(), (**b).clone())));
                }
            }
            _ => {}
        }
        out
    }

    fn filter_into_join(&self, p: &Predicate, a: &Term, b: &Term, bound: &Bound) -> Option<Term> {
        let sa = self.schema_in(a, bound)?;
        let sb = self.schema_in(b, bound)?;
        let (mut left, mut right, mut rest) = (Vec::new(), Vec::new(), Vec::new());
        for atom in p.atoms() {
            let cols = atom.columns();
            if cols.iter().all(|c| sa.contains(*c)) {
                left.push(atom.clone());
            } else if cols.iter().all(|c| sb.contains(*c)) {
                right.push(atom.clone());
            } else {
                rest.push(atom.clone());
            }
        }
        if left.is_empty() && right.is_empty() {
            return None;
        }
        let wrap = |atoms: Vec<_>, t: &Term| {
            if atoms.is_empty() {
                t.clone()
            } else {
                Term::filter(Predicate(atoms), t.clone())
            }
        };
        let joined = Term::join(wrap(left, a), wrap(right, b));
        Some(if rest.is_empty() {
            joined
        } else {
            Term::filter(Predicate(rest), joined)
        })
    }
}

#[cfg(test)]
mod tests {
    use super::super::*;
    use crate::algebra::Predicate;
    use crate::algebra::{col, parse_term, Relation, Term};
    use crate::eval::{eval, EvalEnv};
    use crate::sample;

    fn rw() -> Rewriter {
        Rewriter::new(sample::database().schemas())
    }

    fn t(s: &str) -> Term {
        parse_term(s).unwrap()
    }

    fn same(a: &Term, b: &Term) {
        let db = sample::database();
        let env = EvalEnv::new(&db);
        assert_eq!(eval(a, &env).unwrap(), eval(b, &env).unwrap(), "{a}\n{b}");
    }

    #[test]
    fn filter_on_stable_source_moves_into_seed() {
        let before = Term::filter(Predicate::eq_lit(col("src"), 1), sample::fixpoint_term());
        let out = rw().push_filter(&before);
        assert_eq!(
            out,
            vec![t(
                "mu(X = filter[src=1](S) U drop[c](rename[dst->c](X) join rename[src->c](E)))"
            )]
        );
        same(&before, &out[0]);
        let db = sample::database();
        let got = eval(&out[0], &EvalEnv::new(&db)).unwrap();
        let want = Relation::from_values(&["src", "dst"], [[1, 2], [1, 4], [1, 3], [1, 5], [1, 6]]).unwrap();
        assert_eq!(got, want);
    }

    #[test]
    fn filter_on_destination_needs_reversal_first() {
        let before = Term::filter(Predicate::eq_lit(col("dst"), 6), sample::fixpoint_term());
        assert!(rw().push_filter(&before).is_empty());
        assert!(rw()
            .reverse_fixpoint(&before)
            .iter()
            .all(|r| rw().push_filter(r).is_empty()));

        let plus = t("filter[dst=5](mu(X = E U drop[m](rename[dst->m](X) join rename[src->m](E))))");
        assert!(rw().push_filter(&plus).is_empty());
        let reversed = rw().reverse_fixpoint(&plus);
        assert_eq!(reversed.len(), 1);
        let out = rw().push_filter(&reversed[0]);
        assert_eq!(
            out,
            vec![t(
                "mu(X = filter[dst=5](E) U drop[m](rename[dst->m](E) join rename[src->m](X)))"
            )]
        );
        same(&plus, &out[0]);
    }

    #[test]
    fn join_moves_into_seed_through_renames() {
        let plus = "mu(X = E U drop[m](rename[dst->m](X) join rename[src->m](E)))";
        let before = t(&format!("drop[k](rename[dst->k](S) join rename[src->k]({plus}))"));
        let out = rw().push_join(&t(&format!("rename[dst->k](S) join rename[src->k]({plus})")));
        assert_eq!(out.len(), 1);
        let after = Term::drop(col("k"), out[0].clone());
        same(&before, &after);
    }

    #[test]
    fn join_guard_rejects_body_columns() {
        // The private column `m` is used inside the body.
        let before = t("rename[dst->m](S) join mu(X = E U drop[m](rename[dst->m](X) join rename[src->m](E)))");
        let shared_ok = rw().push_join(&before);
        assert!(shared_ok.is_empty());
    }

    #[test]
    fn antiproject_of_stable_source() {
        let before = Term::drop(col("src"), sample::fixpoint_term());
        let out = rw().push_antiproject(&before);
        assert_eq!(out.len(), 1);
        same(&before, &out[0]);
        assert!(rw()
            .push_antiproject(&Term::drop(col("dst"), sample::fixpoint_term()))
            .is_empty());
    }

    #[test]
    fn reversal_keeps_meaning() {
        let out = rw().reverse_fixpoint(&sample::fixpoint_term());
        assert_eq!(out.len(), 1);
        same(&sample::fixpoint_term(), &out[0]);
        let plus = t("mu(X = E U drop[m](rename[dst->m](X) join rename[src->m](E)))");
        let back = rw().reverse_fixpoint(&plus);
        assert!(back[0].is_fixpoint());
        same(&plus, &back[0]);
        assert_eq!(rw().reverse_fixpoint(&back[0]), vec![plus]);
        let sg = t("mu(X = S U drop[m](rename[dst->m](X) join rename[src->m](X)))");
        assert!(rw().reverse_fixpoint(&sg).is_empty());
    }

    #[test]
    fn merging_two_closures() {
        let a = "mu(X = S U drop[m](rename[dst->m](X) join rename[src->m](S)))";
        let b = "mu(Y = E U drop[m](rename[dst->m](E) join rename[src->m](Y)))";
        let before = t(&format!("drop[k](rename[dst->k]({a}) join rename[src->k]({b}))"));
        let out = rw().merge_fixpoints(&before);
        assert_eq!(out.len(), 1);
        assert!(out[0].is_fixpoint());
        same(&before, &out[0]);
        let apart = t(&format!("rename[dst->k]({a}) join rename[src->q]({b})"));
        assert!(rw().merge_fixpoints(&apart).is_empty());
    }

    #[test]
    fn classical_rules_preserve_meaning() {
        let cases = [
            "filter[src=1](S U E)",
            "filter[src=1](rename[dst->k](S) join rename[src->k](E))",
            "filter[k=2](rename[dst->k](S))",
            "drop[k](rename[dst->k](S))",
            "drop[src](rename[dst->k](S) join rename[src->k](E))",
        ];
        for c in cases {
            let before = t(c);
            let outs = rw().classical(&before);
            assert!(!outs.is_empty(), "{c}");
            for o in outs {
                same(&before, &o);
            }
        }
    }

    #[test]
    fn exploration_is_bounded_and_consistent() {
        let input = Term::filter(Predicate::eq_lit(col("src"), 10), sample::fixpoint_term());
        assert_eq!(rw().explore(&input, 1), vec![input.clone()]);
        let all = rw().explore(&input, DEFAULT_BUDGET);
        assert!(all.len() > 1 && all.len() <= DEFAULT_BUDGET);
        assert_eq!(all[0], input);
        for other in &all {
            same(&input, other);
        }
        let traced = rw().explore_traced(&input, DEFAULT_BUDGET);
        assert!(traced
            .iter()
            .any(|e| e.trace.iter().any(|s| s.rule == Rule::PushFilter)));
    }
}
