use std::collections::BTreeSet;

use super::term::Term;

/// Names occurring free in `term`: database relations and any recursion
/// variable not bound by an enclosing fixpoint inside `term`.
pub fn free_vars(term: &Term) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    collect_free(term, &mut Vec::new(), &mut out);
    out
}

fn collect_free<'a>(t: &'a Term, bound: &mut Vec<&'a str>, out: &mut BTreeSet<String>) {
    match t {
        Term::Var(x) => {
            if !bound.contains(&x.as_str()) {
                out.insert(x.clone());
            }
        }
        Term::Fixpoint { var, body } => {
            bound.push(var);
            collect_free(body, bound, out);
            bound.pop();
        }
        other => {
            for c in other.children() {
                collect_free(c, bound, out);
            }
        }
    }
}

/// True when `x` occurs free in `term`.
pub fn occurs_free(term: &Term, x: &str) -> bool {
    match term {
        Term::Var(y) => y == x,
        Term::Const(..) => false,
        Term::Fixpoint { var, body } => var != x && occurs_free(body, x),
        other => other.children().into_iter().any(|c| occurs_free(c, x)),
    }
}

/// Every variable name appearing in `term`, bound or free.
pub fn all_var_names(term: &Term) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    for (_, t) in term.positions() {
        match t {
            Term::Var(x) | Term::Fixpoint { var: x, .. } => {
                out.insert(x.clone());
            }
            _ => {}
        }
    }
    out
}

/// A name starting with `base` that is not in `taken`.
pub fn fresh_name(base: &str, taken: &BTreeSet<String>) -> String {
    if !taken.contains(base) {
        return base.to_string();
    }
    (1..)
        .map(|i| format!("{base}{i}"))
        .find(|n| !taken.contains(n))
        .unwrap()
}

/// Capture-avoiding substitution of `replacement` for the free occurrences
/// of `var` in `term`.
///
/// A fixpoint binding `var` shadows it, so its body is left alone. A fixpoint
/// binding a name that is free in `replacement` is alpha-renamed first.
pub fn substitute(term: &Term, var: &str, replacement: &Term) -> Term {
    let repl_free = free_vars(replacement);
    subst(term, var, replacement, &repl_free)
}

fn subst(term: &Term, var: &str, repl: &Term, repl_free: &BTreeSet<String>) -> Term {
    match term {
        Term::Var(x) if x == var => repl.clone(),
        Term::Var(_) | Term::Const(..) => term.clone(),
        Term::Fixpoint { var: y, body } => {
            if y == var || !occurs_free(body, var) {
                return term.clone();
            }
            if repl_free.contains(y) {
                let mut taken = all_var_names(body);
                taken.extend(repl_free.iter().cloned());
                taken.insert(var.to_string());
                let fresh = fresh_name(y, &taken);
                let renamed = subst(body, y, &Term::Var(fresh.clone()), &BTreeSet::from([fresh.clone()]));
                Term::fix(fresh, subst(&renamed, var, repl, repl_free))
            } else {
                Term::fix(y.clone(), subst(body, var, repl, repl_free))
            }
        }
        other => {
            let mut out = other.clone();
            for c in out.children_mut() {
                *c = subst(c, var, repl, repl_free);
            }
            out
        }
    }
}
