//! Well-formedness conditions on fixpoints and their decomposition into a
//! recursion-free seed and a variable part.

use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use super::relation::{Database, Relation, Schema};
use super::schema::{schema_of, SchemaEnv, SchemaError};
use super::term::{Term, TermPath};
use super::vars::occurs_free;
use crate::eval::{eval, EvalEnv};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum ViolationKind {
    /// The recursion variable occurs under the right operand of an antijoin.
    Positive,
    /// Both operands of a join or antijoin mention the recursion variable.
    Linear,
    /// A nested fixpoint mentions the outer recursion variable free.
    MutuallyRecursive,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub kind: ViolationKind,
    /// Recursion variable whose condition is broken.
    pub var: String,
    /// Offending subterm, as child indexes from the validated term's root.
    pub path: TermPath,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct FconditionReport {
    pub ok: bool,
    pub violations: Vec<Violation>,
}

impl fmt::Display for FconditionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.ok {
            return f.write_str("ok");
        }
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{:?} violation for `{}` at {:?}", v.kind, v.var, v.path)?;
        }
        Ok(())
    }
}

/// Checks positivity, linearity and non-mutual recursion for every fixpoint
/// in `term`. Purely syntactic.
pub fn validate_fcond(term: &Term) -> FconditionReport {
    let mut violations = Vec::new();
    for (path, t) in term.positions() {
        if let Term::Fixpoint { var, body } = t {
            let mut p = path.clone();
            p.push(0);
            check_body(var, body, &mut p, &mut violations);
        }
    }
    FconditionReport {
        ok: violations.is_empty(),
        violations,
    }
}

fn check_body(x: &str, t: &Term, path: &mut TermPath, out: &mut Vec<Violation>) {
    let mut flag = |kind, path: &TermPath| {
        out.push(Violation {
            kind,
            var: x.to_string(),
            path: path.clone(),
        })
    };
    match t {
        Term::Antijoin(l, r) => {
            if occurs_free(r, x) {
                flag(ViolationKind::Positive, path);
            }
            if occurs_free(l, x) && occurs_free(r, x) {
                flag(ViolationKind::Linear, path);
            }
        }
        Term::Join(l, r) => {
            if occurs_free(l, x) && occurs_free(r, x) {
                flag(ViolationKind::Linear, path);
            }
        }
        Term::Fixpoint { var, body } => {
            // Rebinding the same name shadows it; otherwise the outer variable
            // must not reach inside.
            if var != x && occurs_free(body, x) {
                flag(ViolationKind::MutuallyRecursive, path);
            }
            return;
        }
        _ => {}
    }
    for (i, c) in t.children().into_iter().enumerate() {
        path.push(i);
        check_body(x, c, path, out);
        path.pop();
    }
}

/// How the `φ(∅) = ∅` requirement on the variable part was established.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum EmptySeedCheck {
    /// Every variable branch is strict in the recursion variable by shape.
    Structural,
    /// Verified by evaluating the variable part against the database.
    Evaluated,
    /// Not strict by shape and no database was available to check.
    Unverified,
}

/// A fixpoint `mu(X = R U phi)` split into its recursion-free part `R` and
/// its variable part `phi`.
///
/// Both parts are kept as lists of union branches; an empty list stands for
/// the empty relation of the fixpoint's schema.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FixpointDecomposition {
    pub var: String,
    pub schema: Schema,
    pub constant: Vec<Term>,
    pub variable: Vec<Term>,
    pub empty_seed_check: EmptySeedCheck,
}

impl FixpointDecomposition {
    pub fn constant_part(&self) -> Option<Term> {
        Term::union_all(self.constant.iter().cloned())
    }

    pub fn variable_part(&self) -> Option<Term> {
        Term::union_all(self.variable.iter().cloned())
    }

    /// Reassembled fixpoint term, constant branches first.
    pub fn to_term(&self) -> Term {
        let body = Term::union_all(self.constant.iter().chain(&self.variable).cloned())
            .unwrap_or_else(|| Term::var(self.var.clone()));
        Term::fix(self.var.clone(), body)
    }

    pub fn with_constant(&self, constant: Vec<Term>) -> FixpointDecomposition {
        FixpointDecomposition {
            constant,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DecomposeError {
    #[error("term is not a fixpoint")]
    NotAFixpoint,
    #[error("fixpoint violates well-formedness: {0}")]
    Fcond(FconditionReport),
    #[error(transparent)]
    Schema(#[from] SchemaError),
    #[error("variable part is not empty on the empty relation: {0}")]
    NonEmptyOnEmpty(String),
    #[error("evaluating the variable part failed: {0}")]
    Eval(String),
}

/// True when the term yields the empty relation whenever `x` is empty,
/// judged by shape alone.
pub fn strict_in(t: &Term, x: &str) -> bool {
    match t {
        Term::Var(y) => y == x,
        Term::Const(..) | Term::Fixpoint { .. } => false,
        Term::Union(a, b) => strict_in(a, x) && strict_in(b, x),
        Term::Join(a, b) => strict_in(a, x) || strict_in(b, x),
        Term::Antijoin(a, _) => strict_in(a, x),
        Term::Filter(_, c) | Term::Rename { term: c, .. } | Term::Antiproject(_, c) => strict_in(c, x),
    }
}

/// Splits the top-level union of a fixpoint body into recursion-free and
/// recursive branches.
///
/// `env` must give schemas for every free name of `fix`. When `db` is given
/// it is used to confirm `φ(∅) = ∅` for branches that are not strict by
/// shape; without it such branches are accepted and flagged `Unverified`.
pub fn decompose(fix: &Term, env: &SchemaEnv, db: Option<&Database>) -> Result<FixpointDecomposition, DecomposeError> {
    let Term::Fixpoint { var, body } = fix else {
        return Err(DecomposeError::NotAFixpoint);
    };
    let report = validate_fcond(fix);
    if !report.ok {
        return Err(DecomposeError::Fcond(report));
    }
    let schema = schema_of(fix, env, &BTreeMap::new())?;
    let (constant, variable): (Vec<&Term>, Vec<&Term>) =
        body.union_branches().into_iter().partition(|b| !occurs_free(b, var));

    let mut check = EmptySeedCheck::Structural;
    let lax: Vec<&Term> = variable.iter().copied().filter(|b| !strict_in(b, var)).collect();
    if !lax.is_empty() {
        match db {
            None => check = EmptySeedCheck::Unverified,
            Some(db) => {
                let mut eval_env = EvalEnv::new(db);
                eval_env.bind(var.clone(), Relation::empty_with_schema(&schema));
                for b in lax {
                    let out = eval(b, &eval_env).map_err(|e| DecomposeError::Eval(e.to_string()))?;
                    if !out.is_empty() {
                        return Err(DecomposeError::NonEmptyOnEmpty(b.to_string()));
                    }
                }
                check = EmptySeedCheck::Evaluated;
            }
        }
    }
    Ok(FixpointDecomposition {
        var: var.clone(),
        schema,
        constant: constant.into_iter().cloned().collect(),
        variable: variable.into_iter().cloned().collect(),
        empty_seed_check: check,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{col, parse_term};

    fn t(s: &str) -> Term {
        parse_term(s).unwrap()
    }

    fn env() -> SchemaEnv {
        let pair: Schema = [col("src"), col("dst")].into_iter().collect();
        BTreeMap::from([
            ("S".to_string(), pair.clone()),
            ("E".to_string(), pair.clone()),
            ("R".to_string(), pair),
        ])
    }

    fn kinds(s: &str) -> Vec<ViolationKind> {
        validate_fcond(&t(s)).violations.into_iter().map(|v| v.kind).collect()
    }

    #[test]
    fn antijoin_on_recursion_is_not_positive() {
        assert_eq!(kinds("mu(X = R antijoin X)"), vec![ViolationKind::Positive]);
    }

    #[test]
    fn self_join_is_not_linear() {
        assert_eq!(kinds("mu(X = X join X)"), vec![ViolationKind::Linear]);
    }

    #[test]
    fn nested_fixpoint_over_outer_variable_is_mutual() {
        assert_eq!(
            kinds("mu(X = mu(Y = drop[c](rename[dst->c](X) join rename[src->c](Y))))"),
            vec![ViolationKind::MutuallyRecursive]
        );
        // A closed nested fixpoint is fine, and so is shadowing.
        assert!(kinds("mu(X = R U (X join mu(Y = R U Y)))").is_empty());
        assert!(kinds("mu(X = R U mu(X = X))").is_empty());
    }

    #[test]
    fn example_two_is_valid_and_splits() {
        let fix = t("mu(X = S U drop[c](rename[dst->c](X) join rename[src->c](E)))");
        assert!(validate_fcond(&fix).ok);
        let d = decompose(&fix, &env(), None).unwrap();
        assert_eq!(d.constant, vec![t("S")]);
        assert_eq!(d.variable, vec![t("drop[c](rename[dst->c](X) join rename[src->c](E))")]);
        assert_eq!(d.empty_seed_check, EmptySeedCheck::Structural);
        assert_eq!(d.to_term(), fix);
    }

    #[test]
    fn edge_shapes() {
        let d = decompose(&t("mu(X = S)"), &env(), None).unwrap();
        assert_eq!(d.constant, vec![t("S")]);
        assert!(d.variable.is_empty());

        let d = decompose(
            &t("mu(X = drop[c](rename[dst->c](X) join rename[src->c](E)))"),
            &env(),
            None,
        )
        .unwrap();
        assert!(d.constant.is_empty());
        assert_eq!(d.variable.len(), 1);

        assert!(matches!(
            decompose(&t("S"), &env(), None),
            Err(DecomposeError::NotAFixpoint)
        ));
        assert!(matches!(
            decompose(&t("mu(X = X join X)"), &env(), None),
            Err(DecomposeError::Fcond(_))
        ));
    }

    #[test]
    fn lax_branch_is_checked_against_database() {
        use crate::algebra::Relation;
        // filter over (X U R) is not strict in X by shape.
        let fix = t("mu(X = S U filter[src=1](X U R))");
        let d = decompose(&fix, &env(), None).unwrap();
        assert_eq!(d.empty_seed_check, EmptySeedCheck::Unverified);

        let pairs = |rows: &[[i64; 2]]| Relation::from_values(&["src", "dst"], rows.iter().copied()).unwrap();
        let db = Database::new()
            .with("S", pairs(&[[1, 2]]))
            .with("E", pairs(&[]))
            .with("R", pairs(&[[5, 6]]));
        let d = decompose(&fix, &env(), Some(&db)).unwrap();
        assert_eq!(d.empty_seed_check, EmptySeedCheck::Evaluated);

        let db = db.with("R", pairs(&[[1, 6]]));
        assert!(matches!(
            decompose(&fix, &env(), Some(&db)),
            Err(DecomposeError::NonEmptyOnEmpty(_))
        ));
    }
}
