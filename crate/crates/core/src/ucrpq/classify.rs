use std::collections::BTreeSet;
use std::fmt;

use serde::Serialize;

use super::{Node, PathExpr, UcrpqQuery};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Class {
    /// Recursion with no filter or concatenation around it.
    C1,
    /// Constant to the right of a recursion.
    C2,
    /// Constant to the left of a recursion.
    C3,
    /// Non-recursive step right after a recursion.
    C4,
    /// Non-recursive step right before a recursion.
    C5,
    /// Two recursions one after the other.
    C6,
}

impl Class {
    pub const ALL: [Class; 6] = [Class::C1, Class::C2, Class::C3, Class::C4, Class::C5, Class::C6];
}

impl fmt::Display for Class {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize)]
pub struct QueryClass(pub BTreeSet<Class>);

impl QueryClass {
    pub fn of(classes: &[Class]) -> Self {
        QueryClass(classes.iter().copied().collect())
    }

    pub fn contains(&self, c: Class) -> bool {
        self.0.contains(&c)
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl fmt::Display for QueryClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<String> = self.0.iter().map(Class::to_string).collect();
        write!(f, "{{{}}}", names.join(","))
    }
}

/// What a path can start or end with.
#[derive(Debug, Clone, Copy, Default)]
struct Ends {
    recursive: bool,
    plain: bool,
}

impl Ends {
    fn or(self, o: Ends) -> Ends {
        Ends {
            recursive: self.recursive || o.recursive,
            plain: self.plain || o.plain,
        }
    }
}

struct Summary {
    first: Ends,
    last: Ends,
}

/// Classes of a recursive segment meeting `other`; `after` is true when
/// `other` follows the recursion.
fn meet(rec: Ends, other: Ends, after: bool, out: &mut BTreeSet<Class>) {
    if !rec.recursive {
        return;
    }
    if other.recursive {
        out.insert(Class::C6);
    }
    if other.plain {
        out.insert(if after { Class::C4 } else { Class::C5 });
    }
}

fn summarize(p: &PathExpr, out: &mut BTreeSet<Class>) -> Summary {
    match p {
        PathExpr::Label(_) | PathExpr::Inverse(_) => {
            let e = Ends {
                recursive: false,
                plain: true,
            };
            Summary { first: e, last: e }
        }
        PathExpr::Plus(inner) => {
            summarize(inner, out);
            let e = Ends {
                recursive: true,
                plain: false,
            };
            Summary { first: e, last: e }
        }
        PathExpr::Alt(a, b) => {
            let (a, b) = (summarize(a, out), summarize(b, out));
            Summary {
                first: a.first.or(b.first),
                last: a.last.or(b.last),
            }
        }
        PathExpr::Concat(a, b) => {
            let (a, b) = (summarize(a, out), summarize(b, out));
            meet(a.last, b.first, true, out);
            meet(b.first, a.last, false, out);
            Summary {
                first: a.first,
                last: b.last,
            }
        }
    }
}

/// Recursion shapes of `q`. Atoms sharing a variable are treated as
/// concatenated at that variable; constants count only within their atom.
/// A recursive query that shows none of the other shapes is a plain
/// recursion.
pub fn classify(q: &UcrpqQuery) -> QueryClass {
    let mut out = BTreeSet::new();
    // (variable, atom, path ends at the variable, variable is the object)
    let mut endpoints = Vec::new();
    for (i, a) in q.atoms.iter().enumerate() {
        let s = summarize(&a.path, &mut out);
        let recursive = a.path.is_recursive();
        if recursive && matches!(a.object, Node::Const(_)) {
            out.insert(Class::C2);
        }
        if recursive && matches!(a.subject, Node::Const(_)) {
            out.insert(Class::C3);
        }
        if let Some(v) = a.subject.var() {
            endpoints.push((v, i, s.first, false));
        }
        if let Some(v) = a.object.var() {
            endpoints.push((v, i, s.last, true));
        }
    }
    // Seen from one atom, an atom sharing its end variable continues past it.
    for &(v, i, ends, at_object) in &endpoints {
        for &(w, j, other, _) in &endpoints {
            if v == w && i != j {
                meet(ends, other, at_object, &mut out);
            }
        }
    }
    if out.is_empty() && q.is_recursive() {
        out.insert(Class::C1);
    }
    QueryClass(out)
}
