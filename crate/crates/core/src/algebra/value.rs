//! Scalar values, the process-wide value dictionary, and column names.
//!
//! Rows never store a [`Value`] directly. Every value is interned once into a
//! [`Datum`], a 32-bit handle, so that hashing, equality and row storage stay
//! cheap inside fixpoint loops. The dictionary is append-only and shared by
//! every relation in the process.

use std::cmp::Ordering;
use std::fmt;
use std::sync::{Arc, OnceLock, RwLock};

use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

use super::AlgebraError;

/// A scalar stored in a relation: a string or a 64-bit signed integer.
///
/// The derived order puts every `Int` before every `Str`, then compares
/// payloads naturally.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Value {
    Int(i64),
    Str(Arc<str>),
}

impl Value {
    pub fn str(s: &str) -> Self {
        Value::Str(Arc::from(s))
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            Value::Str(s) => Some(s),
            Value::Int(_) => None,
        }
    }
}

impl From<i64> for Value {
    fn from(v: i64) -> Self {
        Value::Int(v)
    }
}

impl From<&str> for Value {
    fn from(v: &str) -> Self {
        Value::str(v)
    }
}

impl From<String> for Value {
    fn from(v: String) -> Self {
        Value::Str(Arc::from(v))
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(i) => write!(f, "{i}"),
            Value::Str(s) => f.write_str(s),
        }
    }
}

#[derive(Default)]
struct Dictionary {
    values: Vec<Value>,
    ids: FxHashMap<Value, u32>,
}

fn dictionary() -> &'static RwLock<Dictionary> {
    static DICT: OnceLock<RwLock<Dictionary>> = OnceLock::new();
    DICT.get_or_init(Default::default)
}

/// Interned handle for a [`Value`].
///
/// Two datums are equal iff their values are equal. Ordering follows the
/// value order, not the handle number, so sorted output is deterministic.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Datum(u32);

impl Datum {
    pub fn intern(value: &Value) -> Datum {
        if let Some(&id) = dictionary().read().unwrap().ids.get(value) {
            return Datum(id);
        }
        let mut dict = dictionary().write().unwrap();
        if let Some(&id) = dict.ids.get(value) {
            return Datum(id);
        }
        let id = u32::try_from(dict.values.len()).expect("value dictionary overflow");
        dict.values.push(value.clone());
        dict.ids.insert(value.clone(), id);
        Datum(id)
    }

    pub fn of_str(s: &str) -> Datum {
        Datum::intern(&Value::str(s))
    }

    pub fn from_int(i: i64) -> Datum {
        Datum::intern(&Value::Int(i))
    }

    pub fn value(self) -> Value {
        dictionary().read().unwrap().values[self.0 as usize].clone()
    }

    /// Raw handle, stable for the lifetime of the process. Used for hashing
    /// rows onto partitions.
    pub fn id(self) -> u32 {
        self.0
    }

    pub(crate) fn from_id(id: u32) -> Datum {
        Datum(id)
    }
}

impl PartialOrd for Datum {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Datum {
    fn cmp(&self, other: &Self) -> Ordering {
        if self.0 == other.0 {
            return Ordering::Equal;
        }
        let dict = dictionary().read().unwrap();
        dict.values[self.0 as usize].cmp(&dict.values[other.0 as usize])
    }
}

impl fmt::Debug for Datum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.value())
    }
}

impl fmt::Display for Datum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.value())
    }
}

/// Column name: a nonempty ASCII identifier (`[A-Za-z_][A-Za-z0-9_]*`).
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Col(Arc<str>);

impl Col {
    pub fn new(name: &str) -> Result<Col, AlgebraError> {
        if is_identifier(name) {
            Ok(Col(Arc::from(name)))
        } else {
            Err(AlgebraError::InvalidColumnName(name.to_string()))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

pub(crate) fn is_identifier(name: &str) -> bool {
    let mut chars = name.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// Shorthand for building a column from a literal known to be valid.
///
/// Panics on an invalid identifier.
pub fn col(name: &str) -> Col {
    Col::new(name).unwrap_or_else(|e| panic!("{e}"))
}

impl TryFrom<String> for Col {
    type Error = AlgebraError;
    fn try_from(value: String) -> Result<Self, Self::Error> {
        Col::new(&value)
    }
}

impl From<Col> for String {
    fn from(c: Col) -> String {
        c.0.to_string()
    }
}

impl fmt::Display for Col {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Debug for Col {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}
