use std::borrow::Cow;
use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::hash::BuildHasherDefault;
use std::sync::Arc;

use rustc_hash::FxHasher;
use smallvec::SmallVec;

use super::value::{Col, Datum, Value};
use super::AlgebraError;

/// Set of column names.
pub type Schema = BTreeSet<Col>;

/// Positional row: `row[i]` is the value of `columns[i]` of the owning relation.
pub type Row = SmallVec<[Datum; 4]>;

pub type RowSet = HashSet<Row, BuildHasherDefault<FxHasher>>;

pub fn row_set_with_capacity(n: usize) -> RowSet {
    RowSet::with_capacity_and_hasher(n, Default::default())
}

/// A tuple as a finite map from column name to value.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Tuple(BTreeMap<Col, Value>);

impl Tuple {
    pub fn new() -> Self {
        Tuple(BTreeMap::new())
    }

    /// Builds a tuple from `(column, value)` pairs; a repeated column is an error.
    pub fn from_pairs<I, V>(pairs: I) -> Result<Self, AlgebraError>
    where
        I: IntoIterator<Item = (Col, V)>,
        V: Into<Value>,
    {
        let mut map = BTreeMap::new();
        for (c, v) in pairs {
            if map.insert(c.clone(), v.into()).is_some() {
                return Err(AlgebraError::DuplicateColumn(c));
            }
        }
        Ok(Tuple(map))
    }

    pub fn get(&self, c: &Col) -> Option<&Value> {
        self.0.get(c)
    }

    pub fn columns(&self) -> impl Iterator<Item = &Col> {
        self.0.keys()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Col, &Value)> {
        self.0.iter()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl fmt::Display for Tuple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, (c, v)) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{c} -> {v}")?;
        }
        f.write_str("}")
    }
}

/// A set-semantics relation.
///
/// Columns are kept in a positional layout that is an implementation detail:
/// two relations with the same column *set* and the same tuples are equal no
/// matter how their columns are ordered. Rows are shared behind an `Arc`, so
/// cloning and renaming are O(1).
#[derive(Clone)]
pub struct Relation {
    columns: Arc<[Col]>,
    rows: Arc<RowSet>,
}

impl Relation {
    pub fn empty(columns: Vec<Col>) -> Result<Self, AlgebraError> {
        check_distinct(&columns)?;
        Ok(Relation {
            columns: columns.into(),
            rows: Arc::new(RowSet::default()),
        })
    }

    pub fn empty_with_schema(schema: &Schema) -> Self {
        Relation {
            columns: schema.iter().cloned().collect(),
            rows: Arc::new(RowSet::default()),
        }
    }

    /// Builds a relation from positional rows. Every row must have one value
    /// per column; duplicates collapse.
    pub fn from_rows<I>(columns: Vec<Col>, rows: I) -> Result<Self, AlgebraError>
    where
        I: IntoIterator<Item = Row>,
    {
        check_distinct(&columns)?;
        let arity = columns.len();
        let mut set = RowSet::default();
        for row in rows {
            if row.len() != arity {
                return Err(AlgebraError::ArityMismatch {
                    expected: arity,
                    found: row.len(),
                });
            }
            set.insert(row);
        }
        Ok(Relation {
            columns: columns.into(),
            rows: Arc::new(set),
        })
    }

    /// Builds a relation from rows of plain values, in `columns` order.
    pub fn from_values<I, R, V>(columns: &[&str], rows: I) -> Result<Self, AlgebraError>
    where
        I: IntoIterator<Item = R>,
        R: IntoIterator<Item = V>,
        V: Into<Value>,
    {
        let cols = columns.iter().map(|c| Col::new(c)).collect::<Result<Vec<_>, _>>()?;
        let rows = rows
            .into_iter()
            .map(|r| r.into_iter().map(|v| Datum::intern(&v.into())).collect::<Row>());
        Relation::from_rows(cols, rows)
    }

    /// Builds a relation whose schema is `schema` from map-style tuples.
    pub fn from_tuples<I>(schema: &Schema, tuples: I) -> Result<Self, AlgebraError>
    where
        I: IntoIterator<Item = Tuple>,
    {
        let columns: Vec<Col> = schema.iter().cloned().collect();
        let mut set = RowSet::default();
        for t in tuples {
            if t.len() != columns.len() || !columns.iter().all(|c| t.get(c).is_some()) {
                return Err(AlgebraError::TupleSchemaMismatch { tuple: t.to_string() });
            }
            set.insert(columns.iter().map(|c| Datum::intern(t.get(c).unwrap())).collect());
        }
        Ok(Relation {
            columns: columns.into(),
            rows: Arc::new(set),
        })
    }

    /// Wraps an already deduplicated row set. The caller guarantees that each
    /// row has one value per column.
    pub(crate) fn from_set(columns: Arc<[Col]>, rows: RowSet) -> Self {
        debug_assert!(rows.iter().all(|r| r.len() == columns.len()));
        Relation {
            columns,
            rows: Arc::new(rows),
        }
    }

    pub fn columns(&self) -> &[Col] {
        &self.columns
    }

    pub(crate) fn columns_arc(&self) -> &Arc<[Col]> {
        &self.columns
    }

    pub fn schema(&self) -> Schema {
        self.columns.iter().cloned().collect()
    }

    pub fn arity(&self) -> usize {
        self.columns.len()
    }

    pub fn position(&self, c: &Col) -> Option<usize> {
        self.columns.iter().position(|x| x == c)
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn rows(&self) -> &RowSet {
        &self.rows
    }

    pub(crate) fn rows_mut(&mut self) -> &mut RowSet {
        Arc::make_mut(&mut self.rows)
    }

    pub(crate) fn into_rows(self) -> RowSet {
        Arc::try_unwrap(self.rows).unwrap_or_else(|shared| (*shared).clone())
    }

    pub fn tuples(&self) -> impl Iterator<Item = Tuple> + '_ {
        self.rows
            .iter()
            .map(move |r| Tuple(self.columns.iter().cloned().zip(r.iter().map(|d| d.value())).collect()))
    }

    pub fn contains_tuple(&self, t: &Tuple) -> bool {
        if t.len() != self.arity() {
            return false;
        }
        let mut row = Row::with_capacity(self.arity());
        for c in self.columns.iter() {
            match t.get(c) {
                Some(v) => row.push(Datum::intern(v)),
                None => return false,
            }
        }
        self.rows.contains(&row)
    }

    /// Same relation with column `from` relabelled `to`; rows are shared.
    pub fn renamed(&self, from: &Col, to: &Col) -> Result<Relation, AlgebraError> {
        let pos = self
            .position(from)
            .ok_or_else(|| AlgebraError::UnknownColumn(from.clone()))?;
        if self.position(to).is_some() {
            return Err(AlgebraError::DuplicateColumn(to.clone()));
        }
        let mut cols = self.columns.to_vec();
        cols[pos] = to.clone();
        Ok(Relation {
            columns: cols.into(),
            rows: Arc::clone(&self.rows),
        })
    }

    /// Returns this relation laid out in `order`, which must be a permutation
    /// of the relation's columns. Borrows when the layout already matches.
    pub fn aligned_to(&self, order: &[Col]) -> Result<Cow<'_, Relation>, AlgebraError> {
        if *self.columns == *order {
            return Ok(Cow::Borrowed(self));
        }
        let perm = permutation(&self.columns, order)?;
        let rows = self.rows.iter().map(|r| perm.iter().map(|&i| r[i]).collect::<Row>());
        let mut set = row_set_with_capacity(self.len());
        set.extend(rows);
        Ok(Cow::Owned(Relation {
            columns: order.into(),
            rows: Arc::new(set),
        }))
    }

    pub fn union(&self, other: &Relation) -> Result<Relation, AlgebraError> {
        let other = other.aligned_to(&self.columns)?;
        let (big, small) = if self.len() >= other.len() {
            (self, other.as_ref())
        } else {
            (other.as_ref(), self)
        };
        let mut out = big.clone();
        out.rows_mut().extend(small.rows.iter().cloned());
        Ok(out)
    }

    pub fn difference(&self, other: &Relation) -> Result<Relation, AlgebraError> {
        let other = other.aligned_to(&self.columns)?;
        let rows: RowSet = self.rows.iter().filter(|r| !other.rows.contains(*r)).cloned().collect();
        Ok(Relation::from_set(self.columns.clone(), rows))
    }

    /// Rows rendered as values in sorted column order, sorted. Deterministic
    /// across runs; meant for output and debugging, not hot paths.
    pub fn sorted_values(&self) -> (Vec<Col>, Vec<Vec<Value>>) {
        let order: Vec<Col> = self.schema().into_iter().collect();
        let perm = permutation(&self.columns, &order).expect("own schema");
        let mut rows: Vec<Vec<Value>> = self
            .rows
            .iter()
            .map(|r| perm.iter().map(|&i| r[i].value()).collect())
            .collect();
        rows.sort();
        (order, rows)
    }
}

/// `perm[i]` is the position in `from` of `to[i]`.
pub(crate) fn permutation(from: &[Col], to: &[Col]) -> Result<Vec<usize>, AlgebraError> {
    if from.len() != to.len() {
        return Err(AlgebraError::SchemaMismatch {
            left: from.iter().cloned().collect(),
            right: to.iter().cloned().collect(),
        });
    }
    to.iter()
        .map(|c| {
            from.iter()
                .position(|x| x == c)
                .ok_or_else(|| AlgebraError::SchemaMismatch {
                    left: from.iter().cloned().collect(),
                    right: to.iter().cloned().collect(),
                })
        })
        .collect()
}

fn check_distinct(columns: &[Col]) -> Result<(), AlgebraError> {
    let mut seen = BTreeSet::new();
    for c in columns {
        if !seen.insert(c) {
            return Err(AlgebraError::DuplicateColumn(c.clone()));
        }
    }
    Ok(())
}

impl PartialEq for Relation {
    fn eq(&self, other: &Self) -> bool {
        if self.len() != other.len() || self.schema() != other.schema() {
            return false;
        }
        match other.aligned_to(&self.columns) {
            Ok(o) => self.rows.iter().all(|r| o.rows.contains(r)),
            Err(_) => false,
        }
    }
}

impl Eq for Relation {}

impl fmt::Debug for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (cols, rows) = self.sorted_values();
        write!(f, "Relation{cols:?}[")?;
        for (i, r) in rows.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            f.write_str("(")?;
            for (j, v) in r.iter().enumerate() {
                if j > 0 {
                    f.write_str(",")?;
                }
                write!(f, "{v}")?;
            }
            f.write_str(")")?;
        }
        f.write_str("]")
    }
}

/// Named base relations.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Database {
    relations: BTreeMap<String, Relation>,
}

impl Database {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, rel: Relation) -> Option<Relation> {
        self.relations.insert(name.into(), rel)
    }

    pub fn with(mut self, name: impl Into<String>, rel: Relation) -> Self {
        self.insert(name, rel);
        self
    }

    pub fn get(&self, name: &str) -> Option<&Relation> {
        self.relations.get(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Relation)> {
        self.relations.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn len(&self) -> usize {
        self.relations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.relations.is_empty()
    }

    /// Schema environment for [`schema_of`](super::schema_of).
    pub fn schemas(&self) -> BTreeMap<String, Schema> {
        self.relations.iter().map(|(k, v)| (k.clone(), v.schema())).collect()
    }
}
