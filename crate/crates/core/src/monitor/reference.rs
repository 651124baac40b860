use std::collections::BTreeMap;

use crate::expression::{Bindings, REFERENCE_PREFIX};
use crate::model::{Value, ValueType};

/// Key written in a reference file to mark the fallback row.
pub const DEFAULT_ROW_KEY: &str = "*";

/// Baseline values looked up per window, e.g. one row per hour of day.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceTable {
    id: String,
    key_column: String,
    columns: Vec<String>,
    rows: BTreeMap<Value, Vec<Value>>,
    default: Option<Vec<Value>>,
}

/// Integral floats and ints address the same row.
fn normalize(key: &Value) -> Value {
    match key {
        Value::Float(x) if x.fract() == 0.0 && x.abs() < 9.0e15 => Value::Int(*x as i64),
        other => other.clone(),
    }
}

impl ReferenceTable {
    /// `columns` are the value columns, excluding the key column.
    pub fn new(id: impl Into<String>, key_column: impl Into<String>, columns: Vec<String>) -> Self {
        ReferenceTable {
            id: id.into(),
            key_column: key_column.into(),
            columns,
            rows: BTreeMap::new(),
            default: None,
        }
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn key_column(&self) -> &str {
        &self.key_column
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    /// Number of keyed rows, not counting the default row.
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty() && self.default.is_none()
    }

    pub fn has_default(&self) -> bool {
        self.default.is_some()
    }

    /// Adds a row; returns true when it replaced an earlier row with the same key.
    pub fn insert(&mut self, key: &Value, row: Vec<Value>) -> bool {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.insert(normalize(key), row).is_some()
    }

    /// Sets the fallback row; returns true when one was already set.
    pub fn set_default(&mut self, row: Vec<Value>) -> bool {
        self.default.replace(row).is_some()
    }

    /// The row for `key`, falling back to the default row.
    pub fn lookup(&self, key: &Value) -> Option<&[Value]> {
        self.rows
            .get(&normalize(key))
            .or(self.default.as_ref())
            .map(Vec::as_slice)
    }

    /// Binds each column of `row` as `ref_<column>`.
    pub fn bind(&self, row: &[Value], bindings: &mut Bindings) {
        for (name, v) in self.columns.iter().zip(row) {
            bindings.set(&format!("{REFERENCE_PREFIX}{name}"), v.clone());
        }
    }

    /// Binding names and the type observed in each column (`None` when the
    /// column holds mixed types or only Nulls).
    pub fn binding_types(&self) -> Vec<(String, Option<ValueType>)> {
        self.columns
            .iter()
            .enumerate()
            .map(|(i, name)| {
                let mut seen: Option<ValueType> = None;
                let mut mixed = false;
                for row in self.rows.values().chain(self.default.iter()) {
                    match (row[i].value_type(), seen) {
                        (None, _) => {}
                        (Some(t), None) => seen = Some(t),
                        (Some(t), Some(s)) if t == s => {}
                        (Some(t), Some(s)) if t.is_numeric() && s.is_numeric() => seen = Some(ValueType::Float),
                        _ => mixed = true,
                    }
                }
                (format!("{REFERENCE_PREFIX}{name}"), if mixed { None } else { seen })
            })
            .collect()
    }
}
