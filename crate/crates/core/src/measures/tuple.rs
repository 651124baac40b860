//! Element-level checks and their lift to a window fraction.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::expression::{Bindings, Pattern, Program};
use crate::model::{in_range, NullPolicy, StreamElement, Value};

pub fn valid_range(
    e: &StreamElement,
    column: &str,
    lo: &Value,
    hi: &Value,
    lo_inclusive: bool,
    hi_inclusive: bool,
) -> Option<bool> {
    in_range(e.value(column), lo, hi, lo_inclusive, hi_inclusive)
}

pub fn in_set(e: &StreamElement, column: &str, allowed: &BTreeSet<Value>) -> Option<bool> {
    let v = e.value(column);
    (!v.is_null()).then(|| allowed.contains(v))
}

/// Window-level set relation between the observed distinct values and `allowed`.
pub fn distinct_subset(values: &BTreeSet<Value>, allowed: &BTreeSet<Value>, proper: bool) -> bool {
    values.is_subset(allowed) && (!proper || values.len() < allowed.len())
}

/// Full-match regex test; non-text values have no verdict.
pub fn matches_pattern(e: &StreamElement, column: &str, pattern: &Pattern) -> Option<bool> {
    e.value(column).as_str().map(|s| pattern.is_match(s))
}

pub fn conforms(e: &StreamElement, program: &Program) -> Option<bool> {
    program.verdict(Some(e), &Bindings::new())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemaMode {
    /// Every expected column is present.
    #[default]
    Presence,
    /// Column sets are equal.
    PresenceAbsence,
    /// Column sequences are equal.
    PresenceOrder,
}

pub fn schema_conforms(e: &StreamElement, expected: &[String], mode: SchemaMode) -> bool {
    match mode {
        SchemaMode::Presence => expected.iter().all(|c| e.get(c).is_some()),
        SchemaMode::PresenceAbsence => {
            let seen: BTreeSet<&str> = e.column_names().collect();
            let want: BTreeSet<&str> = expected.iter().map(String::as_str).collect();
            seen == want
        }
        SchemaMode::PresenceOrder => e.column_names().eq(expected.iter().map(String::as_str)),
    }
}

/// Applies the null policy to a three-valued verdict: `None` means skipped.
pub fn resolve(verdict: Option<bool>, policy: NullPolicy) -> Option<bool> {
    match (verdict, policy) {
        (Some(b), _) => Some(b),
        (None, NullPolicy::Strict) => Some(false),
        (None, NullPolicy::Lenient) => None,
    }
}

/// Fraction of passing verdicts. Strict policy counts a missing verdict as a
/// failure; lenient policy leaves it out of the denominator. Null when nothing
/// was assessed.
pub fn fraction_passing(verdicts: impl IntoIterator<Item = Option<bool>>, policy: NullPolicy) -> Value {
    let (mut pass, mut total) = (0u64, 0u64);
    for v in verdicts {
        match resolve(v, policy) {
            Some(true) => {
                pass += 1;
                total += 1;
            }
            Some(false) => total += 1,
            None => {}
        }
    }
    if total == 0 {
        Value::Null
    } else {
        Value::Float(pass as f64 / total as f64)
    }
}
