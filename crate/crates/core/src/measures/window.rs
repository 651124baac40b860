//! Measures that need the whole pane.

use std::cmp::Ordering;
use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::model::{StreamElement, TimeFormat, Timestamp, Value, ValueType, WindowInstance};
use crate::sketches::{CardinalityEstimator, FrequentItemsSketch, SketchError};

/// What counts as missing besides Null.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct MissingDef {
    pub placeholders: Vec<String>,
    pub empty_is_missing: bool,
}

impl MissingDef {
    pub fn is_missing(&self, v: &Value) -> bool {
        match v {
            Value::Null => true,
            Value::Text(s) if self.empty_is_missing && s.trim().is_empty() => true,
            _ if self.placeholders.is_empty() => false,
            other => {
                let text = other.to_string();
                self.placeholders.contains(&text)
            }
        }
    }
}

/// Fraction of elements whose `column` is present; Null on an empty pane.
pub fn completeness(w: &WindowInstance, column: &str, missing: &MissingDef) -> Value {
    if w.is_empty() {
        return Value::Null;
    }
    let present = w.values(column).filter(|v| !missing.is_missing(v)).count();
    Value::Float(present as f64 / w.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    Exact,
    Approx,
}

pub fn distinct_exact(w: &WindowInstance, column: &str) -> i64 {
    w.values(column).filter(|v| !v.is_null()).collect::<HashSet<_>>().len() as i64
}

pub fn distinct_approx(w: &WindowInstance, column: &str, precision: u8, seed: u64) -> Result<f64, SketchError> {
    let mut est = CardinalityEstimator::with_seed(precision, seed)?;
    w.values(column).for_each(|v| est.insert(v));
    Ok(est.estimate())
}

fn histogram<'a>(w: &'a WindowInstance, column: &'a str) -> HashMap<&'a Value, u64> {
    let mut h = HashMap::new();
    for v in w.values(column).filter(|v| !v.is_null()) {
        *h.entry(v).or_insert(0) += 1;
    }
    h
}

#[derive(Debug, Clone, PartialEq)]
pub struct Uniqueness {
    pub unique_count: i64,
    pub ratio: Value,
}

/// Values occurring exactly once, and their share of the non-Null values.
pub fn uniqueness(w: &WindowInstance, column: &str) -> Uniqueness {
    let h = histogram(w, column);
    let n: u64 = h.values().sum();
    let unique = h.values().filter(|&&c| c == 1).count() as i64;
    Uniqueness {
        unique_count: unique,
        ratio: if n == 0 {
            Value::Null
        } else {
            Value::Float(unique as f64 / n as f64)
        },
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeavyHitter {
    pub item: Value,
    pub lower: u64,
    pub upper: u64,
}

/// Items whose count reaches `phi` times the number of non-Null values,
/// most frequent first.
pub fn heavy_hitters(
    w: &WindowInstance,
    column: &str,
    mode: Mode,
    k: usize,
    phi: f64,
) -> Result<Vec<HeavyHitter>, SketchError> {
    if !(phi > 0.0 && phi <= 1.0) {
        return Err(SketchError::Phi(phi));
    }
    match mode {
        Mode::Exact => {
            let h = histogram(w, column);
            let cut = phi * h.values().sum::<u64>() as f64;
            let mut out: Vec<HeavyHitter> = h
                .into_iter()
                .filter(|&(_, c)| c as f64 >= cut)
                .map(|(v, c)| HeavyHitter {
                    item: v.clone(),
                    lower: c,
                    upper: c,
                })
                .collect();
            out.sort_by(|a, b| b.upper.cmp(&a.upper).then_with(|| a.item.cmp(&b.item)));
            Ok(out)
        }
        Mode::Approx => {
            let mut sk = FrequentItemsSketch::new(k)?;
            w.values(column).filter(|v| !v.is_null()).for_each(|v| sk.insert(v));
            Ok(sk
                .query(phi, sk.total())?
                .into_iter()
                .map(|f| HeavyHitter {
                    item: f.item,
                    lower: f.lower,
                    upper: f.upper,
                })
                .collect())
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    #[default]
    Increasing,
    Decreasing,
}

/// Adjacent pairs breaking monotonicity, scanning in window order. A Null
/// counts as one violation and restarts the chain.
pub fn ordering_violations(w: &WindowInstance, column: &str, direction: Direction, strict: bool) -> i64 {
    let mut prev: Option<&Value> = None;
    let mut violations = 0;
    for v in w.values(column) {
        if v.is_null() {
            violations += 1;
            prev = None;
            continue;
        }
        if let Some(p) = prev {
            let ok = match (p.num_cmp(v), direction) {
                (None, _) => false,
                (Some(o), Direction::Increasing) => o == Ordering::Less || (!strict && o == Ordering::Equal),
                (Some(o), Direction::Decreasing) => o == Ordering::Greater || (!strict && o == Ordering::Equal),
            };
            if !ok {
                violations += 1;
            }
        }
        prev = Some(v);
    }
    violations
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GapPolicy {
    /// Only overlaps are violations.
    #[default]
    Allowed,
    /// Consecutive intervals must abut or overlap; uncovered time is a violation.
    Disallowed,
    /// Consecutive intervals must be separated by a positive gap.
    Required,
}

fn orderable(v: &Value) -> bool {
    matches!(v, Value::Int(_) | Value::Float(_) | Value::Timestamp(_))
}

/// Sweep over intervals sorted by start, tracking the furthest end seen.
/// Rows with a Null or inverted interval count one violation each.
pub fn interval_conflicts(w: &WindowInstance, start_col: &str, end_col: &str, policy: GapPolicy) -> i64 {
    let mut violations = 0;
    let mut rows: Vec<(&Value, &Value)> = Vec::with_capacity(w.len());
    for e in &w.elements {
        let (s, t) = (e.value(start_col), e.value(end_col));
        match (orderable(s) && orderable(t)).then(|| s.num_cmp(t)).flatten() {
            Some(Ordering::Less | Ordering::Equal) => rows.push((s, t)),
            _ => violations += 1,
        }
    }
    rows.sort_by(|a, b| {
        a.0.num_cmp(b.0)
            .unwrap_or_else(|| a.0.cmp(b.0))
            .then_with(|| a.1.num_cmp(b.1).unwrap_or_else(|| a.1.cmp(b.1)))
    });
    let mut max_end: Option<&Value> = None;
    for (s, t) in rows {
        if let Some(m) = max_end {
            match s.num_cmp(m) {
                Some(Ordering::Less) => violations += 1,
                Some(Ordering::Greater) if policy == GapPolicy::Disallowed => violations += 1,
                Some(Ordering::Equal) if policy == GapPolicy::Required => violations += 1,
                None => violations += 1,
                _ => {}
            }
        }
        if max_end.is_none_or(|m| t.num_cmp(m) == Some(Ordering::Greater)) {
            max_end = Some(t);
        }
    }
    violations
}

/// Elements, in arrival order, whose field is below the running maximum.
/// `field = None` uses the event time.
pub fn out_of_order_count(w: &WindowInstance, field: Option<&str>) -> i64 {
    let mut order: Vec<&StreamElement> = w.elements.iter().map(|e| &**e).collect();
    order.sort_by_key(|e| e.arrival_seq);
    let mut max: Option<Value> = None;
    let mut count = 0;
    for e in order {
        let v = match field {
            None => Value::Timestamp(e.event_time),
            Some(f) => e.value(f).clone(),
        };
        if v.is_null() {
            continue;
        }
        match max.as_ref().and_then(|m| v.num_cmp(m)) {
            Some(Ordering::Less) => count += 1,
            Some(Ordering::Greater) => max = Some(v),
            None if max.is_none() => max = Some(v),
            _ => {}
        }
    }
    count
}

/// Reference point for freshness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FreshnessRef {
    /// The pane's end bound.
    #[default]
    WindowEnd,
    /// A fixed instant.
    Fixed(Timestamp),
    /// The wall clock at measurement time.
    System,
}

impl Serialize for FreshnessRef {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            FreshnessRef::WindowEnd => s.serialize_str("window_end"),
            FreshnessRef::System => s.serialize_str("system"),
            FreshnessRef::Fixed(t) => s.serialize_str(&t.to_iso()),
        }
    }
}

impl<'de> Deserialize<'de> for FreshnessRef {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        match s.as_str() {
            "window_end" => Ok(FreshnessRef::WindowEnd),
            "system" => Ok(FreshnessRef::System),
            other => Timestamp::parse_iso(other).map(FreshnessRef::Fixed).ok_or_else(|| {
                serde::de::Error::custom(format!(
                    "freshness reference must be `window_end`, `system` or an ISO-8601 timestamp, got `{other}`"
                ))
            }),
        }
    }
}

/// Milliseconds between the reference and the newest event; Null when empty.
pub fn freshness(w: &WindowInstance, reference: FreshnessRef) -> Value {
    let Some(newest) = w.elements.iter().map(|e| e.event_time).max() else {
        return Value::Null;
    };
    let r = match reference {
        FreshnessRef::WindowEnd => w.end(),
        FreshnessRef::Fixed(t) => t,
        FreshnessRef::System => Timestamp::from_millis(chrono::Utc::now().timestamp_millis()),
    };
    Value::Int(r.millis_since(newest))
}

pub fn volume(w: &WindowInstance) -> i64 {
    w.len() as i64
}

/// Whether a non-Null value can be read as `expected`.
pub fn parses_as(v: &Value, expected: ValueType, formats: &[TimeFormat]) -> bool {
    match (expected, v) {
        (ValueType::Int, Value::Int(_)) => true,
        (ValueType::Int, Value::Text(s)) => s.trim().parse::<i64>().is_ok(),
        (ValueType::Float, Value::Int(_) | Value::Float(_)) => true,
        (ValueType::Float, Value::Text(s)) => s.trim().parse::<f64>().is_ok_and(f64::is_finite),
        (ValueType::Bool, Value::Bool(_)) => true,
        (ValueType::Bool, Value::Text(s)) => {
            let s = s.trim();
            s.eq_ignore_ascii_case("true") || s.eq_ignore_ascii_case("false")
        }
        (ValueType::Timestamp, Value::Timestamp(_)) => true,
        (ValueType::Timestamp, Value::Text(s)) => Timestamp::parse_with(s.trim(), formats).is_some(),
        (ValueType::Text, Value::Text(_)) => true,
        _ => false,
    }
}

/// Fraction of non-Null values readable as `expected`; Null when there are none.
pub fn type_check(w: &WindowInstance, column: &str, expected: ValueType, formats: &[TimeFormat]) -> Value {
    let (mut ok, mut n) = (0u64, 0u64);
    for v in w.values(column).filter(|v| !v.is_null()) {
        n += 1;
        if parses_as(v, expected, formats) {
            ok += 1;
        }
    }
    if n == 0 {
        Value::Null
    } else {
        Value::Float(ok as f64 / n as f64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlaceholderReport {
    pub distinct_present: i64,
    pub fraction: Value,
}

/// Which placeholder tokens occur, and the share of non-Null values that are placeholders.
pub fn placeholder_report(w: &WindowInstance, column: &str, tokens: &[String]) -> PlaceholderReport {
    let mut seen = vec![false; tokens.len()];
    let (mut hits, mut n) = (0u64, 0u64);
    for v in w.values(column).filter(|v| !v.is_null()) {
        n += 1;
        let text = v.to_string();
        if let Some(i) = tokens.iter().position(|t| *t == text) {
            seen[i] = true;
            hits += 1;
        }
    }
    PlaceholderReport {
        distinct_present: seen.iter().filter(|&&s| s).count() as i64,
        fraction: if n == 0 {
            Value::Null
        } else {
            Value::Float(hits as f64 / n as f64)
        },
    }
}

/// A secondary stream held in event-time order for pane-aligned lookups.
#[derive(Debug, Clone, Default)]
pub struct SecondaryStream {
    elements: Vec<StreamElement>,
}

impl SecondaryStream {
    pub fn new(mut elements: Vec<StreamElement>) -> Self {
        elements.sort_by_key(StreamElement::order_key);
        SecondaryStream { elements }
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    /// Elements with `start <= event_time < end`.
    pub fn pane(&self, start: Timestamp, end: Timestamp) -> &[StreamElement] {
        let lo = self.elements.partition_point(|e| e.event_time < start);
        let hi = self.elements.partition_point(|e| e.event_time < end);
        &self.elements[lo..hi.max(lo)]
    }
}

/// Fraction of primary elements whose join key occurs in the secondary pane
/// with the same bounds; Null when the primary pane is empty.
pub fn match_ratio(w: &WindowInstance, secondary: &[StreamElement], join_key: &str) -> Value {
    if w.is_empty() {
        return Value::Null;
    }
    let keys: HashSet<&Value> = secondary
        .iter()
        .map(|e| e.value(join_key))
        .filter(|v| !v.is_null())
        .collect();
    let hits = w.values(join_key).filter(|v| !v.is_null() && keys.contains(v)).count();
    Value::Float(hits as f64 / w.len() as f64)
}
