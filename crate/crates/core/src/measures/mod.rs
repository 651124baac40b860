//! Window and element measures. Every measure is a pure function of a closed
//! pane; [`Measure`] is the compiled form a check runs at pane close.

mod stats;
mod tuple;
mod window;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value as Json};

pub use stats::{
    average_ranks, basic_stats, compensated_sum, correlation, length_stats, mean_std, numeric, numeric_column, pearson,
    percentile_sorted, percentiles, z_outlier_count, BasicStats, CorrelationMethod, LengthStats, NeumaierSum,
};
pub use tuple::{
    conforms, distinct_subset, fraction_passing, in_set, matches_pattern, resolve, schema_conforms, valid_range,
    SchemaMode,
};
pub use window::{
    completeness, distinct_approx, distinct_exact, freshness, heavy_hitters, interval_conflicts, match_ratio,
    ordering_violations, out_of_order_count, parses_as, placeholder_report, type_check, uniqueness, volume, Direction,
    FreshnessRef, GapPolicy, HeavyHitter, MissingDef, Mode, PlaceholderReport, SecondaryStream, Uniqueness,
};

use crate::expression::{self, Pattern, Program, TypeEnv};
use crate::model::{Detail, NullPolicy, StreamElement, TimeFormat, Value, ValueType, WindowInstance};
use crate::sketches::{CardinalityEstimator, FrequentItemsSketch};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stat {
    Count,
    Min,
    Max,
    #[default]
    Mean,
    Std,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UniquenessReport {
    Count,
    #[default]
    Ratio,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HitterReport {
    /// Number of heavy hitters.
    #[default]
    Count,
    /// The most frequent item itself.
    Top,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlaceholderMetric {
    Distinct,
    #[default]
    Fraction,
}

fn yes() -> bool {
    true
}

fn default_precision() -> u8 {
    CardinalityEstimator::DEFAULT_PRECISION
}

fn default_capacity() -> usize {
    FrequentItemsSketch::DEFAULT_CAPACITY
}

/// Which measure a check computes, with its options.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum MeasureSpec {
    /// Fraction of elements whose value lies within the bounds.
    ValidRange {
        column: String,
        lo: Value,
        hi: Value,
        #[serde(default = "yes")]
        lo_inclusive: bool,
        #[serde(default = "yes")]
        hi_inclusive: bool,
    },
    /// Whether the pane's distinct values form a (proper) subset of `allowed`.
    InSet {
        column: String,
        allowed: Vec<Value>,
        #[serde(default)]
        proper: bool,
    },
    /// Fraction of text values fully matching `regex`.
    MatchesPattern {
        column: String,
        regex: String,
    },
    /// Fraction of elements for which `expr` holds.
    Conforms {
        expr: String,
    },
    BasicStats {
        column: String,
        #[serde(default)]
        stat: Stat,
    },
    ZOutlierCount {
        column: String,
        z: f64,
    },
    Completeness {
        column: String,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        placeholders: Vec<String>,
        #[serde(default)]
        empty_is_missing: bool,
    },
    DistinctCount {
        column: String,
        #[serde(default)]
        mode: Mode,
        #[serde(default = "default_precision")]
        precision: u8,
    },
    Uniqueness {
        column: String,
        #[serde(default)]
        report: UniquenessReport,
    },
    HeavyHitters {
        column: String,
        #[serde(default)]
        mode: Mode,
        #[serde(default = "default_capacity")]
        k: usize,
        phi: f64,
        #[serde(default)]
        report: HitterReport,
    },
    /// Reports the first point as the value; all points go to the detail.
    Percentiles {
        column: String,
        points: Vec<f64>,
    },
    LengthStats {
        column: String,
        #[serde(default)]
        stat: Stat,
    },
    OrderingViolations {
        column: String,
        #[serde(default)]
        direction: Direction,
        #[serde(default)]
        strict: bool,
    },
    IntervalConflicts {
        start: String,
        end: String,
        #[serde(default)]
        policy: GapPolicy,
    },
    /// Out-of-order arrivals by event time, or by `field` when given.
    OutOfOrderCount {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        field: Option<String>,
    },
    /// Milliseconds since the newest event.
    Freshness {
        #[serde(default)]
        reference: FreshnessRef,
    },
    Volume {},
    Correlation {
        a: String,
        b: String,
        #[serde(default = "pearson_method")]
        method: CorrelationMethod,
    },
    /// Whether every element carries the expected columns.
    SchemaCheck {
        expected: Vec<String>,
        #[serde(default)]
        mode: SchemaMode,
    },
    /// Fraction of non-Null values readable as `expected`.
    TypeCheck {
        column: String,
        expected: ValueType,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        formats: Vec<TimeFormat>,
    },
    PlaceholderReport {
        column: String,
        tokens: Vec<String>,
        #[serde(default)]
        report: PlaceholderMetric,
    },
    /// Fraction of elements whose `column` value occurs in the same pane of
    /// the secondary stream `stream`.
    MatchRatio {
        column: String,
        stream: String,
    },
}

fn pearson_method() -> CorrelationMethod {
    CorrelationMethod::Pearson
}

impl MeasureSpec {
    pub fn name(&self) -> &'static str {
        match self {
            MeasureSpec::ValidRange { .. } => "valid_range",
            MeasureSpec::InSet { .. } => "in_set",
            MeasureSpec::MatchesPattern { .. } => "matches_pattern",
            MeasureSpec::Conforms { .. } => "conforms",
            MeasureSpec::BasicStats { .. } => "basic_stats",
            MeasureSpec::ZOutlierCount { .. } => "z_outlier_count",
            MeasureSpec::Completeness { .. } => "completeness",
            MeasureSpec::DistinctCount { .. } => "distinct_count",
            MeasureSpec::Uniqueness { .. } => "uniqueness",
            MeasureSpec::HeavyHitters { .. } => "heavy_hitters",
            MeasureSpec::Percentiles { .. } => "percentiles",
            MeasureSpec::LengthStats { .. } => "length_stats",
            MeasureSpec::OrderingViolations { .. } => "ordering_violations",
            MeasureSpec::IntervalConflicts { .. } => "interval_conflicts",
            MeasureSpec::OutOfOrderCount { .. } => "out_of_order_count",
            MeasureSpec::Freshness { .. } => "freshness",
            MeasureSpec::Volume {} => "volume",
            MeasureSpec::Correlation { .. } => "correlation",
            MeasureSpec::SchemaCheck { .. } => "schema_check",
            MeasureSpec::TypeCheck { .. } => "type_check",
            MeasureSpec::PlaceholderReport { .. } => "placeholder_report",
            MeasureSpec::MatchRatio { .. } => "match_ratio",
        }
    }

    /// Columns the measure reads directly (expression fields excluded).
    pub fn columns(&self) -> Vec<&str> {
        match self {
            MeasureSpec::ValidRange { column, .. }
            | MeasureSpec::InSet { column, .. }
            | MeasureSpec::MatchesPattern { column, .. }
            | MeasureSpec::BasicStats { column, .. }
            | MeasureSpec::ZOutlierCount { column, .. }
            | MeasureSpec::Completeness { column, .. }
            | MeasureSpec::DistinctCount { column, .. }
            | MeasureSpec::Uniqueness { column, .. }
            | MeasureSpec::HeavyHitters { column, .. }
            | MeasureSpec::Percentiles { column, .. }
            | MeasureSpec::LengthStats { column, .. }
            | MeasureSpec::OrderingViolations { column, .. }
            | MeasureSpec::TypeCheck { column, .. }
            | MeasureSpec::PlaceholderReport { column, .. }
            | MeasureSpec::MatchRatio { column, .. } => vec![column],
            MeasureSpec::IntervalConflicts { start, end, .. } => vec![start, end],
            MeasureSpec::Correlation { a, b, .. } => vec![a, b],
            MeasureSpec::OutOfOrderCount { field } => field.iter().map(String::as_str).collect(),
            MeasureSpec::Conforms { .. }
            | MeasureSpec::Freshness { .. }
            | MeasureSpec::Volume {}
            | MeasureSpec::SchemaCheck { .. } => vec![],
        }
    }

    /// Whether the measure has a per-element verdict.
    pub fn is_tuple(&self) -> bool {
        matches!(
            self,
            MeasureSpec::ValidRange { .. }
                | MeasureSpec::InSet { .. }
                | MeasureSpec::MatchesPattern { .. }
                | MeasureSpec::Conforms { .. }
                | MeasureSpec::SchemaCheck { .. }
                | MeasureSpec::TypeCheck { .. }
        )
    }

    /// Type of the reported value; `None` when it follows an untyped column.
    pub fn value_type(&self, schema: &BTreeMap<String, ValueType>) -> Option<ValueType> {
        use ValueType::{Bool, Float, Int};
        let col = |c: &String| schema.get(c).copied();
        match self {
            MeasureSpec::InSet { .. } | MeasureSpec::SchemaCheck { .. } => Some(Bool),
            MeasureSpec::BasicStats { column, stat } => match stat {
                Stat::Count => Some(Int),
                Stat::Min | Stat::Max => col(column),
                Stat::Mean | Stat::Std => Some(Float),
            },
            MeasureSpec::LengthStats { stat, .. } => match stat {
                Stat::Count | Stat::Min | Stat::Max => Some(Int),
                Stat::Mean | Stat::Std => Some(Float),
            },
            MeasureSpec::DistinctCount { mode: Mode::Exact, .. } => Some(Int),
            MeasureSpec::Uniqueness {
                report: UniquenessReport::Count,
                ..
            } => Some(Int),
            MeasureSpec::HeavyHitters { report, column, .. } => match report {
                HitterReport::Count => Some(Int),
                HitterReport::Top => col(column),
            },
            MeasureSpec::PlaceholderReport {
                report: PlaceholderMetric::Distinct,
                ..
            } => Some(Int),
            MeasureSpec::ZOutlierCount { .. }
            | MeasureSpec::OrderingViolations { .. }
            | MeasureSpec::IntervalConflicts { .. }
            | MeasureSpec::OutOfOrderCount { .. }
            | MeasureSpec::Freshness { .. }
            | MeasureSpec::Volume {} => Some(Int),
            _ => Some(Float),
        }
    }
}

/// v_m plus an optional structured payload.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasureResult {
    pub value: Value,
    pub detail: Option<Detail>,
}

impl MeasureResult {
    pub fn plain(value: Value) -> Self {
        MeasureResult { value, detail: None }
    }

    fn with(value: Value, detail: Json) -> Self {
        let Json::Object(map) = detail else {
            unreachable!("detail is always an object")
        };
        MeasureResult {
            value,
            detail: Some(map),
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{0}")]
pub struct MeasureError(pub String);

fn bad<T>(msg: impl Into<String>) -> Result<T, MeasureError> {
    Err(MeasureError(msg.into()))
}

#[derive(Debug, Clone)]
enum Compiled {
    Plain,
    Pattern(Pattern),
    Program(Program),
    Set(BTreeSet<Value>),
    Formats(Vec<TimeFormat>),
}

/// A validated measure with its regexes and expressions compiled.
#[derive(Debug, Clone)]
pub struct Measure {
    spec: MeasureSpec,
    compiled: Compiled,
    hash_seed: u64,
}

/// Per-evaluation inputs beyond the pane itself.
#[derive(Debug, Clone, Copy, Default)]
pub struct EvalEnv<'a> {
    pub null_policy: NullPolicy,
    /// Secondary pane for `match_ratio`.
    pub secondary: Option<&'a [StreamElement]>,
}

fn unit_interval(x: f64) -> bool {
    (0.0..=1.0).contains(&x)
}

impl Measure {
    /// Validates options and compiles patterns and expressions.
    pub fn compile(spec: &MeasureSpec, hash_seed: u64) -> Result<Measure, MeasureError> {
        let compiled = match spec {
            MeasureSpec::ValidRange { lo, hi, .. } => match lo.num_cmp(hi) {
                None => return bad(format!("range bounds {lo} and {hi} are not comparable")),
                Some(std::cmp::Ordering::Greater) => {
                    return bad(format!("range lower bound {lo} exceeds upper bound {hi}"))
                }
                Some(_) if matches!(lo, Value::Text(_) | Value::Bool(_)) => {
                    return bad("range bounds must be numbers or timestamps")
                }
                Some(_) => Compiled::Plain,
            },
            MeasureSpec::InSet { allowed, .. } => {
                if allowed.is_empty() {
                    return bad("allowed set must not be empty");
                }
                Compiled::Set(allowed.iter().cloned().collect())
            }
            MeasureSpec::MatchesPattern { regex, .. } => {
                Compiled::Pattern(Pattern::new(regex).map_err(|e| MeasureError(format!("invalid regex: {e}")))?)
            }
            MeasureSpec::Conforms { expr } => {
                let tree = expression::parse(expr).map_err(|e| MeasureError(format!("invalid expression: {e}")))?;
                Compiled::Program(Program::compile(&tree))
            }
            MeasureSpec::ZOutlierCount { z, .. } => {
                if !(z.is_finite() && *z >= 0.0) {
                    return bad(format!("z must be a non-negative number, got {z}"));
                }
                Compiled::Plain
            }
            MeasureSpec::DistinctCount { precision, .. } => {
                CardinalityEstimator::new(*precision).map_err(|e| MeasureError(e.to_string()))?;
                Compiled::Plain
            }
            MeasureSpec::HeavyHitters { k, phi, .. } => {
                if *k == 0 {
                    return bad("k must be positive");
                }
                if !(*phi > 0.0 && *phi <= 1.0) {
                    return bad(format!("phi {phi} is outside (0, 1]"));
                }
                Compiled::Plain
            }
            MeasureSpec::Percentiles { points, .. } => {
                if points.is_empty() {
                    return bad("percentile points must not be empty");
                }
                if let Some(q) = points.iter().find(|q| !unit_interval(**q)) {
                    return bad(format!("percentile point {q} is outside [0, 1]"));
                }
                Compiled::Plain
            }
            MeasureSpec::SchemaCheck { expected, .. } => {
                if expected.is_empty() {
                    return bad("expected column list must not be empty");
                }
                Compiled::Plain
            }
            MeasureSpec::TypeCheck { formats, .. } => Compiled::Formats(if formats.is_empty() {
                TimeFormat::defaults()
            } else {
                formats.clone()
            }),
            MeasureSpec::PlaceholderReport { tokens, .. } => {
                if tokens.is_empty() {
                    return bad("placeholder tokens must not be empty");
                }
                Compiled::Plain
            }
            _ => Compiled::Plain,
        };
        Ok(Measure {
            spec: spec.clone(),
            compiled,
            hash_seed,
        })
    }

    pub fn spec(&self) -> &MeasureSpec {
        &self.spec
    }

    pub fn is_tuple(&self) -> bool {
        self.spec.is_tuple()
    }

    /// Checks expression fields against the declared columns.
    pub fn typecheck(&self, schema: &BTreeMap<String, ValueType>) -> Result<(), MeasureError> {
        if let MeasureSpec::Conforms { expr } = &self.spec {
            let tree = expression::parse(expr).map_err(|e| MeasureError(format!("invalid expression: {e}")))?;
            expression::check_predicate(&tree, &TypeEnv::for_rows(schema.clone()))
                .map_err(|e| MeasureError(format!("expression `{expr}`: {e}")))?;
        }
        Ok(())
    }

    /// Three-valued verdict for one element; `None` for window-only measures
    /// and for elements the measure cannot assess.
    pub fn element_verdict(&self, e: &StreamElement) -> Option<bool> {
        match (&self.spec, &self.compiled) {
            (
                MeasureSpec::ValidRange {
                    column,
                    lo,
                    hi,
                    lo_inclusive,
                    hi_inclusive,
                },
                _,
            ) => valid_range(e, column, lo, hi, *lo_inclusive, *hi_inclusive),
            (MeasureSpec::InSet { column, .. }, Compiled::Set(allowed)) => in_set(e, column, allowed),
            (MeasureSpec::MatchesPattern { column, .. }, Compiled::Pattern(p)) => matches_pattern(e, column, p),
            (MeasureSpec::Conforms { .. }, Compiled::Program(p)) => conforms(e, p),
            (MeasureSpec::SchemaCheck { expected, mode }, _) => Some(schema_conforms(e, expected, *mode)),
            (MeasureSpec::TypeCheck { column, expected, .. }, Compiled::Formats(f)) => {
                let v = e.value(column);
                (!v.is_null()).then(|| parses_as(v, *expected, f))
            }
            _ => None,
        }
    }

    /// The attribute a per-element record reports as its value.
    pub fn element_value(&self, e: &StreamElement) -> Value {
        match &self.spec {
            MeasureSpec::ValidRange { column, .. }
            | MeasureSpec::InSet { column, .. }
            | MeasureSpec::MatchesPattern { column, .. }
            | MeasureSpec::TypeCheck { column, .. } => e.value(column).clone(),
            _ => Value::Null,
        }
    }

    /// Computes v_m over a closed pane.
    pub fn evaluate(&self, w: &WindowInstance, env: &EvalEnv<'_>) -> MeasureResult {
        match &self.spec {
            MeasureSpec::ValidRange { .. }
            | MeasureSpec::MatchesPattern { .. }
            | MeasureSpec::Conforms { .. }
            | MeasureSpec::TypeCheck { .. } => {
                let verdicts = w.elements.iter().map(|e| self.element_verdict(e));
                if let MeasureSpec::TypeCheck { column, expected, .. } = &self.spec {
                    let Compiled::Formats(f) = &self.compiled else {
                        unreachable!()
                    };
                    return MeasureResult::plain(type_check(w, column, *expected, f));
                }
                MeasureResult::plain(fraction_passing(verdicts, env.null_policy))
            }
            MeasureSpec::InSet { column, proper, .. } => {
                let Compiled::Set(allowed) = &self.compiled else {
                    unreachable!()
                };
                let observed: BTreeSet<Value> = w.values(column).filter(|v| !v.is_null()).cloned().collect();
                let ok = distinct_subset(&observed, allowed, *proper);
                let unexpected: Vec<Json> = observed.difference(allowed).take(20).map(Value::to_json).collect();
                let fraction = fraction_passing(w.elements.iter().map(|e| self.element_verdict(e)), env.null_policy);
                MeasureResult::with(
                    Value::Bool(ok),
                    json!({"fraction": fraction.to_json(), "distinct": observed.len(), "unexpected": unexpected}),
                )
            }
            MeasureSpec::SchemaCheck { .. } => {
                let failing: Vec<u64> = w
                    .elements
                    .iter()
                    .filter(|e| self.element_verdict(e) == Some(false))
                    .map(|e| e.arrival_seq)
                    .collect();
                let shown: Vec<u64> = failing.iter().copied().take(20).collect();
                MeasureResult::with(
                    Value::Bool(failing.is_empty()),
                    json!({"violations": failing.len(), "element_refs": shown}),
                )
            }
            MeasureSpec::BasicStats { column, stat } => {
                let s = basic_stats(w, column);
                let value = match stat {
                    Stat::Count => Value::Int(s.count),
                    Stat::Min => s.min.clone(),
                    Stat::Max => s.max.clone(),
                    Stat::Mean => s.mean.clone(),
                    Stat::Std => s.std.clone(),
                };
                MeasureResult::with(
                    value,
                    json!({"count": s.count, "min": s.min.to_json(), "max": s.max.to_json(),
                           "mean": s.mean.to_json(), "std": s.std.to_json()}),
                )
            }
            MeasureSpec::ZOutlierCount { column, z } => {
                MeasureResult::plain(Value::Int(z_outlier_count(w, column, *z)))
            }
            MeasureSpec::Completeness {
                column,
                placeholders,
                empty_is_missing,
            } => {
                let def = MissingDef {
                    placeholders: placeholders.clone(),
                    empty_is_missing: *empty_is_missing,
                };
                MeasureResult::plain(completeness(w, column, &def))
            }
            MeasureSpec::DistinctCount {
                column,
                mode,
                precision,
            } => match mode {
                Mode::Exact => MeasureResult::plain(Value::Int(distinct_exact(w, column))),
                Mode::Approx => MeasureResult::plain(
                    distinct_approx(w, column, *precision, self.hash_seed).map_or(Value::Null, Value::float),
                ),
            },
            MeasureSpec::Uniqueness { column, report } => {
                let u = uniqueness(w, column);
                let value = match report {
                    UniquenessReport::Count => Value::Int(u.unique_count),
                    UniquenessReport::Ratio => u.ratio.clone(),
                };
                MeasureResult::with(
                    value,
                    json!({"unique_count": u.unique_count, "ratio": u.ratio.to_json()}),
                )
            }
            MeasureSpec::HeavyHitters {
                column,
                mode,
                k,
                phi,
                report,
            } => {
                let hitters = heavy_hitters(w, column, *mode, *k, *phi).unwrap_or_default();
                let value = match report {
                    HitterReport::Count => Value::Int(hitters.len() as i64),
                    HitterReport::Top => hitters.first().map_or(Value::Null, |h| h.item.clone()),
                };
                let items: Vec<Json> = hitters
                    .iter()
                    .map(|h| json!({"item": h.item.to_json(), "count_lo": h.lower, "count_hi": h.upper}))
                    .collect();
                MeasureResult::with(value, json!({ "items": items }))
            }
            MeasureSpec::Percentiles { column, points } => {
                let vals = percentiles(w, column, points);
                let listed: Vec<Json> = points
                    .iter()
                    .zip(&vals)
                    .map(|(q, v)| json!({"q": q, "value": v.to_json()}))
                    .collect();
                MeasureResult::with(vals[0].clone(), json!({ "points": listed }))
            }
            MeasureSpec::LengthStats { column, stat } => {
                let s = length_stats(w, column);
                let value = match stat {
                    Stat::Count => Value::Int(w.values(column).filter(|v| v.as_str().is_some()).count() as i64),
                    Stat::Min => s.min.clone(),
                    Stat::Max => s.max.clone(),
                    Stat::Mean => s.mean.clone(),
                    Stat::Std => s.std.clone(),
                };
                MeasureResult::with(
                    value,
                    json!({"min": s.min.to_json(), "max": s.max.to_json(), "mean": s.mean.to_json(), "std": s.std.to_json()}),
                )
            }
            MeasureSpec::OrderingViolations {
                column,
                direction,
                strict,
            } => MeasureResult::plain(Value::Int(ordering_violations(w, column, *direction, *strict))),
            MeasureSpec::IntervalConflicts { start, end, policy } => {
                MeasureResult::plain(Value::Int(interval_conflicts(w, start, end, *policy)))
            }
            MeasureSpec::OutOfOrderCount { field } => {
                MeasureResult::plain(Value::Int(out_of_order_count(w, field.as_deref())))
            }
            MeasureSpec::Freshness { reference } => MeasureResult::plain(freshness(w, *reference)),
            MeasureSpec::Volume {} => MeasureResult::plain(Value::Int(volume(w))),
            MeasureSpec::Correlation { a, b, method } => MeasureResult::plain(correlation(w, a, b, *method)),
            MeasureSpec::PlaceholderReport { column, tokens, report } => {
                let r = placeholder_report(w, column, tokens);
                let value = match report {
                    PlaceholderMetric::Distinct => Value::Int(r.distinct_present),
                    PlaceholderMetric::Fraction => r.fraction.clone(),
                };
                MeasureResult::with(
                    value,
                    json!({"distinct_placeholders_present": r.distinct_present, "placeholder_fraction": r.fraction.to_json()}),
                )
            }
            MeasureSpec::MatchRatio { column, .. } => {
                MeasureResult::plain(match_ratio(w, env.secondary.unwrap_or(&[]), column))
            }
        }
    }
}
