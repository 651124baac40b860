use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::Value as Json;

use super::{Span, Value};
use crate::expression::{self, Bindings, ParseError, Program};
use crate::measures::MeasureSpec;

/// One quality check of a suite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckDefinition {
    pub id: String,
    pub measure: MeasureSpec,
    pub constraint: ConstraintSpec,
    /// Partition attribute; the check runs once per key value.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub key_by: Option<String>,
    /// Rolling context over prior windows of the same check and key.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub context: Option<ContextSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<ReferenceBinding>,
    /// Also emit one record per failing element.
    #[serde(default)]
    pub emit_per_element: bool,
    #[serde(default)]
    pub null_policy: NullPolicy,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContextSpec {
    pub horizon: Span,
}

/// Binds a check to a reference table; `lookup` is an expression over
/// `window_start` / `window_end` producing the row key, e.g. `hour_of(window_start)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceBinding {
    pub table: String,
    pub lookup: String,
}

/// What a `Null` verdict means: fail (strict) or not assessed (lenient).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NullPolicy {
    #[default]
    Strict,
    Lenient,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CompareOp {
    Lt,
    Le,
    Eq,
    Ge,
    Gt,
    Ne,
}

impl CompareOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CompareOp::Lt => "<",
            CompareOp::Le => "<=",
            CompareOp::Eq => "=",
            CompareOp::Ge => ">=",
            CompareOp::Gt => ">",
            CompareOp::Ne => "!=",
        }
    }

    pub fn parse(s: &str) -> Option<CompareOp> {
        Some(match s {
            "<" => CompareOp::Lt,
            "<=" | "≤" => CompareOp::Le,
            "=" | "==" => CompareOp::Eq,
            ">=" | "≥" => CompareOp::Ge,
            ">" => CompareOp::Gt,
            "!=" | "<>" | "≠" => CompareOp::Ne,
            _ => return None,
        })
    }

    pub fn holds(self, ord: Ordering) -> bool {
        match self {
            CompareOp::Lt => ord == Ordering::Less,
            CompareOp::Le => ord != Ordering::Greater,
            CompareOp::Eq => ord == Ordering::Equal,
            CompareOp::Ge => ord != Ordering::Less,
            CompareOp::Gt => ord == Ordering::Greater,
            CompareOp::Ne => ord != Ordering::Equal,
        }
    }

    pub fn is_equality(self) -> bool {
        matches!(self, CompareOp::Eq | CompareOp::Ne)
    }

    /// Splits a leading operator off `s`, longest match first.
    fn split_prefix(s: &str) -> Option<(CompareOp, &str)> {
        for sym in ["<=", ">=", "==", "!=", "<>", "≤", "≥", "≠", "<", ">", "="] {
            if let Some(rest) = s.strip_prefix(sym) {
                return CompareOp::parse(sym).map(|op| (op, rest));
            }
        }
        None
    }
}

impl fmt::Display for CompareOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

impl Serialize for CompareOp {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.symbol())
    }
}

impl<'de> Deserialize<'de> for CompareOp {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        CompareOp::parse(&s).ok_or_else(|| serde::de::Error::custom(format!("unknown comparison operator `{s}`")))
    }
}

/// The rule a measured value is assessed against.
///
/// In config files a bare string such as `">= 0.9"` is shorthand for a threshold.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ConstraintSpec {
    Threshold {
        op: CompareOp,
        bound: Value,
    },
    Range {
        lo: Value,
        hi: Value,
        lo_inclusive: bool,
        hi_inclusive: bool,
    },
    /// Expression over `value` and, when configured, `mu_H`, `sigma_H`,
    /// `prev_value`, `count_H` and `ref_*` columns.
    Predicate {
        expr: String,
    },
}

#[derive(Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
enum ConstraintRepr {
    Threshold {
        op: CompareOp,
        bound: Value,
    },
    Range {
        lo: Value,
        hi: Value,
        #[serde(default = "yes")]
        lo_inclusive: bool,
        #[serde(default = "yes")]
        hi_inclusive: bool,
    },
    Predicate {
        expr: String,
    },
}

fn yes() -> bool {
    true
}

impl<'de> Deserialize<'de> for ConstraintSpec {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let json = Json::deserialize(deserializer)?;
        if let Json::String(s) = &json {
            return ConstraintSpec::parse_shorthand(s).map_err(serde::de::Error::custom);
        }
        let repr: ConstraintRepr = serde_json::from_value(json).map_err(serde::de::Error::custom)?;
        Ok(match repr {
            ConstraintRepr::Threshold { op, bound } => ConstraintSpec::Threshold { op, bound },
            ConstraintRepr::Range {
                lo,
                hi,
                lo_inclusive,
                hi_inclusive,
            } => ConstraintSpec::Range {
                lo,
                hi,
                lo_inclusive,
                hi_inclusive,
            },
            ConstraintRepr::Predicate { expr } => ConstraintSpec::Predicate { expr },
        })
    }
}

impl ConstraintSpec {
    pub fn threshold(op: CompareOp, bound: impl Into<Value>) -> Self {
        ConstraintSpec::Threshold {
            op,
            bound: bound.into(),
        }
    }

    pub fn predicate(expr: impl Into<String>) -> Self {
        ConstraintSpec::Predicate { expr: expr.into() }
    }

    /// `">10"`, `">= 0.9"`, `"= 'Tampere'"`, `"!= true"`.
    pub fn parse_shorthand(s: &str) -> Result<Self, String> {
        let trimmed = s.trim();
        let (op, rest) = CompareOp::split_prefix(trimmed)
            .ok_or_else(|| format!("constraint `{s}` must start with a comparison operator"))?;
        let rest = rest.trim();
        let bound = if let Ok(i) = rest.parse::<i64>() {
            Value::Int(i)
        } else if let Ok(f) = rest.parse::<f64>() {
            Value::float(f)
        } else if rest == "true" || rest == "false" {
            Value::Bool(rest == "true")
        } else if rest.len() >= 2 && rest.starts_with('\'') && rest.ends_with('\'') {
            Value::text(&rest[1..rest.len() - 1])
        } else if rest.is_empty() {
            return Err(format!("constraint `{s}` has no bound"));
        } else {
            Value::text(rest)
        };
        if bound.is_null() {
            return Err(format!("constraint `{s}` has a non-finite bound"));
        }
        Ok(ConstraintSpec::Threshold { op, bound })
    }
}

/// Rolling statistics of prior windows, bound into predicates.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ContextValues {
    pub mu: Value,
    pub sigma: Value,
    pub count: i64,
    pub prev_value: Value,
}

impl ContextValues {
    pub fn bind(&self, bindings: &mut Bindings) {
        bindings.set("mu_H", self.mu.clone());
        bindings.set("sigma_H", self.sigma.clone());
        bindings.set("count_H", Value::Int(self.count));
        bindings.set("prev_value", self.prev_value.clone());
    }
}

/// A constraint ready for evaluation (predicates parsed and compiled).
#[derive(Debug, Clone)]
pub enum Constraint {
    Threshold {
        op: CompareOp,
        bound: Value,
    },
    Range {
        lo: Value,
        hi: Value,
        lo_inclusive: bool,
        hi_inclusive: bool,
    },
    Predicate {
        source: String,
        program: Program,
    },
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConstraintError {
    #[error("invalid predicate: {0}")]
    Parse(#[from] ParseError),
    #[error("range bounds {lo} and {hi} are not comparable")]
    Incomparable { lo: Value, hi: Value },
    #[error("range lower bound {lo} exceeds upper bound {hi}")]
    Inverted { lo: Value, hi: Value },
    #[error("threshold bound must not be null")]
    NullBound,
}

impl Constraint {
    pub fn compile(spec: &ConstraintSpec) -> Result<Constraint, ConstraintError> {
        Ok(match spec {
            ConstraintSpec::Threshold { op, bound } => {
                if bound.is_null() {
                    return Err(ConstraintError::NullBound);
                }
                Constraint::Threshold {
                    op: *op,
                    bound: bound.clone(),
                }
            }
            ConstraintSpec::Range {
                lo,
                hi,
                lo_inclusive,
                hi_inclusive,
            } => {
                match lo.num_cmp(hi) {
                    None => {
                        return Err(ConstraintError::Incomparable {
                            lo: lo.clone(),
                            hi: hi.clone(),
                        })
                    }
                    Some(Ordering::Greater) => {
                        return Err(ConstraintError::Inverted {
                            lo: lo.clone(),
                            hi: hi.clone(),
                        })
                    }
                    _ => {}
                }
                Constraint::Range {
                    lo: lo.clone(),
                    hi: hi.clone(),
                    lo_inclusive: *lo_inclusive,
                    hi_inclusive: *hi_inclusive,
                }
            }
            ConstraintSpec::Predicate { expr } => Constraint::Predicate {
                source: expr.clone(),
                program: Program::compile(&expression::parse(expr)?),
            },
        })
    }

    /// Three-valued verdict: `None` when the value is Null or not comparable.
    pub fn evaluate(&self, value: &Value, bindings: &Bindings) -> Option<bool> {
        match self {
            Constraint::Threshold { op, bound } => {
                if !op.is_equality() && matches!(value, Value::Text(_) | Value::Bool(_)) {
                    return None;
                }
                value.num_cmp(bound).map(|ord| op.holds(ord))
            }
            Constraint::Range {
                lo,
                hi,
                lo_inclusive,
                hi_inclusive,
            } => in_range(value, lo, hi, *lo_inclusive, *hi_inclusive),
            Constraint::Predicate { program, .. } => {
                let mut local = bindings.clone();
                local.set("value", value.clone());
                program.eval(None, &local).as_bool()
            }
        }
    }
}

/// Range membership with Int/Float widening; `None` for Null or
/// non-orderable values.
pub fn in_range(value: &Value, lo: &Value, hi: &Value, lo_inclusive: bool, hi_inclusive: bool) -> Option<bool> {
    if matches!(value, Value::Text(_) | Value::Bool(_)) {
        return None;
    }
    let lo_ord = value.num_cmp(lo)?;
    let hi_ord = value.num_cmp(hi)?;
    let lo_ok = if lo_inclusive {
        lo_ord != Ordering::Less
    } else {
        lo_ord == Ordering::Greater
    };
    let hi_ok = if hi_inclusive {
        hi_ord != Ordering::Greater
    } else {
        hi_ord == Ordering::Less
    };
    Some(lo_ok && hi_ok)
}

/// Assessment of a measured value (strict: a Null verdict fails).
pub fn compare(value: &Value, constraint: &Constraint, context: Option<&ContextValues>) -> bool {
    let mut bindings = Bindings::new();
    if let Some(ctx) = context {
        ctx.bind(&mut bindings);
    }
    constraint.evaluate(value, &bindings).unwrap_or(false)
}
