use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use super::detectors::DetectorConfig;
use super::reference::ReferenceTable;
use crate::expression::{self, Program, TypeEnv};
use crate::measures::{Measure, MeasureSpec, SecondaryStream};
use crate::model::{CheckDefinition, Constraint, ConstraintSpec, ValueType, WindowKind, WindowSpec};

/// One configuration problem, attributed to a check when it has one.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub check: Option<String>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.check {
            Some(id) => write!(f, "check `{id}`: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

/// Every problem found in a suite; the engine refuses to start on any.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SuiteErrors(pub Vec<ConfigError>);

impl fmt::Display for SuiteErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str("\n")?;
            }
            write!(f, "{e}")?;
        }
        Ok(())
    }
}

impl std::error::Error for SuiteErrors {}

/// Everything a suite is validated against.
#[derive(Debug, Clone)]
pub struct SuiteDef {
    pub checks: Vec<CheckDefinition>,
    pub window: WindowSpec,
    /// Declared source columns; `None` skips column checks.
    pub schema: Option<BTreeMap<String, ValueType>>,
    pub references: BTreeMap<String, ReferenceTable>,
    pub streams: BTreeMap<String, SecondaryStream>,
    pub detectors: DetectorConfig,
    pub hash_seed: u64,
}

/// A check with everything parsed and compiled.
#[derive(Debug, Clone)]
pub struct CompiledCheck {
    pub def: CheckDefinition,
    pub measure: Measure,
    pub constraint: Constraint,
    /// Reference lookup key over `window_start` / `window_end`.
    pub lookup: Option<Program>,
    /// Index into [`Suite::partitions`].
    pub partition: usize,
}

/// A validated suite, ready to drive an engine.
#[derive(Debug, Clone)]
pub struct Suite {
    pub checks: Vec<CompiledCheck>,
    /// Partitioning columns; index 0 is always the unkeyed partition.
    pub partitions: Vec<Option<String>>,
    pub window: WindowSpec,
    pub references: BTreeMap<String, ReferenceTable>,
    pub streams: BTreeMap<String, SecondaryStream>,
    pub detectors: DetectorConfig,
    pub hash_seed: u64,
}

impl Suite {
    pub fn partition_of(&self, key_by: Option<&str>) -> usize {
        self.partitions
            .iter()
            .position(|p| p.as_deref() == key_by)
            .expect("partition registered during validation")
    }

    pub fn has_per_element_checks(&self) -> bool {
        self.checks.iter().any(|c| c.def.emit_per_element)
    }
}

#[derive(Clone, Copy)]
enum Need {
    Numeric,
    Orderable,
    Text,
}

fn needs(spec: &MeasureSpec) -> Vec<(&str, Need)> {
    match spec {
        MeasureSpec::ValidRange { column, .. } => vec![(column, Need::Orderable)],
        MeasureSpec::MatchesPattern { column, .. } | MeasureSpec::LengthStats { column, .. } => {
            vec![(column, Need::Text)]
        }
        MeasureSpec::BasicStats { column, .. }
        | MeasureSpec::ZOutlierCount { column, .. }
        | MeasureSpec::Percentiles { column, .. } => vec![(column, Need::Numeric)],
        MeasureSpec::Correlation { a, b, .. } => vec![(a, Need::Numeric), (b, Need::Numeric)],
        MeasureSpec::IntervalConflicts { start, end, .. } => vec![(start, Need::Orderable), (end, Need::Orderable)],
        MeasureSpec::OutOfOrderCount { field: Some(f) } => vec![(f, Need::Orderable)],
        _ => vec![],
    }
}

fn satisfies(ty: ValueType, need: Need) -> bool {
    match need {
        Need::Numeric => ty.is_numeric(),
        Need::Orderable => ty.is_orderable(),
        Need::Text => ty == ValueType::Text,
    }
}

fn need_name(need: Need) -> &'static str {
    match need {
        Need::Numeric => "a numeric",
        Need::Orderable => "an orderable",
        Need::Text => "a text",
    }
}

struct Collector {
    errors: Vec<ConfigError>,
}

impl Collector {
    fn check(&mut self, id: &str, message: impl Into<String>) {
        self.errors.push(ConfigError {
            check: Some(id.to_string()),
            message: message.into(),
        });
    }

    fn suite(&mut self, message: impl Into<String>) {
        self.errors.push(ConfigError {
            check: None,
            message: message.into(),
        });
    }
}

/// Validates the whole suite and compiles it; all-or-nothing.
pub fn validate_suite(def: SuiteDef) -> Result<Suite, SuiteErrors> {
    let mut errs = Collector { errors: Vec::new() };
    if let Err(e) = def.window.check() {
        errs.suite(format!("window: {e}"));
    }
    let empty = BTreeMap::new();
    let schema = def.schema.as_ref();
    let has_column = |c: &str| schema.is_none_or(|s| s.contains_key(c));

    for (id, table) in &def.references {
        if table.is_empty() {
            errs.suite(format!("reference table `{id}` is empty"));
        }
    }

    let mut partitions: Vec<Option<String>> = vec![None];
    let mut register = |col: &Option<String>| {
        if col.is_some() && !partitions.contains(col) {
            partitions.push(col.clone());
        }
    };
    for c in &def.checks {
        register(&c.key_by);
    }
    for f in &def.detectors.frozen_stream {
        register(&f.key_by);
    }

    let mut seen = BTreeSet::new();
    let mut compiled = Vec::with_capacity(def.checks.len());
    for c in &def.checks {
        let id = c.id.as_str();
        let before = errs.errors.len();
        if id.is_empty() {
            errs.suite("check id must not be empty");
        } else if id.starts_with('_') {
            errs.check(id, "ids starting with `_` are reserved for engine records");
        }
        if !seen.insert(id) {
            errs.check(id, "duplicate check id");
        }

        let measure = match Measure::compile(&c.measure, def.hash_seed) {
            Ok(m) => Some(m),
            Err(e) => {
                errs.check(id, format!("{}: {e}", c.measure.name()));
                None
            }
        };
        for col in c.measure.columns() {
            if !has_column(col) {
                errs.check(id, format!("unknown column `{col}`"));
            }
        }
        if let Some(s) = schema {
            for (col, need) in needs(&c.measure) {
                if let Some(ty) = s.get(col) {
                    if !satisfies(*ty, need) {
                        errs.check(
                            id,
                            format!(
                                "{} needs {} column, but `{col}` is {ty}",
                                c.measure.name(),
                                need_name(need)
                            ),
                        );
                    }
                }
            }
            if let Some(m) = &measure {
                if let Err(e) = m.typecheck(s) {
                    errs.check(id, e.to_string());
                }
            }
        }
        if let MeasureSpec::MatchRatio { stream, .. } = &c.measure {
            if !def.streams.contains_key(stream) {
                errs.check(id, format!("unknown secondary stream `{stream}`"));
            }
        }
        if let Some(k) = &c.key_by {
            if !has_column(k) {
                errs.check(id, format!("unknown key_by column `{k}`"));
            }
        }
        if c.emit_per_element && !c.measure.is_tuple() {
            errs.check(
                id,
                format!(
                    "emit_per_element needs an element-level measure, not {}",
                    c.measure.name()
                ),
            );
        }
        if let Some(ctx) = &c.context {
            if ctx.horizon.millis() <= 0 {
                errs.check(id, "context horizon must be positive");
            } else if let Some(d) = def.window.duration() {
                if ctx.horizon < d {
                    errs.check(
                        id,
                        format!(
                            "context horizon {} is shorter than the window duration {d}",
                            ctx.horizon
                        ),
                    );
                }
            }
        }

        let value_ty = c.measure.value_type(schema.unwrap_or(&empty));
        let mut lookup = None;
        let mut env = TypeEnv::for_bindings().bind("value", value_ty);
        if c.context.is_some() {
            env = env
                .bind("mu_H", Some(ValueType::Float))
                .bind("sigma_H", Some(ValueType::Float))
                .bind("count_H", Some(ValueType::Int))
                .bind("prev_value", value_ty);
        }
        if let Some(r) = &c.reference {
            match def.references.get(&r.table) {
                None => errs.check(id, format!("unknown reference table `{}`", r.table)),
                Some(table) => {
                    for (name, ty) in table.binding_types() {
                        env = env.bind(&name, ty);
                    }
                }
            }
            match expression::parse(&r.lookup) {
                Err(e) => errs.check(id, format!("reference lookup: {e}")),
                Ok(tree) => {
                    let key_env = TypeEnv::for_bindings()
                        .bind("window_start", Some(ValueType::Timestamp))
                        .bind("window_end", Some(ValueType::Timestamp));
                    match expression::infer(&tree, &key_env) {
                        Err(e) => errs.check(id, format!("reference lookup: {e}")),
                        Ok(_) => lookup = Some(Program::compile(&tree)),
                    }
                }
            }
        }

        let constraint = match Constraint::compile(&c.constraint) {
            Ok(k) => Some(k),
            Err(e) => {
                errs.check(id, format!("constraint: {e}"));
                None
            }
        };
        match &c.constraint {
            ConstraintSpec::Predicate { expr } => {
                if let Ok(tree) = expression::parse(expr) {
                    if let Err(e) = expression::check_predicate(&tree, &env) {
                        errs.check(id, format!("constraint `{expr}`: {e}"));
                    }
                }
            }
            ConstraintSpec::Threshold { op, bound } => {
                let unordered = matches!(value_ty, Some(ValueType::Text | ValueType::Bool));
                if unordered && !op.is_equality() {
                    errs.check(
                        id,
                        format!(
                            "{} reports a {} value, which supports only = and !=",
                            c.measure.name(),
                            value_ty.expect("matched")
                        ),
                    );
                }
                if let (Some(vt), Some(bt)) = (value_ty, bound.value_type()) {
                    let compatible = vt == bt || (vt.is_numeric() && bt.is_numeric());
                    if !compatible {
                        errs.check(id, format!("bound {bound} ({bt}) cannot be compared with a {vt} value"));
                    }
                }
            }
            ConstraintSpec::Range { .. } => {
                if let Some(vt) = value_ty {
                    if !vt.is_orderable() {
                        errs.check(id, format!("range constraint on a {vt} value"));
                    }
                }
            }
        }

        if errs.errors.len() == before {
            compiled.push(CompiledCheck {
                def: c.clone(),
                measure: measure.expect("no errors"),
                constraint: constraint.expect("no errors"),
                lookup,
                partition: partitions.iter().position(|p| *p == c.key_by).expect("registered"),
            });
        }
    }

    let d = &def.detectors;
    if let Some(dead) = &d.dead_stream {
        if dead.threshold.millis() <= 0 {
            errs.suite("dead_stream: threshold must be positive");
        }
        if matches!(def.window.kind, WindowKind::Session { .. }) {
            errs.suite("dead_stream: needs tumbling or sliding windows (session windows are never empty)");
        }
    }
    for f in &d.frozen_stream {
        if f.windows == 0 {
            errs.suite(format!("frozen_stream `{}`: windows must be at least 1", f.column));
        }
        if !has_column(&f.column) {
            errs.suite(format!("frozen_stream: unknown column `{}`", f.column));
        }
        if let Some(k) = &f.key_by {
            if !has_column(k) {
                errs.suite(format!("frozen_stream: unknown key_by column `{k}`"));
            }
        }
    }
    if let Some(rv) = &d.relative_volume {
        if !(rv.lo.is_finite() && rv.hi.is_finite() && 0.0 <= rv.lo && rv.lo <= rv.hi) {
            errs.suite(format!(
                "relative_volume: need 0 <= lo <= hi, got [{}, {}]",
                rv.lo, rv.hi
            ));
        }
        if rv.horizon.millis() <= 0 {
            errs.suite("relative_volume: horizon must be positive");
        }
    }

    if !errs.errors.is_empty() {
        return Err(SuiteErrors(errs.errors));
    }
    Ok(Suite {
        checks: compiled,
        partitions,
        window: def.window,
        references: def.references,
        streams: def.streams,
        detectors: def.detectors,
        hash_seed: def.hash_seed,
    })
}
