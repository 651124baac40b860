//! Engine-generated checks that look across consecutive panes.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::context::{ContextState, Summary};
use crate::model::{Detail, MetaRecord, Span, Timestamp, Value, WindowInstance};

pub const DEAD_STREAM: &str = "_dead_stream";
pub const FROZEN_STREAM: &str = "_frozen_stream";
pub const RELATIVE_VOLUME: &str = "_relative_volume";
pub const LATE_DISCARDS: &str = "_late_discards";

fn yes() -> bool {
    true
}

/// The `detectors` section of a suite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dead_stream: Option<DeadStreamConfig>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub frozen_stream: Vec<FrozenConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub relative_volume: Option<RelativeVolumeConfig>,
    /// One `_late_discards` record per closed unkeyed pane.
    #[serde(default = "yes")]
    pub late_discards: bool,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        DetectorConfig {
            dead_stream: None,
            frozen_stream: Vec::new(),
            relative_volume: None,
            late_discards: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RestartTrigger {
    /// Re-arm and emit a recovery record when data returns.
    #[default]
    Auto,
    /// Alert at most once per run.
    Manual,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeadStreamConfig {
    pub threshold: Span,
    #[serde(default)]
    pub restart: RestartTrigger,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrozenConfig {
    pub column: String,
    /// Consecutive non-empty panes with one identical value before alerting.
    pub windows: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub key_by: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RelativeVolumeConfig {
    pub lo: f64,
    pub hi: f64,
    pub horizon: Span,
}

fn record(w: &WindowInstance, check: &str, value: Value, ok: bool, detail: serde_json::Value) -> MetaRecord {
    let serde_json::Value::Object(map) = detail else {
        unreachable!("detail is always an object")
    };
    MetaRecord {
        window_start: w.start(),
        window_end: w.end(),
        key: w.key.clone(),
        check_id: check.to_string(),
        value,
        ok,
        detail: Some(map),
    }
}

/// Alerts once a run of empty panes spans at least the threshold.
#[derive(Debug, Clone)]
pub struct DeadStreamDetector {
    config: DeadStreamConfig,
    empty_since: Option<Timestamp>,
    alerted: bool,
}

impl DeadStreamDetector {
    pub fn new(config: DeadStreamConfig) -> Self {
        DeadStreamDetector {
            config,
            empty_since: None,
            alerted: false,
        }
    }

    /// Feeds the next unkeyed pane in close order.
    pub fn on_pane(&mut self, w: &WindowInstance) -> Option<MetaRecord> {
        if w.is_empty() {
            let since = *self.empty_since.get_or_insert(w.start());
            let silent = w.end().millis_since(since);
            if !self.alerted && silent >= self.config.threshold.millis() {
                self.alerted = true;
                return Some(record(
                    w,
                    DEAD_STREAM,
                    Value::Int(silent),
                    false,
                    json!({"silent_since": since.to_iso()}),
                ));
            }
            return None;
        }
        let since = self.empty_since.take();
        if self.alerted && self.config.restart == RestartTrigger::Auto {
            self.alerted = false;
            let silent = since.map_or(0, |s| w.start().millis_since(s));
            return Some(record(
                w,
                DEAD_STREAM,
                Value::Int(silent),
                true,
                json!({"recovered": true}),
            ));
        }
        None
    }
}

#[derive(Debug, Clone, Default)]
struct FrozenRun {
    value: Option<Value>,
    panes: usize,
    alerted: bool,
}

/// Alerts when a column holds one identical value across consecutive panes.
#[derive(Debug, Clone)]
pub struct FrozenDetector {
    config: FrozenConfig,
    runs: BTreeMap<Option<Value>, FrozenRun>,
}

impl FrozenDetector {
    pub fn new(config: FrozenConfig) -> Self {
        FrozenDetector {
            config,
            runs: BTreeMap::new(),
        }
    }

    pub fn config(&self) -> &FrozenConfig {
        &self.config
    }

    /// Feeds the next pane of this detector's partitioning. Empty panes and
    /// panes where the column is entirely Null leave the state unchanged.
    pub fn on_pane(&mut self, w: &WindowInstance) -> Option<MetaRecord> {
        let mut distinct = BTreeSet::new();
        for v in w.values(&self.config.column).filter(|v| !v.is_null()) {
            distinct.insert(v);
            if distinct.len() > 1 {
                break;
            }
        }
        if distinct.is_empty() {
            return None;
        }
        let run = self.runs.entry(w.key.clone()).or_default();
        let single = (distinct.len() == 1).then(|| (*distinct.first().expect("non-empty")).clone());
        let column = &self.config.column;
        match single {
            Some(v) if run.value.as_ref() == Some(&v) => run.panes += 1,
            other => {
                let recovered = run.alerted;
                *run = FrozenRun {
                    panes: usize::from(other.is_some()),
                    value: other,
                    alerted: false,
                };
                if recovered {
                    return Some(record(
                        w,
                        FROZEN_STREAM,
                        Value::Int(distinct.len() as i64),
                        true,
                        json!({"column": column, "recovered": true}),
                    ));
                }
            }
        }
        if run.value.is_some() && run.panes >= self.config.windows && !run.alerted {
            run.alerted = true;
            let frozen = run.value.as_ref().map_or(serde_json::Value::Null, Value::to_json);
            return Some(record(
                w,
                FROZEN_STREAM,
                Value::Int(1),
                false,
                json!({"column": column, "frozen_value": frozen, "windows": run.panes}),
            ));
        }
        None
    }
}

/// Compares each pane's size with the mean size over the preceding horizon.
#[derive(Debug, Clone)]
pub struct RelativeVolumeDetector {
    config: RelativeVolumeConfig,
    history: ContextState,
}

impl RelativeVolumeDetector {
    pub fn new(config: RelativeVolumeConfig) -> Self {
        let history = ContextState::new(config.horizon);
        RelativeVolumeDetector { config, history }
    }

    pub fn on_pane(&mut self, w: &WindowInstance) -> MetaRecord {
        let n = w.len() as f64;
        let view = self.history.view(w.start());
        self.history.push(Summary {
            end: w.end(),
            value: Value::Int(w.len() as i64),
            count: w.len(),
        });
        let value = Value::Int(w.len() as i64);
        let Some(baseline) = view.values.mu.as_f64() else {
            return record(
                w,
                RELATIVE_VOLUME,
                value,
                true,
                json!({"baseline": null, "ratio": null}),
            );
        };
        let ok = n >= self.config.lo * baseline && n <= self.config.hi * baseline;
        let ratio = Value::float(n / baseline).to_json();
        record(
            w,
            RELATIVE_VOLUME,
            value,
            ok,
            json!({"baseline": baseline, "ratio": ratio}),
        )
    }
}

/// Counts discarded late elements and reports them with the next unkeyed pane.
#[derive(Debug, Clone, Default)]
pub struct LateDiscardCounter {
    pending: u64,
    total: u64,
}

impl LateDiscardCounter {
    pub fn discard(&mut self) {
        self.pending += 1;
        self.total += 1;
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn pending(&self) -> u64 {
        self.pending
    }

    pub fn on_pane(&mut self, w: &WindowInstance) -> MetaRecord {
        let n = std::mem::take(&mut self.pending);
        let mut detail = Detail::new();
        detail.insert("total".into(), json!(self.total));
        MetaRecord {
            window_start: w.start(),
            window_end: w.end(),
            key: None,
            check_id: LATE_DISCARDS.to_string(),
            value: Value::Int(n as i64),
            ok: n == 0,
            detail: Some(detail),
        }
    }
}
