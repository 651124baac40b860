use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Map, Value as Json};

use super::context::{ContextState, Summary};
use super::detectors::{DeadStreamDetector, FrozenDetector, LateDiscardCounter, RelativeVolumeDetector};
use super::validate::{CompiledCheck, Suite};
use crate::expression::Bindings;
use crate::measures::{resolve, EvalEnv, MeasureResult, MeasureSpec};
use crate::model::{Detail, MetaRecord, NullPolicy, Span, StreamElement, Timestamp, Value, WindowInstance};
use crate::windowing::{route, ClosedPane, PaneStore, Route, Watermark};

/// Counters of one run.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct RunStats {
    pub ingested: u64,
    /// Routed normally (at or after the watermark).
    pub assigned: u64,
    pub late_accepted: u64,
    pub discarded: u64,
    /// Elements left out of a keyed partition because the key was Null.
    pub null_keys: u64,
    pub panes_closed: u64,
    pub records: u64,
    pub side_rows: u64,
    pub reference_misses: u64,
}

impl RunStats {
    /// Elements that reached at least one pane.
    pub fn assessed(&self) -> u64 {
        self.assigned + self.late_accepted
    }
}

/// An element that failed one or more per-element checks.
#[derive(Debug, Clone, PartialEq)]
pub struct SideRow {
    pub element: Arc<StreamElement>,
    pub failed_checks: Vec<String>,
}

impl SideRow {
    /// `{"arrival_seq", "event_time", <attributes...>, "failed_checks"}`.
    pub fn to_json_line(&self) -> String {
        let e = &self.element;
        let mut map = Map::new();
        map.insert("arrival_seq".into(), json!(e.arrival_seq));
        map.insert("event_time".into(), json!(e.event_time.to_iso()));
        for (name, v) in &e.attrs {
            map.insert(name.to_string(), v.to_json());
        }
        map.insert("failed_checks".into(), json!(self.failed_checks));
        Json::Object(map).to_string()
    }
}

/// What ingesting one element produced.
#[derive(Debug, Clone, Default)]
pub struct Step {
    pub side: Option<SideRow>,
    /// Meta records of panes closed by this element, in stream order.
    pub records: Vec<MetaRecord>,
}

struct Measured {
    pane: usize,
    check: usize,
    result: MeasureResult,
    /// `(arrival_seq, value, event_time)` of owned elements that failed.
    failures: Vec<(u64, Value, Timestamp)>,
}

/// Single-writer driver: routes elements into panes, closes panes as the
/// watermark advances and turns each closed pane into meta records.
pub struct Engine {
    suite: Arc<Suite>,
    watermark: Watermark,
    stores: Vec<PaneStore>,
    contexts: BTreeMap<(usize, Option<Value>), ContextState>,
    dead: Option<DeadStreamDetector>,
    frozen: Vec<(usize, FrozenDetector)>,
    volume: Option<RelativeVolumeDetector>,
    late: LateDiscardCounter,
    warned: BTreeSet<(String, Value)>,
    pool: Option<rayon::ThreadPool>,
    stats: RunStats,
}

impl Engine {
    /// `workers` caps the measurement pool; 1 measures on the calling thread.
    pub fn new(suite: Suite, watermark_delay: Span, workers: usize) -> Engine {
        let stores = suite
            .partitions
            .iter()
            .map(|p| PaneStore::new(suite.window, p.is_none()))
            .collect();
        let detectors = &suite.detectors;
        let frozen = detectors
            .frozen_stream
            .iter()
            .map(|f| (suite.partition_of(f.key_by.as_deref()), FrozenDetector::new(f.clone())))
            .collect();
        let pool = (workers > 1)
            .then(|| rayon::ThreadPoolBuilder::new().num_threads(workers).build())
            .and_then(|r| {
                r.map_err(|e| log::warn!("measurement pool unavailable, measuring inline: {e}"))
                    .ok()
            });
        Engine {
            dead: detectors.dead_stream.clone().map(DeadStreamDetector::new),
            volume: detectors.relative_volume.clone().map(RelativeVolumeDetector::new),
            frozen,
            suite: Arc::new(suite),
            watermark: Watermark::new(watermark_delay),
            stores,
            contexts: BTreeMap::new(),
            late: LateDiscardCounter::default(),
            warned: BTreeSet::new(),
            pool,
            stats: RunStats::default(),
        }
    }

    pub fn suite(&self) -> &Suite {
        &self.suite
    }

    pub fn stats(&self) -> &RunStats {
        &self.stats
    }

    pub fn watermark(&self) -> Watermark {
        self.watermark
    }

    pub fn open_panes(&self) -> usize {
        self.stores.iter().map(PaneStore::open_panes).sum()
    }

    /// Checks `e` against per-element checks, routes it into panes and
    /// closes whatever the advanced watermark makes ready.
    pub fn ingest(&mut self, e: StreamElement) -> Step {
        self.stats.ingested += 1;
        let e = Arc::new(e);
        let side = self.side_row(&e);
        if side.is_some() {
            self.stats.side_rows += 1;
        }
        match route(e.event_time, &self.watermark, &self.suite.window) {
            Route::Discard => {
                self.stats.discarded += 1;
                self.late.discard();
                return Step {
                    side,
                    records: Vec::new(),
                };
            }
            Route::LateAccept => self.stats.late_accepted += 1,
            Route::Assign => self.stats.assigned += 1,
        }
        let mut null_key = false;
        for (store, partition) in self.stores.iter_mut().zip(&self.suite.partitions) {
            let key = match partition {
                None => None,
                Some(col) => match e.value(col) {
                    Value::Null => {
                        null_key = true;
                        continue;
                    }
                    v => Some(v.clone()),
                },
            };
            store.insert(key, Arc::clone(&e));
        }
        if null_key {
            self.stats.null_keys += 1;
        }
        let wm = self.watermark.observe(e.event_time);
        let records = self.close(wm);
        Step { side, records }
    }

    /// End of input: flushes every open pane.
    pub fn finish(&mut self) -> Vec<MetaRecord> {
        self.watermark.finish();
        let records = self.close(self.watermark.value);
        if self.late.pending() > 0 {
            log::warn!(
                "{} late discards arrived after the last pane closed",
                self.late.pending()
            );
        }
        records
    }

    fn side_row(&self, e: &Arc<StreamElement>) -> Option<SideRow> {
        let failed: Vec<String> = self
            .suite
            .checks
            .iter()
            .filter(|c| c.def.emit_per_element)
            .filter(|c| resolve(c.measure.element_verdict(e), c.def.null_policy) == Some(false))
            .map(|c| c.def.id.clone())
            .collect();
        (!failed.is_empty()).then(|| SideRow {
            element: Arc::clone(e),
            failed_checks: failed,
        })
    }

    fn close(&mut self, wm: Timestamp) -> Vec<MetaRecord> {
        let mut panes: Vec<(usize, ClosedPane)> = Vec::new();
        for (p, store) in self.stores.iter_mut().enumerate() {
            panes.extend(store.close_ready(wm).into_iter().map(|c| (p, c)));
        }
        if panes.is_empty() {
            return Vec::new();
        }
        panes.sort_by(|(pa, a), (pb, b)| {
            (a.window.end(), &a.window.key, pa, a.window.start()).cmp(&(
                b.window.end(),
                &b.window.key,
                pb,
                b.window.start(),
            ))
        });
        self.on_window_close(&panes)
    }

    /// Measures and assesses a batch of closed panes, given in close order.
    /// Measurement fans out over the worker pool; assessment, context updates
    /// and detectors run here in order.
    pub fn on_window_close(&mut self, panes: &[(usize, ClosedPane)]) -> Vec<MetaRecord> {
        let suite = Arc::clone(&self.suite);
        let tasks: Vec<(usize, usize)> = panes
            .iter()
            .enumerate()
            .flat_map(|(i, (p, _))| {
                suite
                    .checks
                    .iter()
                    .enumerate()
                    .filter(move |(_, c)| c.partition == *p)
                    .map(move |(ci, _)| (i, ci))
            })
            .collect();
        let run = |&(i, ci): &(usize, usize)| measure(&suite, &panes[i].1, i, ci);
        let measured: Vec<Measured> = match &self.pool {
            Some(pool) if tasks.len() > 1 => pool.install(|| tasks.par_iter().map(run).collect()),
            _ => tasks.iter().map(run).collect(),
        };

        let mut records = Vec::with_capacity(measured.len() + panes.len() * 2);
        let mut next = measured.into_iter().peekable();
        for (i, (p, pane)) in panes.iter().enumerate() {
            let w = &pane.window;
            while let Some(m) = next.next_if(|m| m.pane == i) {
                let check = &suite.checks[m.check];
                for (seq, value, t) in &m.failures {
                    records.push(element_record(check, w, *seq, value.clone(), *t));
                }
                records.push(self.assess(check, m.check, w, m.result));
            }
            if *p == 0 {
                if suite.detectors.late_discards {
                    records.push(self.late.on_pane(w));
                }
                if let Some(d) = &mut self.dead {
                    records.extend(d.on_pane(w));
                }
                if let Some(v) = &mut self.volume {
                    records.push(v.on_pane(w));
                }
            }
            for (fp, det) in &mut self.frozen {
                if *fp == *p && !w.is_empty() {
                    records.extend(det.on_pane(w));
                }
            }
        }
        records.sort_by(MetaRecord::stream_order);
        self.stats.panes_closed += panes.len() as u64;
        self.stats.records += records.len() as u64;
        records
    }

    fn assess(&mut self, check: &CompiledCheck, index: usize, w: &WindowInstance, result: MeasureResult) -> MetaRecord {
        let def = &check.def;
        let mut detail = result.detail.unwrap_or_default();
        let mut bindings = Bindings::new();
        let mut warming = false;
        if let Some(ctx) = &def.context {
            let state = self
                .contexts
                .entry((index, w.key.clone()))
                .or_insert_with(|| ContextState::new(ctx.horizon));
            let view = state.view(w.start());
            state.push(Summary {
                end: w.end(),
                value: result.value.clone(),
                count: w.len(),
            });
            view.values.bind(&mut bindings);
            warming = view.warming;
            detail.insert("mu_H".into(), view.values.mu.to_json());
            detail.insert("sigma_H".into(), view.values.sigma.to_json());
            detail.insert("count_H".into(), json!(view.values.count));
        }
        let record = |value: Value, ok: bool, detail: Detail| MetaRecord {
            window_start: w.start(),
            window_end: w.end(),
            key: w.key.clone(),
            check_id: def.id.clone(),
            value,
            ok,
            detail: (!detail.is_empty()).then_some(detail),
        };
        if let (Some(binding), Some(lookup)) = (&def.reference, &check.lookup) {
            let mut kb = Bindings::new();
            kb.set("window_start", Value::Timestamp(w.start()));
            kb.set("window_end", Value::Timestamp(w.end()));
            let key = lookup.eval(None, &kb);
            let suite = Arc::clone(&self.suite);
            let table = &suite.references[&binding.table];
            match table.lookup(&key) {
                Some(row) => table.bind(row, &mut bindings),
                None => {
                    self.stats.reference_misses += 1;
                    if self.warned.insert((binding.table.clone(), key.clone())) {
                        log::warn!(
                            "check `{}`: no row for key {key} in reference table `{}`",
                            def.id,
                            binding.table
                        );
                    }
                    detail.insert(
                        "warning".into(),
                        json!(format!("no row for key {key} in reference table `{}`", binding.table)),
                    );
                    return record(Value::Null, false, detail);
                }
            }
        }
        let verdict = check.constraint.evaluate(&result.value, &bindings);
        let ok = if warming {
            detail.insert("warming".into(), json!(true));
            true
        } else {
            match (verdict, def.null_policy) {
                (Some(b), _) => b,
                (None, NullPolicy::Strict) => false,
                (None, NullPolicy::Lenient) => {
                    detail.insert("not_assessed".into(), json!(true));
                    true
                }
            }
        };
        record(result.value, ok, detail)
    }
}

fn measure(suite: &Suite, pane: &ClosedPane, index: usize, check: usize) -> Measured {
    let c = &suite.checks[check];
    let w = &pane.window;
    let secondary = match &c.def.measure {
        MeasureSpec::MatchRatio { stream, .. } => suite.streams.get(stream).map(|s| s.pane(w.start(), w.end())),
        _ => None,
    };
    let env = EvalEnv {
        null_policy: c.def.null_policy,
        secondary,
    };
    let result = c.measure.evaluate(w, &env);
    let failures = if c.def.emit_per_element {
        w.elements
            .iter()
            .filter(|e| pane.owned.binary_search(&e.arrival_seq).is_ok())
            .filter(|e| resolve(c.measure.element_verdict(e), c.def.null_policy) == Some(false))
            .map(|e| (e.arrival_seq, c.measure.element_value(e), e.event_time))
            .collect()
    } else {
        Vec::new()
    };
    Measured {
        pane: index,
        check,
        result,
        failures,
    }
}

fn element_record(check: &CompiledCheck, w: &WindowInstance, seq: u64, value: Value, t: Timestamp) -> MetaRecord {
    let mut detail = Detail::new();
    detail.insert("element_ref".into(), json!(seq));
    detail.insert("event_time".into(), json!(t.to_iso()));
    MetaRecord {
        window_start: w.start(),
        window_end: w.end(),
        key: w.key.clone(),
        check_id: check.def.id.clone(),
        value,
        ok: false,
        detail: Some(detail),
    }
}
