use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufRead, BufReader, Read};
use std::net::TcpStream;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::Value as Json;

use crate::measures::SchemaMode;
use crate::model::{Span, StreamElement, TimeFormat, Timestamp, Value, ValueType};

const SOCKET_POLL: Duration = Duration::from_millis(200);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceKind {
    Csv,
    Jsonl,
    Socket,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ReplayMode {
    #[default]
    AsFastAsPossible,
    /// Sleeps `Δevent_time / factor` between elements.
    Scaled(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ColumnSpec {
    pub name: String,
    #[serde(rename = "type")]
    pub ty: ValueType,
    #[serde(default = "yes")]
    pub nullable: bool,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceSpec {
    pub kind: SourceKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    /// `host:port` of a server writing JSON lines.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub address: Option<String>,
    pub event_time: String,
    #[serde(default = "TimeFormat::defaults")]
    pub time_formats: Vec<TimeFormat>,
    #[serde(default)]
    pub columns: Vec<ColumnSpec>,
    #[serde(default)]
    pub watermark_delay: Span,
    #[serde(default)]
    pub replay: ReplayMode,
    /// Header (CSV) or first-record keys (JSONL) must match `columns` in this mode.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schema_check: Option<SchemaMode>,
}

impl SourceSpec {
    pub fn csv(path: impl Into<PathBuf>, event_time: &str) -> Self {
        SourceSpec::file(SourceKind::Csv, path.into(), event_time)
    }

    pub fn jsonl(path: impl Into<PathBuf>, event_time: &str) -> Self {
        SourceSpec::file(SourceKind::Jsonl, path.into(), event_time)
    }

    fn file(kind: SourceKind, path: PathBuf, event_time: &str) -> Self {
        SourceSpec {
            kind,
            path: Some(path),
            address: None,
            event_time: event_time.to_string(),
            time_formats: TimeFormat::defaults(),
            columns: Vec::new(),
            watermark_delay: Span::ZERO,
            replay: ReplayMode::AsFastAsPossible,
            schema_check: None,
        }
    }

    pub fn with_columns(mut self, columns: Vec<ColumnSpec>) -> Self {
        self.columns = columns;
        self
    }

    /// Declared schema as name → type, event-time column included.
    pub fn schema(&self) -> BTreeMap<String, ValueType> {
        let mut schema: BTreeMap<String, ValueType> = self.columns.iter().map(|c| (c.name.clone(), c.ty)).collect();
        schema.insert(self.event_time.clone(), ValueType::Timestamp);
        schema
    }

    /// Resolves a relative `path` against `base`.
    pub fn resolve_paths(&mut self, base: &Path) {
        if let Some(p) = &self.path {
            if p.is_relative() {
                self.path = Some(base.join(p));
            }
        }
    }

    pub fn check(&self) -> Result<(), SourceError> {
        match (self.kind, &self.path, &self.address) {
            (SourceKind::Socket, _, None) => {
                return Err(SourceError::Config("socket source needs an `address`".into()))
            }
            (SourceKind::Csv | SourceKind::Jsonl, None, _) => {
                return Err(SourceError::Config("file source needs a `path`".into()))
            }
            _ => {}
        }
        if let Some(c) = self.columns.iter().find(|c| c.name == self.event_time) {
            if c.ty != ValueType::Timestamp {
                return Err(SourceError::Config(format!(
                    "event_time column `{}` is declared as {}",
                    c.name, c.ty
                )));
            }
        }
        if let ReplayMode::Scaled(f) = self.replay {
            if !(f.is_finite() && f > 0.0) {
                return Err(SourceError::Config(format!("replay factor must be positive, got {f}")));
            }
        }
        if self.schema_check.is_some() && self.columns.is_empty() {
            return Err(SourceError::Config("schema_check needs declared columns".into()));
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SourceError {
    #[error("{0}")]
    Config(String),
    #[error("cannot open {}: {source}", path.display())]
    Open { path: PathBuf, source: io::Error },
    #[error("cannot connect to {address}: {source}")]
    Connect { address: String, source: io::Error },
    #[error("event_time column `{0}` is not in the input")]
    MissingEventTime(String),
    #[error("input columns {found:?} do not match the declared schema ({mode:?})")]
    Schema { found: Vec<String>, mode: SchemaMode },
    #[error("read error at line {line}: {source}")]
    Read { line: u64, source: io::Error },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

/// Ingestion counters; `skipped() + yielded == total`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct SourceStats {
    pub total: u64,
    pub yielded: u64,
    /// Records whose event time was missing or unparseable.
    pub bad_event_time: u64,
    /// JSONL lines that were not a flat JSON object.
    pub malformed: u64,
    /// Cells that did not parse as the declared type, per column.
    pub parse_failures: BTreeMap<String, u64>,
    /// Nulls in columns declared non-nullable (kept, not skipped).
    pub null_violations: u64,
}

impl SourceStats {
    pub fn skipped(&self) -> u64 {
        self.bad_event_time + self.malformed
    }
}

enum Input {
    Csv {
        reader: csv::Reader<Box<dyn Read + Send>>,
        header: Vec<Arc<str>>,
        record: csv::StringRecord,
    },
    Lines {
        reader: Box<dyn BufRead + Send>,
        line: u64,
        buf: Vec<u8>,
        socket: bool,
    },
}

struct Decoder {
    event_time: String,
    formats: Vec<TimeFormat>,
    columns: BTreeMap<String, (ValueType, bool)>,
    names: BTreeMap<String, Arc<str>>,
    schema_check: Option<SchemaMode>,
    expected: Vec<String>,
    checked: bool,
}

/// A replayed stream; also an iterator of elements.
pub struct Source {
    input: Input,
    decoder: Decoder,
    stats: SourceStats,
    replay: ReplayMode,
    last_event: Option<Timestamp>,
    stop: Option<Arc<AtomicBool>>,
    done: bool,
}

pub fn open_source(spec: &SourceSpec) -> Result<Source, SourceError> {
    spec.check()?;
    let decoder = Decoder {
        event_time: spec.event_time.clone(),
        formats: spec.time_formats.clone(),
        columns: spec
            .columns
            .iter()
            .map(|c| (c.name.clone(), (c.ty, c.nullable)))
            .collect(),
        names: BTreeMap::new(),
        schema_check: spec.schema_check,
        expected: spec.columns.iter().map(|c| c.name.clone()).collect(),
        checked: false,
    };
    let input = match spec.kind {
        SourceKind::Csv => {
            let path = spec.path.as_ref().expect("checked");
            let file = File::open(path).map_err(|source| SourceError::Open {
                path: path.clone(),
                source,
            })?;
            let mut reader = csv::ReaderBuilder::new()
                .flexible(true)
                .from_reader(Box::new(BufReader::new(file)) as Box<dyn Read + Send>);
            let header: Vec<Arc<str>> = reader.headers()?.iter().map(Arc::from).collect();
            Input::Csv {
                reader,
                header,
                record: csv::StringRecord::new(),
            }
        }
        SourceKind::Jsonl => {
            let path = spec.path.as_ref().expect("checked");
            let file = File::open(path).map_err(|source| SourceError::Open {
                path: path.clone(),
                source,
            })?;
            Input::Lines {
                reader: Box::new(BufReader::new(file)),
                line: 0,
                buf: Vec::new(),
                socket: false,
            }
        }
        SourceKind::Socket => {
            let address = spec.address.clone().expect("checked");
            let stream = TcpStream::connect(&address)
                .and_then(|s| s.set_read_timeout(Some(SOCKET_POLL)).map(|_| s))
                .map_err(|source| SourceError::Connect { address, source })?;
            Input::Lines {
                reader: Box::new(BufReader::new(stream)),
                line: 0,
                buf: Vec::new(),
                socket: true,
            }
        }
    };
    let mut source = Source {
        input,
        decoder,
        stats: SourceStats::default(),
        replay: spec.replay,
        last_event: None,
        stop: None,
        done: false,
    };
    if let Input::Csv { header, .. } = &source.input {
        let header = header.clone();
        source.decoder.check_columns(header.iter().map(|h| &**h))?;
    }
    Ok(source)
}

impl Source {
    /// Stops at the next record boundary once `flag` is set.
    pub fn with_stop(mut self, flag: Arc<AtomicBool>) -> Self {
        self.stop = Some(flag);
        self
    }

    pub fn stats(&self) -> &SourceStats {
        &self.stats
    }

    fn stopped(&self) -> bool {
        self.stop.as_ref().is_some_and(|s| s.load(Ordering::Relaxed))
    }

    pub fn next_element(&mut self) -> Result<Option<StreamElement>, SourceError> {
        loop {
            if self.done || self.stopped() {
                self.done = true;
                return Ok(None);
            }
            let parsed = match &mut self.input {
                Input::Csv { reader, header, record } => {
                    if !reader.read_record(record)? {
                        self.done = true;
                        return Ok(None);
                    }
                    let line = record.position().map_or(0, |p| p.line());
                    self.stats.total += 1;
                    self.decoder.decode_csv(header, record, line, &mut self.stats)
                }
                Input::Lines {
                    reader,
                    line,
                    buf,
                    socket,
                } => {
                    match read_line(reader.as_mut(), buf, *socket, self.stop.as_deref()) {
                        Ok(0) => {
                            self.done = true;
                            return Ok(None);
                        }
                        Ok(_) => {}
                        Err(source) => {
                            return Err(SourceError::Read {
                                line: *line + 1,
                                source,
                            })
                        }
                    }
                    *line += 1;
                    let text = String::from_utf8_lossy(buf);
                    let text = text.trim();
                    if text.is_empty() {
                        buf.clear();
                        continue;
                    }
                    self.stats.total += 1;
                    let parsed = self.decoder.decode_json(text, *line, &mut self.stats);
                    buf.clear();
                    parsed
                }
            };
            match parsed? {
                Some(e) => {
                    self.stats.yielded += 1;
                    self.pace(e.event_time);
                    return Ok(Some(e));
                }
                None => continue,
            }
        }
    }

    fn pace(&mut self, t: Timestamp) {
        if let ReplayMode::Scaled(factor) = self.replay {
            if let Some(prev) = self.last_event {
                let delta = t.millis_since(prev);
                if delta > 0 {
                    thread::sleep(Duration::from_secs_f64(delta as f64 / 1000.0 / factor));
                }
            }
        }
        self.last_event = Some(self.last_event.map_or(t, |p| p.max(t)));
    }
}

impl Iterator for Source {
    type Item = Result<StreamElement, SourceError>;

    fn next(&mut self) -> Option<Self::Item> {
        match self.next_element() {
            Ok(Some(e)) => Some(Ok(e)),
            Ok(None) => None,
            Err(e) => {
                self.done = true;
                Some(Err(e))
            }
        }
    }
}

/// Reads one line into `buf` (kept across socket timeouts so partial lines survive).
fn read_line(
    reader: &mut dyn BufRead,
    buf: &mut Vec<u8>,
    socket: bool,
    stop: Option<&AtomicBool>,
) -> io::Result<usize> {
    loop {
        match reader.read_until(b'\n', buf) {
            Ok(_) => return Ok(buf.len()),
            Err(e) if socket && matches!(e.kind(), io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut) => {
                if stop.is_some_and(|s| s.load(Ordering::Relaxed)) {
                    return Ok(buf.len());
                }
            }
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e),
        }
    }
}

/// Best-effort typing of an undeclared cell.
pub fn infer_cell(raw: &str) -> Value {
    if raw.is_empty() {
        return Value::Null;
    }
    if let Ok(i) = raw.parse::<i64>() {
        return Value::Int(i);
    }
    if let Ok(x) = raw.parse::<f64>() {
        if x.is_finite() {
            return Value::Float(x);
        }
    }
    match raw {
        "true" => Value::Bool(true),
        "false" => Value::Bool(false),
        _ => Value::text(raw),
    }
}

impl Decoder {
    fn name(&mut self, raw: &str) -> Arc<str> {
        if let Some(n) = self.names.get(raw) {
            return n.clone();
        }
        let n: Arc<str> = Arc::from(raw);
        self.names.insert(raw.to_string(), n.clone());
        n
    }

    fn check_columns<'a>(&mut self, found: impl Iterator<Item = &'a str>) -> Result<(), SourceError> {
        let found: Vec<String> = found.map(str::to_string).collect();
        self.checked = true;
        if !found.contains(&self.event_time) {
            return Err(SourceError::MissingEventTime(self.event_time.clone()));
        }
        if let Some(mode) = self.schema_check {
            let ok = match mode {
                SchemaMode::Presence => self.expected.iter().all(|c| found.contains(c)),
                SchemaMode::PresenceAbsence => {
                    self.expected.iter().all(|c| found.contains(c)) && found.iter().all(|c| self.expected.contains(c))
                }
                SchemaMode::PresenceOrder => found == self.expected,
            };
            if !ok {
                return Err(SourceError::Schema { found, mode });
            }
        }
        Ok(())
    }

    fn event_time(&self, raw: &str) -> Option<Timestamp> {
        self.formats.iter().find_map(|f| f.parse(raw))
    }

    /// `empty_is_null` is set for CSV cells, which cannot tell "" from a missing value.
    fn typed_text(&self, column: &str, raw: &str, empty_is_null: bool, stats: &mut SourceStats) -> Value {
        let Some(&(ty, nullable)) = self.columns.get(column) else {
            return infer_cell(raw);
        };
        let v = if raw.is_empty() && (empty_is_null || ty != ValueType::Text) {
            Value::Null
        } else {
            let parsed = match ty {
                ValueType::Text => Some(Value::text(raw)),
                ValueType::Int => raw.trim().parse::<i64>().ok().map(Value::Int),
                ValueType::Float => raw
                    .trim()
                    .parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .map(Value::Float),
                ValueType::Bool => match raw.trim() {
                    "true" | "True" | "TRUE" | "1" => Some(Value::Bool(true)),
                    "false" | "False" | "FALSE" | "0" => Some(Value::Bool(false)),
                    _ => None,
                },
                ValueType::Timestamp => self.event_time(raw).map(Value::Timestamp),
            };
            parsed.unwrap_or_else(|| {
                *stats.parse_failures.entry(column.to_string()).or_default() += 1;
                Value::Null
            })
        };
        if v.is_null() && !nullable {
            stats.null_violations += 1;
        }
        v
    }

    fn typed_json(&self, column: &str, json: &Json, stats: &mut SourceStats) -> Value {
        let Some(&(ty, nullable)) = self.columns.get(column) else {
            return Value::from_json(json).unwrap_or_else(|_| {
                *stats.parse_failures.entry(column.to_string()).or_default() += 1;
                Value::Null
            });
        };
        let v = match json {
            Json::Null => Value::Null,
            Json::String(s) => return self.typed_text(column, s, false, stats),
            other => {
                let parsed = match (ty, Value::from_json(other)) {
                    (_, Err(_)) => None,
                    (ValueType::Float, Ok(Value::Int(i))) => Some(Value::Float(i as f64)),
                    (ValueType::Int, Ok(Value::Float(x))) if x.fract() == 0.0 && x.abs() < 9.0e15 => {
                        Some(Value::Int(x as i64))
                    }
                    (ValueType::Text, Ok(v)) => Some(Value::text(v.to_string())),
                    (ValueType::Timestamp, Ok(Value::Int(i))) => self
                        .formats
                        .iter()
                        .find_map(|f| f.parse(&i.to_string()))
                        .map(Value::Timestamp),
                    (t, Ok(v)) if v.value_type() == Some(t) => Some(v),
                    _ => None,
                };
                parsed.unwrap_or_else(|| {
                    *stats.parse_failures.entry(column.to_string()).or_default() += 1;
                    Value::Null
                })
            }
        };
        if v.is_null() && !nullable {
            stats.null_violations += 1;
        }
        v
    }

    fn decode_csv(
        &mut self,
        header: &[Arc<str>],
        record: &csv::StringRecord,
        line: u64,
        stats: &mut SourceStats,
    ) -> Result<Option<StreamElement>, SourceError> {
        let mut event_time = None;
        let mut attrs = Vec::with_capacity(header.len());
        for (i, name) in header.iter().enumerate() {
            let raw = record.get(i).unwrap_or("");
            if **name == *self.event_time {
                event_time = self.event_time(raw);
                match event_time {
                    Some(t) => attrs.push((name.clone(), Value::Timestamp(t))),
                    None => break,
                }
            } else {
                attrs.push((name.clone(), self.typed_text(name, raw, true, stats)));
            }
        }
        let Some(t) = event_time else {
            stats.bad_event_time += 1;
            return Ok(None);
        };
        Ok(Some(StreamElement {
            event_time: t,
            arrival_seq: line,
            attrs,
        }))
    }

    fn decode_json(
        &mut self,
        text: &str,
        line: u64,
        stats: &mut SourceStats,
    ) -> Result<Option<StreamElement>, SourceError> {
        let object = match serde_json::from_str::<Json>(text) {
            Ok(Json::Object(m)) if m.values().all(|v| !v.is_array() && !is_nested(v)) => m,
            _ => {
                stats.malformed += 1;
                return Ok(None);
            }
        };
        if !self.checked {
            self.check_columns(object.keys().map(String::as_str))?;
        }
        let mut event_time = None;
        let mut attrs = Vec::with_capacity(object.len());
        for (key, json) in &object {
            let name = self.name(key);
            if *key == self.event_time {
                event_time = match json {
                    Json::String(s) => self.event_time(s),
                    Json::Number(n) => self.event_time(&n.to_string()),
                    other => Value::from_json(other).ok().and_then(|v| match v {
                        Value::Timestamp(t) => Some(t),
                        _ => None,
                    }),
                };
                match event_time {
                    Some(t) => attrs.push((name, Value::Timestamp(t))),
                    None => break,
                }
            } else {
                attrs.push((name, self.typed_json(key, json, stats)));
            }
        }
        let Some(t) = event_time else {
            stats.bad_event_time += 1;
            return Ok(None);
        };
        Ok(Some(StreamElement {
            event_time: t,
            arrival_seq: line,
            attrs,
        }))
    }
}

/// Objects other than the `{"ts": ...}` timestamp form are nested data.
fn is_nested(v: &Json) -> bool {
    match v {
        Json::Object(m) => !(m.len() == 1 && m.contains_key("ts")),
        _ => false,
    }
}
