use std::collections::{BTreeSet, VecDeque};
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::distr::weighted::WeightedIndex;
use rand::distr::{Distribution, Uniform};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Normal, Zipf};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value as Json};

use crate::model::{Span, StreamElement, Timestamp, Value};

/// Mixed into the seed for the out-of-order shuffles so base data does not
/// depend on which injections are configured.
const SHUFFLE_STREAM: u64 = 0x5DEE_CE66_D1CE_5EED;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    #[default]
    Csv,
    Jsonl,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ColumnGen {
    /// start, start+1, ... in generation order.
    Sequence {
        #[serde(default)]
        start: i64,
    },
    Uniform {
        lo: f64,
        hi: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        decimals: Option<u32>,
    },
    Normal {
        mean: f64,
        std: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        decimals: Option<u32>,
    },
    /// Inclusive integer range.
    Int {
        lo: i64,
        hi: i64,
    },
    Choice {
        values: Vec<Value>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        weights: Option<Vec<f64>>,
    },
    /// Ranks 1..=n; rendered as `prefix` + rank when a prefix is set.
    Zipf {
        n: u64,
        s: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        prefix: Option<String>,
    },
    Constant {
        value: Value,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenColumn {
    pub name: String,
    pub gen: ColumnGen,
}

/// An anomaly applied to records whose event time falls in
/// `[stream start + start, stream start + start + duration)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Injection {
    MissingBurst {
        column: String,
        start: Span,
        duration: Span,
    },
    PlaceholderBurst {
        column: String,
        token: String,
        start: Span,
        duration: Span,
    },
    /// Every record in the span is emitted twice in a row.
    DuplicateBurst { start: Span, duration: Span },
    /// Consecutive blocks of `shuffle` records are permuted.
    OutOfOrder {
        shuffle: usize,
        start: Span,
        duration: Span,
    },
    /// Holds `column` at `value`, or at its first generated value in the span.
    Frozen {
        column: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        value: Option<Value>,
        start: Span,
        duration: Span,
    },
    FareSpike {
        column: String,
        value: Value,
        start: Span,
        duration: Span,
    },
}

impl Injection {
    pub fn name(&self) -> &'static str {
        match self {
            Injection::MissingBurst { .. } => "missing_burst",
            Injection::PlaceholderBurst { .. } => "placeholder_burst",
            Injection::DuplicateBurst { .. } => "duplicate_burst",
            Injection::OutOfOrder { .. } => "out_of_order",
            Injection::Frozen { .. } => "frozen",
            Injection::FareSpike { .. } => "fare_spike",
        }
    }

    pub fn column(&self) -> Option<&str> {
        match self {
            Injection::MissingBurst { column, .. }
            | Injection::PlaceholderBurst { column, .. }
            | Injection::Frozen { column, .. }
            | Injection::FareSpike { column, .. } => Some(column),
            Injection::DuplicateBurst { .. } | Injection::OutOfOrder { .. } => None,
        }
    }

    /// Offset and length relative to the stream start.
    pub fn offsets(&self) -> (Span, Span) {
        match self {
            Injection::MissingBurst { start, duration, .. }
            | Injection::PlaceholderBurst { start, duration, .. }
            | Injection::DuplicateBurst { start, duration }
            | Injection::OutOfOrder { start, duration, .. }
            | Injection::Frozen { start, duration, .. }
            | Injection::FareSpike { start, duration, .. } => (*start, *duration),
        }
    }

    pub fn span(&self, origin: Timestamp) -> (Timestamp, Timestamp) {
        let (start, duration) = self.offsets();
        let s = origin + start;
        (s, s + duration)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorSpec {
    pub seed: u64,
    pub start: Timestamp,
    /// Records per second of event time.
    pub rate: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duration: Option<Span>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub records: Option<u64>,
    #[serde(default)]
    pub format: OutputFormat,
    #[serde(default = "default_time_column")]
    pub time_column: String,
    pub columns: Vec<GenColumn>,
    #[serde(default)]
    pub injections: Vec<Injection>,
}

fn default_time_column() -> String {
    "event_time".into()
}

/// One ground-truth entry of the manifest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    #[serde(rename = "type")]
    pub kind: String,
    pub column: Option<String>,
    pub start: Timestamp,
    pub end: Timestamp,
    pub seed: u64,
}

#[derive(Debug, thiserror::Error)]
pub enum GeneratorError {
    #[error("invalid generator spec: {0}")]
    Spec(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl GeneratorSpec {
    /// Number of base records before duplication.
    pub fn base_records(&self) -> u64 {
        match (self.records, self.duration) {
            (Some(n), _) => n,
            (None, Some(d)) => (d.millis() as f64 * self.rate / 1000.0).floor() as u64,
            (None, None) => 0,
        }
    }

    /// Event time of base record `i`.
    pub fn time_of(&self, i: u64) -> Timestamp {
        Timestamp::from_millis(self.start.millis() + (i as f64 * 1000.0 / self.rate).floor() as i64)
    }

    /// Event-time length covered by the stream.
    pub fn stream_span(&self) -> Span {
        match (self.duration, self.records) {
            (Some(d), _) => d,
            (None, Some(n)) => Span::from_millis((n as f64 * 1000.0 / self.rate).ceil() as i64),
            (None, None) => Span::ZERO,
        }
    }

    pub fn manifest(&self) -> Vec<ManifestEntry> {
        self.injections
            .iter()
            .map(|inj| {
                let (start, end) = inj.span(self.start);
                ManifestEntry {
                    kind: inj.name().to_string(),
                    column: inj.column().map(str::to_string),
                    start,
                    end,
                    seed: self.seed,
                }
            })
            .collect()
    }

    pub fn validate(&self) -> Result<(), GeneratorError> {
        let err = |m: String| Err(GeneratorError::Spec(m));
        if !(self.rate.is_finite() && self.rate > 0.0) {
            return err(format!("rate must be positive, got {}", self.rate));
        }
        match (self.duration, self.records) {
            (Some(_), Some(_)) => return err("set either `duration` or `records`, not both".into()),
            (None, None) => return err("one of `duration` or `records` is required".into()),
            (Some(d), None) if d.millis() <= 0 => return err("duration must be positive".into()),
            _ => {}
        }
        let mut names = BTreeSet::new();
        names.insert(self.time_column.as_str());
        for c in &self.columns {
            if !names.insert(c.name.as_str()) {
                return err(format!("duplicate column `{}`", c.name));
            }
            let bad = match &c.gen {
                ColumnGen::Uniform { lo, hi, .. } => !(lo.is_finite() && hi.is_finite() && lo < hi),
                ColumnGen::Normal { mean, std, .. } => !(mean.is_finite() && std.is_finite() && *std >= 0.0),
                ColumnGen::Int { lo, hi } => lo > hi,
                ColumnGen::Choice { values, weights } => {
                    values.is_empty()
                        || weights.as_ref().is_some_and(|w| {
                            w.len() != values.len()
                                || w.iter().any(|x| !x.is_finite() || *x < 0.0)
                                || w.iter().sum::<f64>() <= 0.0
                        })
                }
                ColumnGen::Zipf { n, s, .. } => *n == 0 || !(s.is_finite() && *s >= 0.0),
                ColumnGen::Sequence { .. } | ColumnGen::Constant { .. } => false,
            };
            if bad {
                return err(format!("column `{}` has invalid generator parameters", c.name));
            }
        }
        let total = self.stream_span();
        for inj in &self.injections {
            let (start, duration) = inj.offsets();
            if start.millis() < 0 || duration.millis() <= 0 || start.millis() + duration.millis() > total.millis() {
                return err(format!(
                    "{} [{start}, +{duration}) falls outside the stream duration {total}",
                    inj.name()
                ));
            }
            if let Some(col) = inj.column() {
                if !self.columns.iter().any(|c| c.name == col) {
                    return err(format!("{} targets unknown column `{col}`", inj.name()));
                }
            }
            if let Injection::OutOfOrder { shuffle, .. } = inj {
                if *shuffle < 2 {
                    return err("out_of_order shuffle must be at least 2".into());
                }
            }
        }
        Ok(())
    }
}

enum Sampler {
    Sequence(i64),
    Uniform(Uniform<f64>, Option<u32>),
    Normal(Normal<f64>, Option<u32>),
    Int(Uniform<i64>),
    Choice(Vec<Value>, Option<WeightedIndex<f64>>),
    Zipf(Zipf<f64>, Option<String>),
    Constant(Value),
}

fn round(x: f64, decimals: Option<u32>) -> f64 {
    match decimals {
        Some(d) => {
            let scale = 10f64.powi(d as i32);
            (x * scale).round() / scale
        }
        None => x,
    }
}

impl Sampler {
    fn new(gen: &ColumnGen) -> Sampler {
        match gen {
            ColumnGen::Sequence { start } => Sampler::Sequence(*start),
            ColumnGen::Uniform { lo, hi, decimals } => {
                Sampler::Uniform(Uniform::new(*lo, *hi).expect("validated"), *decimals)
            }
            ColumnGen::Normal { mean, std, decimals } => {
                Sampler::Normal(Normal::new(*mean, *std).expect("validated"), *decimals)
            }
            ColumnGen::Int { lo, hi } => Sampler::Int(Uniform::new_inclusive(*lo, *hi).expect("validated")),
            ColumnGen::Choice { values, weights } => Sampler::Choice(
                values.clone(),
                weights
                    .as_ref()
                    .map(|w| WeightedIndex::new(w.iter().copied()).expect("validated")),
            ),
            ColumnGen::Zipf { n, s, prefix } => {
                Sampler::Zipf(Zipf::new(*n as f64, *s).expect("validated"), prefix.clone())
            }
            ColumnGen::Constant { value } => Sampler::Constant(value.clone()),
        }
    }

    fn sample(&mut self, rng: &mut ChaCha8Rng) -> Value {
        match self {
            Sampler::Sequence(next) => {
                let v = *next;
                *next += 1;
                Value::Int(v)
            }
            Sampler::Uniform(d, decimals) => Value::float(round(d.sample(rng), *decimals)),
            Sampler::Normal(d, decimals) => Value::float(round(d.sample(rng), *decimals)),
            Sampler::Int(d) => Value::Int(d.sample(rng)),
            Sampler::Choice(values, weights) => {
                let i = match weights {
                    Some(w) => w.sample(rng),
                    None => Uniform::new(0, values.len()).expect("non-empty").sample(rng),
                };
                values[i].clone()
            }
            Sampler::Zipf(d, prefix) => {
                let k = d.sample(rng) as i64;
                match prefix {
                    Some(p) => Value::text(format!("{p}{k}")),
                    None => Value::Int(k),
                }
            }
            Sampler::Constant(v) => v.clone(),
        }
    }
}

/// Seeded element iterator over a [`GeneratorSpec`].
pub struct Generator {
    spec: GeneratorSpec,
    names: Vec<std::sync::Arc<str>>,
    samplers: Vec<Sampler>,
    rng: ChaCha8Rng,
    shuffle_rng: ChaCha8Rng,
    spans: Vec<(Timestamp, Timestamp)>,
    frozen: Vec<Option<Value>>,
    next: u64,
    total: u64,
    queue: VecDeque<StreamElement>,
    emitted: u64,
}

pub fn generate(spec: &GeneratorSpec) -> Result<Generator, GeneratorError> {
    spec.validate()?;
    let mut names = vec![std::sync::Arc::from(spec.time_column.as_str())];
    names.extend(spec.columns.iter().map(|c| std::sync::Arc::from(c.name.as_str())));
    Ok(Generator {
        names,
        samplers: spec.columns.iter().map(|c| Sampler::new(&c.gen)).collect(),
        rng: ChaCha8Rng::seed_from_u64(spec.seed),
        shuffle_rng: ChaCha8Rng::seed_from_u64(spec.seed ^ SHUFFLE_STREAM),
        spans: spec.injections.iter().map(|i| i.span(spec.start)).collect(),
        frozen: spec
            .injections
            .iter()
            .map(|i| match i {
                Injection::Frozen { value, .. } => value.clone(),
                _ => None,
            })
            .collect(),
        next: 0,
        total: spec.base_records(),
        queue: VecDeque::new(),
        emitted: 0,
        spec: spec.clone(),
    })
}

impl Generator {
    fn in_span(&self, k: usize, t: Timestamp) -> bool {
        let (s, e) = self.spans[k];
        s <= t && t < e
    }

    /// Base record `next` with value injections applied.
    fn record(&mut self) -> StreamElement {
        let t = self.spec.time_of(self.next);
        self.next += 1;
        let mut values: Vec<Value> = self.samplers.iter_mut().map(|s| s.sample(&mut self.rng)).collect();
        for k in 0..self.spec.injections.len() {
            if !self.in_span(k, t) {
                continue;
            }
            let col = |name: &str| {
                self.spec
                    .columns
                    .iter()
                    .position(|c| c.name == name)
                    .expect("validated")
            };
            match &self.spec.injections[k] {
                Injection::MissingBurst { column, .. } => values[col(column)] = Value::Null,
                Injection::PlaceholderBurst { column, token, .. } => values[col(column)] = Value::text(token.as_str()),
                Injection::FareSpike { column, value, .. } => values[col(column)] = value.clone(),
                Injection::Frozen { column, .. } => {
                    let i = col(column);
                    let held = self.frozen[k].get_or_insert_with(|| values[i].clone());
                    values[i] = held.clone();
                }
                Injection::DuplicateBurst { .. } | Injection::OutOfOrder { .. } => {}
            }
        }
        let mut attrs = Vec::with_capacity(self.names.len());
        attrs.push((self.names[0].clone(), Value::Timestamp(t)));
        attrs.extend(self.names[1..].iter().cloned().zip(values));
        StreamElement {
            event_time: t,
            arrival_seq: 0,
            attrs,
        }
    }

    fn shuffle_block(&self, t: Timestamp) -> Option<usize> {
        self.spec.injections.iter().enumerate().find_map(|(k, inj)| match inj {
            Injection::OutOfOrder { shuffle, .. } if self.in_span(k, t) => Some(*shuffle),
            _ => None,
        })
    }

    fn duplicated(&self, t: Timestamp) -> bool {
        self.spec
            .injections
            .iter()
            .enumerate()
            .any(|(k, inj)| matches!(inj, Injection::DuplicateBurst { .. }) && self.in_span(k, t))
    }

    fn refill(&mut self) {
        if self.next >= self.total {
            return;
        }
        let t = self.spec.time_of(self.next);
        let mut block = Vec::new();
        match self.shuffle_block(t) {
            Some(size) => {
                while block.len() < size && self.next < self.total {
                    let t = self.spec.time_of(self.next);
                    if self.shuffle_block(t).is_none() {
                        break;
                    }
                    block.push(self.record());
                }
                if block.len() > 1 {
                    block.shuffle(&mut self.shuffle_rng);
                    if block.windows(2).all(|w| w[0].event_time <= w[1].event_time) {
                        block.rotate_left(1);
                    }
                }
            }
            None => block.push(self.record()),
        }
        for e in block {
            if self.duplicated(e.event_time) {
                self.queue.push_back(e.clone());
            }
            self.queue.push_back(e);
        }
    }
}

impl Iterator for Generator {
    type Item = StreamElement;

    fn next(&mut self) -> Option<StreamElement> {
        if self.queue.is_empty() {
            self.refill();
        }
        let mut e = self.queue.pop_front()?;
        self.emitted += 1;
        e.arrival_seq = self.emitted;
        Some(e)
    }
}

fn cell(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::Timestamp(t) => t.to_iso(),
        other => other.to_string(),
    }
}

fn json_cell(v: &Value) -> Json {
    match v {
        Value::Timestamp(t) => Json::String(t.to_iso()),
        other => other.to_json(),
    }
}

/// Summary of a written stream.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Generated {
    pub records: u64,
    pub out: PathBuf,
    pub manifest: PathBuf,
    pub injections: usize,
}

/// `<out>.manifest.jsonl`
pub fn default_manifest_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".manifest.jsonl");
    out.with_file_name(name)
}

/// Writes the stream to `out` and the ground-truth manifest to `manifest`.
pub fn write_stream(spec: &GeneratorSpec, out: &Path, manifest: &Path) -> Result<Generated, GeneratorError> {
    let gen = generate(spec)?;
    let mut w = BufWriter::new(File::create(out)?);
    let mut records = 0;
    match spec.format {
        OutputFormat::Csv => {
            let mut csv = csv::Writer::from_writer(w);
            csv.write_record(gen.names.iter().map(|n| n.as_bytes()))
                .map_err(io::Error::from)?;
            for e in gen {
                csv.write_record(e.attrs.iter().map(|(_, v)| cell(v)))
                    .map_err(io::Error::from)?;
                records += 1;
            }
            csv.flush()?;
        }
        OutputFormat::Jsonl => {
            for e in gen {
                let object: serde_json::Map<String, Json> =
                    e.attrs.iter().map(|(n, v)| (n.to_string(), json_cell(v))).collect();
                serde_json::to_writer(&mut w, &object).map_err(io::Error::from)?;
                w.write_all(b"\n")?;
                records += 1;
            }
            w.flush()?;
        }
    }
    let mut m = BufWriter::new(File::create(manifest)?);
    for entry in spec.manifest() {
        let line = json!({
            "type": entry.kind,
            "column": entry.column,
            "start": entry.start.to_iso(),
            "end": entry.end.to_iso(),
            "seed": entry.seed,
        });
        writeln!(m, "{line}")?;
    }
    m.flush()?;
    Ok(Generated {
        records,
        out: out.to_path_buf(),
        manifest: manifest.to_path_buf(),
        injections: spec.injections.len(),
    })
}

/// Reads a manifest written by [`write_stream`].
pub fn read_manifest(path: &Path) -> io::Result<Vec<ManifestEntry>> {
    std::fs::read_to_string(path)?
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(io::Error::from))
        .collect()
}
