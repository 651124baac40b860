use std::fmt;
use std::io::{self, Write};
use std::time::{Duration, Instant};

use serde::Serialize;

use tidewatch::connectors::open_source;
use tidewatch::model::MetaRecord;
use tidewatch::monitor::Engine;

use crate::config::SuiteConfig;
use crate::run::RunError;

#[derive(Debug, Clone)]
pub struct BenchOptions {
    pub sizes: Vec<usize>,
    pub repeats: usize,
    /// Records replayed untimed before the first measured run.
    pub warmup: usize,
}

impl BenchOptions {
    pub fn new(sizes: Vec<usize>, repeats: usize) -> Self {
        let smallest = sizes.iter().copied().min().unwrap_or(0);
        BenchOptions {
            sizes,
            repeats,
            warmup: (smallest / 5).max(1000),
        }
    }
}

/// Mean and tail of a sample, in milliseconds.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct Dist {
    pub mean: f64,
    pub p50: f64,
    pub p95: f64,
    pub max: f64,
}

impl Dist {
    /// Nearest-rank percentiles.
    pub fn of(samples: &mut [f64]) -> Dist {
        if samples.is_empty() {
            return Dist::default();
        }
        samples.sort_by(f64::total_cmp);
        let rank = |q: f64| samples[((q * samples.len() as f64).ceil() as usize).clamp(1, samples.len()) - 1];
        Dist {
            mean: samples.iter().sum::<f64>() / samples.len() as f64,
            p50: rank(0.5),
            p95: rank(0.95),
            max: samples[samples.len() - 1],
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SizeReport {
    /// Records actually replayed (the source may hold fewer than requested).
    pub records: u64,
    pub repeats: usize,
    /// Wall time of each repeat, in seconds.
    pub wall_s: Vec<f64>,
    pub mean_wall_s: f64,
    pub throughput: f64,
    /// Panes closed per run, over all partitions.
    pub windows: u64,
    pub late_discards: u64,
    /// Wall time between consecutive pane emissions, per pane, over all repeats.
    pub window_total_ms: Dist,
    /// Engine time spent on each pane's elements and its close, excluding parsing.
    pub window_net_ms: Dist,
    /// Sum of per-pane net time, averaged over repeats, in seconds.
    pub net_s: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Scaling {
    pub from_records: u64,
    pub to_records: u64,
    pub record_ratio: f64,
    pub time_ratio: f64,
    /// `time_ratio / record_ratio`; 1.0 is perfectly linear.
    pub linearity: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchReport {
    pub warmup_records: u64,
    pub sizes: Vec<SizeReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scaling: Option<Scaling>,
}

struct Sample {
    records: u64,
    wall: Duration,
    windows: u64,
    late: u64,
    totals: Vec<f64>,
    nets: Vec<f64>,
}

/// Serializes records into a discarded buffer so formatting cost is counted.
fn emit(records: &[MetaRecord], out: &mut io::Sink) {
    for r in records {
        let _ = writeln!(out, "{}", r.to_json_line());
    }
}

fn once(config: &SuiteConfig, limit: usize) -> Result<Sample, RunError> {
    let started = Instant::now();
    let suite = config.build_suite()?;
    let mut source = open_source(&config.source)?;
    let mut engine = Engine::new(suite, config.source.watermark_delay, config.workers());
    let mut out = io::sink();
    let mut totals = Vec::new();
    let mut nets = Vec::new();
    let mut net = Duration::ZERO;
    let mut last_close = Instant::now();
    let mut closed = 0;
    let mut attribute = |engine: &Engine, net: &mut Duration, closed: &mut u64, last_close: &mut Instant| {
        let now_closed = engine.stats().panes_closed;
        let k = now_closed - *closed;
        if k > 0 {
            let now = Instant::now();
            let total = now.duration_since(*last_close).as_secs_f64() * 1000.0 / k as f64;
            let per = net.as_secs_f64() * 1000.0 / k as f64;
            totals.extend(std::iter::repeat_n(total, k as usize));
            nets.extend(std::iter::repeat_n(per, k as usize));
            *net = Duration::ZERO;
            *closed = now_closed;
            *last_close = now;
        }
    };
    let mut records = 0u64;
    while records < limit as u64 {
        let Some(e) = source.next_element()? else { break };
        records += 1;
        let t0 = Instant::now();
        let step = engine.ingest(e);
        net += t0.elapsed();
        emit(&step.records, &mut out);
        attribute(&engine, &mut net, &mut closed, &mut last_close);
    }
    let t0 = Instant::now();
    let tail = engine.finish();
    net += t0.elapsed();
    emit(&tail, &mut out);
    attribute(&engine, &mut net, &mut closed, &mut last_close);
    Ok(Sample {
        records,
        wall: started.elapsed(),
        windows: engine.stats().panes_closed,
        late: engine.stats().discarded,
        totals,
        nets,
    })
}

/// Warm-up, then `repeats` timed replays of the first N source records per size.
pub fn bench(config: &SuiteConfig, opts: &BenchOptions) -> Result<BenchReport, RunError> {
    let warm = once(config, opts.warmup)?;
    let mut sizes = Vec::with_capacity(opts.sizes.len());
    for &n in &opts.sizes {
        let mut samples = Vec::with_capacity(opts.repeats);
        for _ in 0..opts.repeats.max(1) {
            samples.push(once(config, n)?);
        }
        let records = samples[0].records;
        if records < n as u64 {
            log::warn!("source holds {records} records, fewer than the requested {n}");
        }
        let wall_s: Vec<f64> = samples.iter().map(|s| s.wall.as_secs_f64()).collect();
        let mean_wall_s = wall_s.iter().sum::<f64>() / wall_s.len() as f64;
        let mut totals: Vec<f64> = samples.iter().flat_map(|s| s.totals.iter().copied()).collect();
        let mut nets: Vec<f64> = samples.iter().flat_map(|s| s.nets.iter().copied()).collect();
        let net_s = nets.iter().sum::<f64>() / 1000.0 / samples.len() as f64;
        sizes.push(SizeReport {
            records,
            repeats: samples.len(),
            mean_wall_s,
            throughput: if mean_wall_s > 0.0 {
                records as f64 / mean_wall_s
            } else {
                0.0
            },
            wall_s,
            windows: samples[0].windows,
            late_discards: samples[0].late,
            window_total_ms: Dist::of(&mut totals),
            window_net_ms: Dist::of(&mut nets),
            net_s,
        });
    }
    let scaling = match (
        sizes.iter().min_by_key(|s| s.records),
        sizes.iter().max_by_key(|s| s.records),
    ) {
        (Some(a), Some(b)) if b.records > a.records && a.mean_wall_s > 0.0 => {
            let record_ratio = b.records as f64 / a.records as f64;
            let time_ratio = b.mean_wall_s / a.mean_wall_s;
            Some(Scaling {
                from_records: a.records,
                to_records: b.records,
                record_ratio,
                time_ratio,
                linearity: time_ratio / record_ratio,
            })
        }
        _ => None,
    };
    Ok(BenchReport {
        warmup_records: warm.records,
        sizes,
        scaling,
    })
}

impl fmt::Display for BenchReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{:>9} {:>7} {:>9} {:>12} {:>8} {:>6} {:>23} {:>23}",
            "records",
            "repeats",
            "wall s",
            "records/s",
            "windows",
            "late",
            "window total ms p50/p95",
            "window net ms p50/p95"
        )?;
        for s in &self.sizes {
            writeln!(
                f,
                "{:>9} {:>7} {:>9.3} {:>12.0} {:>8} {:>6} {:>11.3}/{:<11.3} {:>11.3}/{:<11.3}",
                s.records,
                s.repeats,
                s.mean_wall_s,
                s.throughput,
                s.windows,
                s.late_discards,
                s.window_total_ms.p50,
                s.window_total_ms.p95,
                s.window_net_ms.p50,
                s.window_net_ms.p95
            )?;
        }
        if let Some(sc) = &self.scaling {
            writeln!(
                f,
                "scaling {} -> {} records: x{:.2} records, x{:.2} wall time (linearity {:.2})",
                sc.from_records, sc.to_records, sc.record_ratio, sc.time_ratio, sc.linearity
            )?;
        }
        Ok(())
    }
}
