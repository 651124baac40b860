use std::io;
use std::sync::atomic::AtomicBool;
use std::sync::mpsc::sync_channel;
use std::sync::Arc;
use std::thread;

use serde::Serialize;

use tidewatch::connectors::{open_sink, open_source, LineSink, SinkTarget, SourceError, SourceStats};
use tidewatch::model::MetaRecord;
use tidewatch::monitor::{Engine, RunStats};

use crate::config::{SetupError, SuiteConfig};

/// Elements buffered between the reader thread and the engine.
const QUEUE_DEPTH: usize = 4096;

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Setup(#[from] SetupError),
    #[error("source: {0}")]
    Source(#[from] SourceError),
    #[error("sink {target}: {source}")]
    Sink { target: String, source: io::Error },
}

impl RunError {
    /// Configuration problems, as opposed to I/O failures during the run.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            RunError::Setup(
                SetupError::Suite(_) | SetupError::Override(_) | SetupError::Source(SourceError::Config(_))
            ) | RunError::Source(SourceError::Config(_))
        )
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct RunSummary {
    pub engine: RunStats,
    pub source: SourceStats,
    pub meta_lines: u64,
    pub side_lines: u64,
}

struct Sinks {
    meta: LineSink,
    meta_target: SinkTarget,
    side: Option<(LineSink, SinkTarget)>,
}

impl Sinks {
    fn err(target: &SinkTarget) -> impl FnOnce(io::Error) -> RunError + '_ {
        move |source| RunError::Sink {
            target: target.to_string(),
            source,
        }
    }

    fn records(&mut self, records: &[MetaRecord]) -> Result<(), RunError> {
        if records.is_empty() {
            return Ok(());
        }
        for r in records {
            self.meta
                .write_line(&r.to_json_line())
                .map_err(Self::err(&self.meta_target))?;
        }
        self.flush()
    }

    fn flush(&mut self) -> Result<(), RunError> {
        self.meta.flush().map_err(Self::err(&self.meta_target))?;
        if let Some((sink, target)) = &mut self.side {
            sink.flush().map_err(Self::err(target))?;
        }
        Ok(())
    }
}

/// Replays the configured source through the suite until EOF or `stop`.
/// Check verdicts go to the meta sink; they never make the run fail.
pub fn run(config: &SuiteConfig, stop: Arc<AtomicBool>) -> Result<RunSummary, RunError> {
    let suite = config.build_suite()?;
    let source = open_source(&config.source)?.with_stop(stop);
    let meta_target = config.sinks.meta.clone().unwrap_or(SinkTarget::Stdout);
    let meta = open_sink(&meta_target).map_err(Sinks::err(&meta_target))?;
    let side = match &config.sinks.side {
        Some(t) => Some((open_sink(t).map_err(Sinks::err(t))?, t.clone())),
        None => None,
    };
    let mut sinks = Sinks {
        meta,
        meta_target,
        side,
    };
    let mut engine = Engine::new(suite, config.source.watermark_delay, config.workers());

    let (tx, rx) = sync_channel(QUEUE_DEPTH);
    let reader = thread::Builder::new()
        .name("source".into())
        .spawn(move || {
            let mut source = source;
            for item in source.by_ref() {
                let failed = item.is_err();
                if tx.send(item).is_err() || failed {
                    break;
                }
            }
            source.stats().clone()
        })
        .expect("spawn reader thread");

    for item in rx {
        let step = engine.ingest(item?);
        if let (Some(row), Some((sink, target))) = (&step.side, &mut sinks.side) {
            sink.write_line(&row.to_json_line()).map_err(Sinks::err(target))?;
        }
        sinks.records(&step.records)?;
    }
    let source_stats = reader.join().expect("reader thread panicked");
    let tail = engine.finish();
    sinks.records(&tail)?;
    sinks.flush()?;
    Ok(RunSummary {
        engine: engine.stats().clone(),
        source: source_stats,
        meta_lines: sinks.meta.lines(),
        side_lines: sinks.side.as_ref().map_or(0, |(s, _)| s.lines()),
    })
}
