use std::collections::BTreeMap;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use tidewatch::connectors::{load_reference, load_stream, ReferenceError, SinkTarget, SourceError, SourceSpec};
use tidewatch::model::{CheckDefinition, Span, WindowKind, WindowSpec};
use tidewatch::monitor::{validate_suite, DetectorConfig, Suite, SuiteDef, SuiteErrors};

/// Environment variable supplying `engine.hash_seed` when the config omits it.
pub const HASH_SEED_ENV: &str = "TIDEWATCH_HASH_SEED";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceSpec {
    pub id: String,
    pub path: PathBuf,
    pub key: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SinkConfig {
    /// Meta-stream target; stdout when unset.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meta: Option<SinkTarget>,
    /// Side output for failing elements; dropped when unset.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub side: Option<SinkTarget>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EngineConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hash_seed: Option<u64>,
}

/// One JSON document describing a monitoring run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteConfig {
    pub source: SourceSpec,
    /// Secondary streams for `match_ratio`, by id.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub streams: BTreeMap<String, SourceSpec>,
    pub window: WindowSpec,
    pub checks: Vec<CheckDefinition>,
    #[serde(default)]
    pub detectors: DetectorConfig,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub references: Vec<ReferenceSpec>,
    #[serde(default)]
    pub sinks: SinkConfig,
    #[serde(default)]
    pub engine: EngineConfig,
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigLoadError {
    #[error("cannot read {}: {source}", path.display())]
    Read { path: PathBuf, source: io::Error },
    #[error("{}: {source}", path.display())]
    Parse { path: PathBuf, source: serde_json::Error },
    #[error("{HASH_SEED_ENV}={0:?} is not an unsigned integer")]
    Seed(String),
}

/// Problems found while turning a config into a runnable suite.
#[derive(Debug, thiserror::Error)]
pub enum SetupError {
    #[error(transparent)]
    Reference(#[from] ReferenceError),
    #[error("stream `{id}`: {source}")]
    Stream { id: String, source: SourceError },
    #[error("source: {0}")]
    Source(#[from] SourceError),
    #[error(transparent)]
    Suite(#[from] SuiteErrors),
    #[error("{0}")]
    Override(String),
}

impl SuiteConfig {
    pub fn from_json(text: &str) -> Result<SuiteConfig, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Makes relative paths absolute against `base` and fills engine defaults.
    pub fn normalize(&mut self, base: &Path) -> Result<(), ConfigLoadError> {
        self.source.resolve_paths(base);
        for s in self.streams.values_mut() {
            s.resolve_paths(base);
        }
        for r in &mut self.references {
            if r.path.is_relative() {
                r.path = base.join(&r.path);
            }
        }
        for t in [&mut self.sinks.meta, &mut self.sinks.side].into_iter().flatten() {
            t.resolve_paths(base);
        }
        if self.engine.workers.is_none() {
            self.engine.workers = Some(std::thread::available_parallelism().map_or(1, |n| n.get()));
        }
        if self.engine.hash_seed.is_none() {
            self.engine.hash_seed = Some(match std::env::var(HASH_SEED_ENV) {
                Ok(v) => v.trim().parse().map_err(|_| ConfigLoadError::Seed(v))?,
                Err(_) => tidewatch::sketches::DEFAULT_HASH_SEED,
            });
        }
        Ok(())
    }

    /// Replaces the pane length and/or slide. A slide turns tumbling panes into sliding ones.
    pub fn override_window(&mut self, duration: Option<Span>, slide: Option<Span>) -> Result<(), SetupError> {
        if duration.is_none() && slide.is_none() {
            return Ok(());
        }
        let kind = match (self.window.kind, duration, slide) {
            (WindowKind::Session { .. }, _, _) => {
                return Err(SetupError::Override("session windows have no duration or slide".into()))
            }
            (WindowKind::Tumbling { duration: d }, nd, None) => WindowKind::Tumbling {
                duration: nd.unwrap_or(d),
            },
            (WindowKind::Tumbling { duration: d }, nd, Some(s)) => WindowKind::Sliding {
                duration: nd.unwrap_or(d),
                slide: s,
            },
            (WindowKind::Sliding { duration: d, slide: s }, nd, ns) => WindowKind::Sliding {
                duration: nd.unwrap_or(d),
                slide: ns.unwrap_or(s),
            },
        };
        let window = WindowSpec { kind, ..self.window };
        window
            .check()
            .map_err(|e| SetupError::Override(format!("window override: {e}")))?;
        self.window = window;
        Ok(())
    }

    pub fn workers(&self) -> usize {
        self.engine.workers.unwrap_or(1).max(1)
    }

    /// Loads references and secondary streams and validates the checks.
    pub fn build_suite(&self) -> Result<Suite, SetupError> {
        self.source.check()?;
        let mut references = BTreeMap::new();
        for r in &self.references {
            references.insert(r.id.clone(), load_reference(&r.path, &r.id, &r.key)?);
        }
        let mut streams = BTreeMap::new();
        for (id, spec) in &self.streams {
            let stream = load_stream(spec).map_err(|source| SetupError::Stream { id: id.clone(), source })?;
            streams.insert(id.clone(), stream);
        }
        let schema = (!self.source.columns.is_empty()).then(|| self.source.schema());
        Ok(validate_suite(SuiteDef {
            checks: self.checks.clone(),
            window: self.window,
            schema,
            references,
            streams,
            detectors: self.detectors.clone(),
            hash_seed: self.engine.hash_seed.unwrap_or(tidewatch::sketches::DEFAULT_HASH_SEED),
        })?)
    }
}

/// Reads, parses and normalizes a config file.
pub fn load_config(path: &Path) -> Result<SuiteConfig, ConfigLoadError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigLoadError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    let mut config = SuiteConfig::from_json(&text).map_err(|source| ConfigLoadError::Parse {
        path: path.to_path_buf(),
        source,
    })?;
    let base = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    config.normalize(base)?;
    Ok(config)
}
