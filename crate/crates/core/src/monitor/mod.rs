//! Runs a check suite over closed panes: measurement, assessment against
//! static, context or reference constraints, cross-window detectors and
//! routing of failing elements.

mod context;
mod detectors;
mod engine;
mod reference;
mod validate;

pub use context::{ContextState, ContextView, Summary};
pub use detectors::{
    DeadStreamConfig, DeadStreamDetector, DetectorConfig, FrozenConfig, FrozenDetector, LateDiscardCounter,
    RelativeVolumeConfig, RelativeVolumeDetector, RestartTrigger, DEAD_STREAM, FROZEN_STREAM, LATE_DISCARDS,
    RELATIVE_VOLUME,
};
pub use engine::{Engine, RunStats, SideRow, Step};
pub use reference::{ReferenceTable, DEFAULT_ROW_KEY};
pub use validate::{validate_suite, CompiledCheck, ConfigError, Suite, SuiteDef, SuiteErrors};
