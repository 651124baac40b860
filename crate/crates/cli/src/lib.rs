//! Configuration loading, the run pipeline and the bench harness behind the
//! `tidewatch` command.

pub mod bench;
pub mod config;
pub mod run;

pub use bench::{bench, BenchOptions, BenchReport, Dist, Scaling, SizeReport};
pub use config::{
    load_config, ConfigLoadError, EngineConfig, ReferenceSpec, SetupError, SinkConfig, SuiteConfig, HASH_SEED_ENV,
};
pub use run::{run, RunError, RunSummary};
