//! File and socket sources, reference loading, line sinks and the synthetic
//! stream generator.

mod generator;
mod reference;
mod sink;
mod source;

pub use generator::{
    default_manifest_path, generate, read_manifest, write_stream, ColumnGen, GenColumn, Generated, Generator,
    GeneratorError, GeneratorSpec, Injection, ManifestEntry, OutputFormat,
};
pub use reference::{load_reference, load_stream, ReferenceError};
pub use sink::{open_sink, LineSink, SinkTarget};
pub use source::{
    infer_cell, open_source, ColumnSpec, ReplayMode, Source, SourceError, SourceKind, SourceSpec, SourceStats,
};
