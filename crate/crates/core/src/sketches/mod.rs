//! Approximate per-pane summaries: distinct counting and frequent items.

mod frequent;
mod hll;

pub use frequent::{FrequentItem, FrequentItemsSketch};
pub use hll::{CardinalityEstimator, DEFAULT_HASH_SEED};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SketchError {
    #[error("precision {0} is outside 4..=16")]
    Precision(u8),
    #[error("capacity must be positive")]
    Capacity,
    #[error("phi {0} is outside (0, 1]")]
    Phi(f64),
}
