//! Window-based data quality monitoring for event streams.

pub mod connectors;
pub mod expression;
pub mod measures;
pub mod model;
pub mod monitor;
pub mod sketches;
pub mod windowing;
