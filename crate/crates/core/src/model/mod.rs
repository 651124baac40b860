//! Domain types shared across the engine: values, elements, window specs,
//! check definitions and meta-stream records.

mod check;
mod element;
mod meta;
mod time;
mod value;
mod window;

pub use check::{
    compare, in_range, CheckDefinition, CompareOp, Constraint, ConstraintError, ConstraintSpec, ContextSpec,
    ContextValues, NullPolicy, ReferenceBinding,
};
pub use element::StreamElement;
pub use meta::{Detail, MetaParseError, MetaRecord};
pub use time::{Span, TimeFormat, Timestamp};
pub use value::{Value, ValueType};
pub use window::{WindowBounds, WindowInstance, WindowKind, WindowKindName, WindowSpec, WindowSpecError};
