use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{Span, StreamElement, Timestamp, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowKindName {
    Tumbling,
    Sliding,
    Session,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WindowKind {
    Tumbling { duration: Span },
    Sliding { duration: Span, slide: Span },
    Session { gap: Span },
}

/// Declarative window policy.
///
/// Serialized flat: `{"kind": "sliding", "duration": "10m", "slide": "1m"}`;
/// only the fields of the chosen kind may appear.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "WindowSpecRepr", into = "WindowSpecRepr")]
pub struct WindowSpec {
    pub kind: WindowKind,
    pub allowed_lateness: Span,
    pub origin: Timestamp,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum WindowSpecError {
    #[error("{0} must be positive")]
    NonPositive(&'static str),
    #[error("slide ({slide}) must not exceed duration ({duration})")]
    SlideExceedsDuration { slide: Span, duration: Span },
    #[error("`{field}` is not valid for {kind:?} windows")]
    UnexpectedField { field: &'static str, kind: WindowKindName },
    #[error("`{field}` is required for {kind:?} windows")]
    MissingField { field: &'static str, kind: WindowKindName },
}

impl WindowSpec {
    pub fn new(kind: WindowKind) -> Result<Self, WindowSpecError> {
        let spec = WindowSpec {
            kind,
            allowed_lateness: Span::ZERO,
            origin: Timestamp::EPOCH,
        };
        spec.check()?;
        Ok(spec)
    }

    pub fn tumbling(duration: Span) -> Result<Self, WindowSpecError> {
        WindowSpec::new(WindowKind::Tumbling { duration })
    }

    pub fn sliding(duration: Span, slide: Span) -> Result<Self, WindowSpecError> {
        WindowSpec::new(WindowKind::Sliding { duration, slide })
    }

    pub fn session(gap: Span) -> Result<Self, WindowSpecError> {
        WindowSpec::new(WindowKind::Session { gap })
    }

    pub fn with_lateness(mut self, lateness: Span) -> Self {
        self.allowed_lateness = lateness;
        self
    }

    pub fn with_origin(mut self, origin: Timestamp) -> Self {
        self.origin = origin;
        self
    }

    pub fn check(&self) -> Result<(), WindowSpecError> {
        match self.kind {
            WindowKind::Tumbling { duration } => {
                if duration.is_zero() {
                    return Err(WindowSpecError::NonPositive("duration"));
                }
            }
            WindowKind::Sliding { duration, slide } => {
                if duration.is_zero() {
                    return Err(WindowSpecError::NonPositive("duration"));
                }
                if slide.is_zero() {
                    return Err(WindowSpecError::NonPositive("slide"));
                }
                if slide > duration {
                    return Err(WindowSpecError::SlideExceedsDuration { slide, duration });
                }
            }
            WindowKind::Session { gap } => {
                if gap.is_zero() {
                    return Err(WindowSpecError::NonPositive("gap"));
                }
            }
        }
        Ok(())
    }

    pub fn kind_name(&self) -> WindowKindName {
        match self.kind {
            WindowKind::Tumbling { .. } => WindowKindName::Tumbling,
            WindowKind::Sliding { .. } => WindowKindName::Sliding,
            WindowKind::Session { .. } => WindowKindName::Session,
        }
    }

    /// Pane length for fixed-size kinds.
    pub fn duration(&self) -> Option<Span> {
        match self.kind {
            WindowKind::Tumbling { duration } | WindowKind::Sliding { duration, .. } => Some(duration),
            WindowKind::Session { .. } => None,
        }
    }

    /// Distance between consecutive pane starts for fixed-size kinds.
    pub fn step(&self) -> Option<Span> {
        match self.kind {
            WindowKind::Tumbling { duration } => Some(duration),
            WindowKind::Sliding { slide, .. } => Some(slide),
            WindowKind::Session { .. } => None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WindowSpecRepr {
    kind: WindowKindName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    duration: Option<Span>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    slide: Option<Span>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    gap: Option<Span>,
    #[serde(default)]
    allowed_lateness: Span,
    #[serde(default)]
    origin: Timestamp,
}

impl TryFrom<WindowSpecRepr> for WindowSpec {
    type Error = WindowSpecError;

    fn try_from(r: WindowSpecRepr) -> Result<Self, Self::Error> {
        let kind_name = r.kind;
        let unexpected = |field| WindowSpecError::UnexpectedField { field, kind: kind_name };
        let missing = |field| WindowSpecError::MissingField { field, kind: kind_name };
        let kind = match kind_name {
            WindowKindName::Tumbling => {
                if r.slide.is_some() {
                    return Err(unexpected("slide"));
                }
                if r.gap.is_some() {
                    return Err(unexpected("gap"));
                }
                WindowKind::Tumbling {
                    duration: r.duration.ok_or_else(|| missing("duration"))?,
                }
            }
            WindowKindName::Sliding => {
                if r.gap.is_some() {
                    return Err(unexpected("gap"));
                }
                WindowKind::Sliding {
                    duration: r.duration.ok_or_else(|| missing("duration"))?,
                    slide: r.slide.ok_or_else(|| missing("slide"))?,
                }
            }
            WindowKindName::Session => {
                if r.duration.is_some() {
                    return Err(unexpected("duration"));
                }
                if r.slide.is_some() {
                    return Err(unexpected("slide"));
                }
                WindowKind::Session {
                    gap: r.gap.ok_or_else(|| missing("gap"))?,
                }
            }
        };
        let spec = WindowSpec {
            kind,
            allowed_lateness: r.allowed_lateness,
            origin: r.origin,
        };
        spec.check()?;
        Ok(spec)
    }
}

impl From<WindowSpec> for WindowSpecRepr {
    fn from(s: WindowSpec) -> Self {
        let (duration, slide, gap) = match s.kind {
            WindowKind::Tumbling { duration } => (Some(duration), None, None),
            WindowKind::Sliding { duration, slide } => (Some(duration), Some(slide), None),
            WindowKind::Session { gap } => (None, None, Some(gap)),
        };
        WindowSpecRepr {
            kind: s.kind_name(),
            duration,
            slide,
            gap,
            allowed_lateness: s.allowed_lateness,
            origin: s.origin,
        }
    }
}

/// Half-open pane interval `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct WindowBounds {
    pub start: Timestamp,
    pub end: Timestamp,
}

impl WindowBounds {
    pub fn new(start: Timestamp, end: Timestamp) -> Self {
        debug_assert!(start < end);
        WindowBounds { start, end }
    }

    pub fn contains(&self, t: Timestamp) -> bool {
        self.start <= t && t < self.end
    }
}

impl fmt::Display for WindowBounds {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {})", self.start, self.end)
    }
}

/// A closed pane with its elements, ordered by `(event_time, arrival_seq)`.
#[derive(Debug, Clone)]
pub struct WindowInstance {
    pub bounds: WindowBounds,
    pub key: Option<Value>,
    pub elements: Vec<Arc<StreamElement>>,
}

impl WindowInstance {
    pub fn new(bounds: WindowBounds, key: Option<Value>, mut elements: Vec<Arc<StreamElement>>) -> Self {
        elements.sort_by_key(|e| e.order_key());
        WindowInstance { bounds, key, elements }
    }

    /// Builds an unkeyed instance from owned elements; handy in tests.
    pub fn from_elements(bounds: WindowBounds, elements: impl IntoIterator<Item = StreamElement>) -> Self {
        WindowInstance::new(bounds, None, elements.into_iter().map(Arc::new).collect())
    }

    pub fn start(&self) -> Timestamp {
        self.bounds.start
    }

    pub fn end(&self) -> Timestamp {
        self.bounds.end
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn values<'a>(&'a self, column: &'a str) -> impl Iterator<Item = &'a Value> + 'a {
        self.elements.iter().map(move |e| e.value(column))
    }
}
