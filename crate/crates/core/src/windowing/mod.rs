//! Event-time window assignment, watermarks and pane lifecycle.

mod session;
mod store;

pub use session::{update_session, Session, SessionAction, SessionSet};
pub use store::{ClosedPane, PaneStore};

use crate::model::{Span, Timestamp, WindowBounds, WindowKind, WindowSpec};

fn align(t: Timestamp, origin: Timestamp, step: Span) -> Timestamp {
    let offset = (t.millis() - origin.millis()).div_euclid(step.millis()) * step.millis();
    Timestamp::from_millis(origin.millis() + offset)
}

/// The single tumbling pane containing `t`.
///
/// # Panics
/// If `spec` is not a tumbling spec.
pub fn assign_tumbling(t: Timestamp, spec: &WindowSpec) -> WindowBounds {
    let WindowKind::Tumbling { duration } = spec.kind else {
        panic!("assign_tumbling called with a {:?} spec", spec.kind_name());
    };
    let start = align(t, spec.origin, duration);
    WindowBounds::new(start, start + duration)
}

/// Every sliding pane containing `t`, latest start first.
///
/// # Panics
/// If `spec` is not a sliding spec.
pub fn assign_sliding(t: Timestamp, spec: &WindowSpec) -> Vec<WindowBounds> {
    let WindowKind::Sliding { duration, slide } = spec.kind else {
        panic!("assign_sliding called with a {:?} spec", spec.kind_name());
    };
    let mut out = Vec::with_capacity((duration.millis() / slide.millis()) as usize + 1);
    let mut start = align(t, spec.origin, slide);
    while start + duration > t {
        out.push(WindowBounds::new(start, start + duration));
        start = start - slide;
    }
    out
}

/// Panes of a fixed-size spec containing `t`; empty for session specs.
pub fn assign(t: Timestamp, spec: &WindowSpec) -> Vec<WindowBounds> {
    match spec.kind {
        WindowKind::Tumbling { .. } => vec![assign_tumbling(t, spec)],
        WindowKind::Sliding { .. } => assign_sliding(t, spec),
        WindowKind::Session { .. } => Vec::new(),
    }
}

/// Bounded out-of-orderness watermark.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Watermark {
    pub value: Timestamp,
    pub bounded_delay: Span,
}

impl Watermark {
    pub fn new(bounded_delay: Span) -> Self {
        Watermark {
            value: Timestamp::MIN,
            bounded_delay,
        }
    }

    /// Advances to `t - bounded_delay` if that is later; never moves back.
    pub fn observe(&mut self, t: Timestamp) -> Timestamp {
        self.value = self.value.max(t.saturating_sub(self.bounded_delay));
        self.value
    }

    /// End of input: every pane becomes closable.
    pub fn finish(&mut self) {
        self.value = Timestamp::MAX;
    }
}

/// What happens to an arriving element.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Route {
    Assign,
    /// Behind the watermark but within allowed lateness; goes to panes still open.
    LateAccept,
    Discard,
}

pub fn route(t: Timestamp, wm: &Watermark, spec: &WindowSpec) -> Route {
    if t >= wm.value {
        Route::Assign
    } else if t >= wm.value.saturating_sub(spec.allowed_lateness) {
        Route::LateAccept
    } else {
        Route::Discard
    }
}
