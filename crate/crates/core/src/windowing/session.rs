use std::collections::BTreeMap;
use std::sync::Arc;

use crate::model::{Span, StreamElement, Timestamp, WindowBounds};

/// One open activity period.
#[derive(Debug, Clone)]
pub struct Session {
    pub start: Timestamp,
    pub last: Timestamp,
    pub elements: Vec<Arc<StreamElement>>,
}

impl Session {
    /// `[first event, last event + gap)`.
    pub fn bounds(&self, gap: Span) -> WindowBounds {
        WindowBounds::new(self.start, self.last.saturating_add(gap))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SessionAction {
    Open,
    Extend,
    /// The element bridged this many existing sessions into one.
    Merge(usize),
}

/// Disjoint sessions of one key, ordered by start.
#[derive(Debug, Clone)]
pub struct SessionSet {
    gap: Span,
    sessions: BTreeMap<Timestamp, Session>,
}

impl SessionSet {
    pub fn new(gap: Span) -> Self {
        SessionSet {
            gap,
            sessions: BTreeMap::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.sessions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sessions.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Session> {
        self.sessions.values()
    }

    pub fn bounds(&self) -> Vec<WindowBounds> {
        self.sessions.values().map(|s| s.bounds(self.gap)).collect()
    }

    /// Adds an element at time `t`. Returns the action taken and the bounds
    /// of every session it replaced, so callers can keep indexes in sync.
    pub fn insert(
        &mut self,
        t: Timestamp,
        element: Option<Arc<StreamElement>>,
    ) -> (SessionAction, Vec<WindowBounds>, WindowBounds) {
        let reach = t.saturating_add(self.gap);
        let overlapping: Vec<Timestamp> = self
            .sessions
            .range(..reach)
            .rev()
            .take_while(|(_, s)| s.last.saturating_add(self.gap) > t)
            .map(|(&start, _)| start)
            .collect();
        let mut replaced = Vec::with_capacity(overlapping.len());
        let mut merged = Session {
            start: t,
            last: t,
            elements: Vec::new(),
        };
        for start in &overlapping {
            let s = self.sessions.remove(start).expect("listed above");
            replaced.push(s.bounds(self.gap));
            merged.start = merged.start.min(s.start);
            merged.last = merged.last.max(s.last);
            merged.elements.extend(s.elements);
        }
        merged.elements.extend(element);
        let action = match overlapping.len() {
            0 => SessionAction::Open,
            1 => SessionAction::Extend,
            n => SessionAction::Merge(n),
        };
        let bounds = merged.bounds(self.gap);
        self.sessions.insert(merged.start, merged);
        (action, replaced, bounds)
    }

    /// Removes the session starting at `start`.
    pub fn take(&mut self, start: Timestamp) -> Option<Session> {
        self.sessions.remove(&start)
    }
}

/// Session action for one element, as a free function over a key's set.
pub fn update_session(set: &mut SessionSet, t: Timestamp, element: Arc<StreamElement>) -> SessionAction {
    set.insert(t, Some(element)).0
}
