use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use crate::model::{Span, StreamElement, Timestamp, Value, WindowBounds, WindowInstance, WindowKind, WindowSpec};

use super::session::SessionSet;

type Key = Option<Value>;

/// A closed pane plus the arrival sequences of the elements for which it is
/// the first pane to close. Per-element results are reported only there.
#[derive(Debug, Clone)]
pub struct ClosedPane {
    pub window: WindowInstance,
    pub owned: Vec<u64>,
}

#[derive(Debug, Default)]
struct Pane {
    elements: Vec<Arc<StreamElement>>,
    owned: Vec<u64>,
}

/// Open panes of one partitioning (unkeyed, or keyed by one column).
///
/// Panes close once `end + allowed_lateness <= watermark` and come out in
/// ascending `(end, key)` order. With `materialize_empty`, fixed-size panes
/// between the first and last event are emitted even if nothing landed in them.
#[derive(Debug)]
pub struct PaneStore {
    spec: WindowSpec,
    materialize_empty: bool,
    fixed: BTreeMap<(Timestamp, Key), Pane>,
    sessions: BTreeMap<Key, SessionSet>,
    /// `(end, key, start)` of every open session.
    session_index: BTreeSet<(Timestamp, Key, Timestamp)>,
    /// Next pane start to emit when materializing empty panes.
    cursor: Option<Timestamp>,
    max_event_time: Option<Timestamp>,
    closed_at: Timestamp,
}

impl PaneStore {
    pub fn new(spec: WindowSpec, materialize_empty: bool) -> Self {
        PaneStore {
            spec,
            materialize_empty,
            fixed: BTreeMap::new(),
            sessions: BTreeMap::new(),
            session_index: BTreeSet::new(),
            cursor: None,
            max_event_time: None,
            closed_at: Timestamp::MIN,
        }
    }

    pub fn spec(&self) -> &WindowSpec {
        &self.spec
    }

    fn closed(&self, end: Timestamp) -> bool {
        end.saturating_add(self.spec.allowed_lateness) <= self.closed_at
    }

    /// Places an element into every open pane of `key` that covers it.
    /// Returns the number of panes it joined.
    pub fn insert(&mut self, key: Key, element: Arc<StreamElement>) -> usize {
        let t = element.event_time;
        self.max_event_time = Some(self.max_event_time.map_or(t, |m| m.max(t)));
        match self.spec.kind {
            WindowKind::Session { gap } => self.insert_session(key, element, gap),
            _ => {
                let open: Vec<WindowBounds> = super::assign(t, &self.spec)
                    .into_iter()
                    .filter(|b| !self.closed(b.end))
                    .collect();
                let seq = element.arrival_seq;
                for (i, b) in open.iter().enumerate() {
                    let pane = self.fixed.entry((b.start, key.clone())).or_default();
                    pane.elements.push(Arc::clone(&element));
                    // assign() lists the latest start first; the earliest start closes first
                    if i + 1 == open.len() {
                        pane.owned.push(seq);
                    }
                }
                open.len()
            }
        }
    }

    fn insert_session(&mut self, key: Key, element: Arc<StreamElement>, gap: Span) -> usize {
        let t = element.event_time;
        let set = self.sessions.entry(key.clone()).or_insert_with(|| SessionSet::new(gap));
        let (_, replaced, bounds) = set.insert(t, Some(element));
        for b in replaced {
            self.session_index.remove(&(b.end, key.clone(), b.start));
        }
        self.session_index.insert((bounds.end, key, bounds.start));
        1
    }

    /// Number of panes currently held open.
    pub fn open_panes(&self) -> usize {
        self.fixed.len() + self.session_index.len()
    }

    /// Closes every pane whose end plus allowed lateness is at or before `wm`.
    pub fn close_ready(&mut self, wm: Timestamp) -> Vec<ClosedPane> {
        self.closed_at = self.closed_at.max(wm);
        match self.spec.kind {
            WindowKind::Session { .. } => self.close_sessions(),
            WindowKind::Tumbling { duration } => self.close_fixed(duration, duration),
            WindowKind::Sliding { duration, slide } => self.close_fixed(duration, slide),
        }
    }

    fn close_fixed(&mut self, duration: Span, step: Span) -> Vec<ClosedPane> {
        let mut out = Vec::new();
        if self.materialize_empty {
            let Some(max_t) = self.max_event_time else {
                return out;
            };
            loop {
                let start = match self.cursor {
                    Some(c) => c,
                    None => match self.fixed.keys().next() {
                        Some((s, _)) => *s,
                        None => break,
                    },
                };
                let end = start.saturating_add(duration);
                if start > max_t || !self.closed(end) {
                    break;
                }
                let pane = self.fixed.remove(&(start, None)).unwrap_or_default();
                out.push(pane.close(WindowBounds::new(start, end), None));
                self.cursor = Some(start.saturating_add(step));
            }
        }
        while let Some(((start, _), _)) = self.fixed.first_key_value() {
            let end = start.saturating_add(duration);
            if !self.closed(end) {
                break;
            }
            let ((start, key), pane) = self.fixed.pop_first().expect("checked above");
            out.push(pane.close(WindowBounds::new(start, end), key));
        }
        out
    }

    fn close_sessions(&mut self) -> Vec<ClosedPane> {
        let mut out = Vec::new();
        while let Some(first) = self.session_index.first() {
            if !self.closed(first.0) {
                break;
            }
            let (end, key, start) = self.session_index.pop_first().expect("checked above");
            let set = self.sessions.get_mut(&key).expect("indexed key");
            let session = set.take(start).expect("indexed session");
            if set.is_empty() {
                self.sessions.remove(&key);
            }
            let mut owned: Vec<u64> = session.elements.iter().map(|e| e.arrival_seq).collect();
            owned.sort_unstable();
            out.push(ClosedPane {
                window: WindowInstance::new(WindowBounds::new(start, end), key, session.elements),
                owned,
            });
        }
        out
    }
}

impl Pane {
    fn close(mut self, bounds: WindowBounds, key: Key) -> ClosedPane {
        self.owned.sort_unstable();
        ClosedPane {
            window: WindowInstance::new(bounds, key, self.elements),
            owned: self.owned,
        }
    }
}
