use std::collections::VecDeque;

use crate::measures::{mean_std, numeric};
use crate::model::{ContextValues, Span, Timestamp, Value};

/// Summary of one completed window.
#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub end: Timestamp,
    pub value: Value,
    pub count: usize,
}

/// Rolling history of one (check, key) pair.
///
/// A window starting at `s` sees exactly the summaries with
/// `end ∈ (s − H, s]`; each window weighs the same regardless of its size.
#[derive(Debug, Clone)]
pub struct ContextState {
    horizon: Span,
    buffer: VecDeque<Summary>,
    first_start: Option<Timestamp>,
}

/// Context as seen by one window.
#[derive(Debug, Clone, PartialEq)]
pub struct ContextView {
    pub values: ContextValues,
    /// History does not yet cover a full horizon, or holds no numeric value.
    pub warming: bool,
}

impl ContextState {
    pub fn new(horizon: Span) -> Self {
        ContextState {
            horizon,
            buffer: VecDeque::new(),
            first_start: None,
        }
    }

    pub fn horizon(&self) -> Span {
        self.horizon
    }

    pub fn len(&self) -> usize {
        self.buffer.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buffer.is_empty()
    }

    /// Summaries that would contribute to a window starting at `start`.
    pub fn window(&self, start: Timestamp) -> impl Iterator<Item = &Summary> {
        let lo = start.saturating_sub(self.horizon);
        self.buffer.iter().filter(move |s| s.end > lo && s.end <= start)
    }

    /// Statistics for the window starting at `start`. Call before [`push`](Self::push)
    /// so the window never sees its own measurement.
    pub fn view(&mut self, start: Timestamp) -> ContextView {
        let first = *self.first_start.get_or_insert(start);
        let lo = start.saturating_sub(self.horizon);
        while self.buffer.front().is_some_and(|s| s.end <= lo) {
            self.buffer.pop_front();
        }
        let values: Vec<f64> = self.window(start).filter_map(|s| numeric(&s.value)).collect();
        let prev_value = self
            .window(start)
            .max_by_key(|s| s.end)
            .map_or(Value::Null, |s| s.value.clone());
        let (mu, sigma) = match mean_std(&values) {
            Some((mean, std)) => (Value::float(mean), Value::float(std)),
            None => (Value::Null, Value::Null),
        };
        let warming = start.millis_since(first) < self.horizon.millis() || values.is_empty();
        ContextView {
            values: ContextValues {
                mu,
                sigma,
                count: values.len() as i64,
                prev_value,
            },
            warming,
        }
    }

    /// Folds a completed window into the history.
    pub fn push(&mut self, summary: Summary) {
        let at = self.buffer.partition_point(|s| s.end <= summary.end);
        self.buffer.insert(at, summary);
    }
}
