use std::sync::Arc;

use super::{Timestamp, Value};

/// One timestamped record of the stream.
///
/// `attrs` keeps the source column order; schema-order checks depend on it.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamElement {
    pub event_time: Timestamp,
    /// Ingestion counter (line number for file sources).
    pub arrival_seq: u64,
    pub attrs: Vec<(Arc<str>, Value)>,
}

impl StreamElement {
    pub fn new(event_time: Timestamp, arrival_seq: u64) -> Self {
        StreamElement {
            event_time,
            arrival_seq,
            attrs: Vec::new(),
        }
    }

    pub fn with(mut self, name: &str, value: impl Into<Value>) -> Self {
        self.set(name, value.into());
        self
    }

    pub fn set(&mut self, name: &str, value: Value) {
        match self.attrs.iter_mut().find(|(n, _)| &**n == name) {
            Some(slot) => slot.1 = value,
            None => self.attrs.push((Arc::from(name), value)),
        }
    }

    pub fn get(&self, name: &str) -> Option<&Value> {
        self.attrs.iter().find(|(n, _)| &**n == name).map(|(_, v)| v)
    }

    /// Missing attributes read as `Null`.
    pub fn value(&self, name: &str) -> &Value {
        static NULL: Value = Value::Null;
        self.get(name).unwrap_or(&NULL)
    }

    pub fn column_names(&self) -> impl Iterator<Item = &str> {
        self.attrs.iter().map(|(n, _)| &**n)
    }

    /// Total order inside a window: event time, then arrival.
    pub fn order_key(&self) -> (Timestamp, u64) {
        (self.event_time, self.arrival_seq)
    }
}
