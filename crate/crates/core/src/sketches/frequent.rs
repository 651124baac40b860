use std::collections::{BTreeSet, HashMap};

use super::SketchError;
use crate::model::Value;

#[derive(Debug, Clone)]
struct Slot {
    item: Value,
    count: u64,
    error: u64,
}

/// Frequent-items sketch using the replace-minimum (Space-Saving) rule.
///
/// Holds at most `capacity` counters. A tracked item's `count` over-estimates
/// its true frequency by at most `error`.
#[derive(Debug, Clone)]
pub struct FrequentItemsSketch {
    capacity: usize,
    slots: Vec<Slot>,
    index: HashMap<Value, usize>,
    by_count: BTreeSet<(u64, usize)>,
    total: u64,
}

/// One reported item with bounds on its true frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequentItem {
    pub item: Value,
    pub lower: u64,
    pub upper: u64,
}

impl FrequentItemsSketch {
    pub const DEFAULT_CAPACITY: usize = 256;

    pub fn new(capacity: usize) -> Result<Self, SketchError> {
        if capacity == 0 {
            return Err(SketchError::Capacity);
        }
        Ok(FrequentItemsSketch {
            capacity,
            slots: Vec::with_capacity(capacity.min(4096)),
            index: HashMap::new(),
            by_count: BTreeSet::new(),
            total: 0,
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Number of insertions so far.
    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn insert(&mut self, v: &Value) {
        self.total += 1;
        if let Some(&slot) = self.index.get(v) {
            let s = &mut self.slots[slot];
            self.by_count.remove(&(s.count, slot));
            s.count += 1;
            self.by_count.insert((s.count, slot));
            return;
        }
        if self.slots.len() < self.capacity {
            let slot = self.slots.len();
            self.slots.push(Slot {
                item: v.clone(),
                count: 1,
                error: 0,
            });
            self.index.insert(v.clone(), slot);
            self.by_count.insert((1, slot));
            return;
        }
        // Evict the smallest counter; ties go to the lowest slot.
        let (min, slot) = self.by_count.pop_first().expect("sketch is full");
        let s = &mut self.slots[slot];
        self.index.remove(&s.item);
        s.item = v.clone();
        s.count = min + 1;
        s.error = min;
        self.index.insert(v.clone(), slot);
        self.by_count.insert((min + 1, slot));
    }

    /// Count bounds for `v`; untracked items report `(0, min counter)`.
    pub fn bounds(&self, v: &Value) -> (u64, u64) {
        match self.index.get(v) {
            Some(&slot) => {
                let s = &self.slots[slot];
                (s.count - s.error, s.count)
            }
            None if self.slots.len() < self.capacity => (0, 0),
            None => (0, self.by_count.first().map_or(0, |&(c, _)| c)),
        }
    }

    /// Tracked items whose upper bound reaches `phi * n`, most frequent first.
    pub fn query(&self, phi: f64, n: u64) -> Result<Vec<FrequentItem>, SketchError> {
        if !(phi > 0.0 && phi <= 1.0) {
            return Err(SketchError::Phi(phi));
        }
        let cut = phi * n as f64;
        let mut out: Vec<FrequentItem> = self
            .slots
            .iter()
            .filter(|s| s.count as f64 >= cut)
            .map(|s| FrequentItem {
                item: s.item.clone(),
                lower: s.count - s.error,
                upper: s.count,
            })
            .collect();
        out.sort_by(|a, b| b.upper.cmp(&a.upper).then_with(|| a.item.cmp(&b.item)));
        Ok(out)
    }

    /// The `n` tracked items with the highest counts.
    pub fn top(&self, n: usize) -> Vec<FrequentItem> {
        let mut all = self.query(f64::MIN_POSITIVE, 0).unwrap_or_default();
        all.truncate(n);
        all
    }
}
