use xxhash_rust::xxh64::xxh64;

use super::SketchError;
use crate::model::Value;

/// Seed used when the engine config does not set one.
pub const DEFAULT_HASH_SEED: u64 = 0;

/// Register-based distinct-count estimator (HyperLogLog).
///
/// Values are hashed with xxh64 over their canonical byte encoding, so the
/// estimate is reproducible across runs and platforms for a given seed.
#[derive(Debug, Clone)]
pub struct CardinalityEstimator {
    p: u8,
    seed: u64,
    registers: Vec<u8>,
    scratch: Vec<u8>,
}

impl CardinalityEstimator {
    pub const DEFAULT_PRECISION: u8 = 14;

    pub fn new(p: u8) -> Result<Self, SketchError> {
        Self::with_seed(p, DEFAULT_HASH_SEED)
    }

    pub fn with_seed(p: u8, seed: u64) -> Result<Self, SketchError> {
        if !(4..=16).contains(&p) {
            return Err(SketchError::Precision(p));
        }
        Ok(CardinalityEstimator {
            p,
            seed,
            registers: vec![0; 1 << p],
            scratch: Vec::with_capacity(32),
        })
    }

    pub fn precision(&self) -> u8 {
        self.p
    }

    /// Null is ignored.
    pub fn insert(&mut self, v: &Value) {
        if v.is_null() {
            return;
        }
        self.scratch.clear();
        v.canonical_bytes(&mut self.scratch);
        let h = xxh64(&self.scratch, self.seed);
        self.insert_hash(h);
    }

    pub fn insert_hash(&mut self, h: u64) {
        let idx = (h >> (64 - self.p)) as usize;
        let rest = h << self.p;
        let max_rank = 64 - u32::from(self.p) + 1;
        let rank = (rest.leading_zeros() + 1).min(max_rank) as u8;
        if self.registers[idx] < rank {
            self.registers[idx] = rank;
        }
    }

    pub fn estimate(&self) -> f64 {
        let m = self.registers.len() as f64;
        let alpha = match self.registers.len() {
            16 => 0.673,
            32 => 0.697,
            64 => 0.709,
            _ => 0.7213 / (1.0 + 1.079 / m),
        };
        let mut sum = 0.0;
        let mut zeros = 0usize;
        for &r in &self.registers {
            sum += f64::powi(2.0, -i32::from(r));
            if r == 0 {
                zeros += 1;
            }
        }
        let raw = alpha * m * m / sum;
        if raw <= 2.5 * m && zeros > 0 {
            m * (m / zeros as f64).ln()
        } else {
            raw
        }
    }

    pub fn registers(&self) -> &[u8] {
        &self.registers
    }
}
