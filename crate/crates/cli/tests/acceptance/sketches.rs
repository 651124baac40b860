//! Cardinality estimate error at 10K distinct, and no false negatives from
//! the frequent-items sketch on Zipf streams.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Zipf};

use tidewatch::model::Value;
use tidewatch::sketches::{CardinalityEstimator, FrequentItemsSketch};

use crate::support::{Failures, Outcome};

const DISTINCT: usize = 10_000;
const TRIALS: u64 = 20;
const MAX_REL_ERROR: f64 = 0.05;

fn cardinality(failures: &mut Failures) -> String {
    let mut worst: f64 = 0.0;
    for trial in 0..TRIALS {
        let mut rng = ChaCha8Rng::seed_from_u64(trial);
        // Each distinct value arrives twice, interleaved; half ints, half text.
        let mut items: Vec<Value> = (0..DISTINCT)
            .map(|i| {
                let id = trial * 1_000_000 + i as u64;
                if i % 2 == 0 {
                    Value::Int(id as i64)
                } else {
                    Value::text(format!("user-{id}"))
                }
            })
            .flat_map(|v| [v.clone(), v])
            .collect();
        items.shuffle(&mut rng);
        let mut est = CardinalityEstimator::with_seed(14, trial).expect("p=14 is valid");
        items.iter().for_each(|v| est.insert(v));
        let err = (est.estimate() - DISTINCT as f64).abs() / DISTINCT as f64;
        worst = worst.max(err);
        failures.check(err <= MAX_REL_ERROR, || {
            format!("trial {trial}: estimate {:.0}, relative error {err:.4}", est.estimate())
        });
    }
    format!(
        "cardinality: {TRIALS} trials at p=14, worst relative error {:.2}%",
        worst * 100.0
    )
}

fn frequent_items(failures: &mut Failures) -> String {
    let mut streams = 0;
    let mut heavy_total = 0;
    for (n, universe, k) in [
        (10_000, 1_000.0, 10),
        (10_000, 1_000.0, 100),
        (100_000, 10_000.0, 50),
        (100_000, 10_000.0, 500),
        (200_000, 100_000.0, 1000),
    ] {
        for seed in 0..4u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed * 7919 + k as u64);
            let zipf = Zipf::new(universe, 1.1).expect("valid zipf");
            let mut sketch = FrequentItemsSketch::new(k).expect("capacity > 0");
            let mut exact: HashMap<i64, u64> = HashMap::new();
            for _ in 0..n {
                let item = zipf.sample(&mut rng) as i64;
                *exact.entry(item).or_insert(0) += 1;
                sketch.insert(&Value::Int(item));
            }
            let reported: Vec<i64> = sketch
                .query(1.0 / k as f64, n as u64)
                .expect("valid phi")
                .iter()
                .filter_map(|f| f.item.as_f64())
                .map(|x| x as i64)
                .collect();
            for (&item, &count) in &exact {
                if count * k as u64 > n as u64 {
                    heavy_total += 1;
                    failures.check(reported.contains(&item), || {
                        format!("n={n} k={k} seed={seed}: item {item} with count {count} not reported")
                    });
                }
            }
            streams += 1;
        }
    }
    format!("frequent items: {streams} Zipf(1.1) streams, {heavy_total} items above n/k, all reported")
}

pub fn run() -> Outcome {
    let mut failures = Failures::default();
    let a = cardinality(&mut failures);
    let b = frequent_items(&mut failures);
    failures.outcome(format!("{a}; {b}"))
}
