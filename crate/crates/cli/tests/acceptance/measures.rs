//! Every exact window measure against a naive recomputation over randomized
//! panes; approximate measures against their error guarantees.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashMap};

use rand::seq::SliceRandom;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use tidewatch::measures::{EvalEnv, Measure, MeasureSpec};
use tidewatch::model::{NullPolicy, StreamElement, Timestamp, Value, WindowBounds, WindowInstance};

use crate::support::{agree, Failures, Outcome};

const WINDOWS: usize = 1000;
const MAX_SIZE: usize = 5000;
const PANE_MS: i64 = 60_000;
const TEXTS: [&str; 14] = [
    "", " ", "a", "ab", "abc", "NA", "-", "99", "Z01", "Z05", "x1", "日本", "héllo", "quality",
];
const REGEXES: [&str; 6] = ["[a-z]+", "Z0[1-5]", "[0-9]+", "a|ab", ".*é.*", ""];

struct Pane {
    window: WindowInstance,
    secondary: Vec<StreamElement>,
}

fn maybe_null(rng: &mut ChaCha8Rng, rate: f64, v: Value) -> Value {
    if rng.random_bool(rate) {
        Value::Null
    } else {
        v
    }
}

fn text(rng: &mut ChaCha8Rng) -> Value {
    if rng.random_bool(0.2) {
        let len = rng.random_range(0..10);
        let s: String = (0..len).map(|_| char::from(b'a' + rng.random_range(0..26u8))).collect();
        Value::text(s)
    } else {
        Value::text(TEXTS[rng.random_range(0..TEXTS.len())])
    }
}

fn mixed(rng: &mut ChaCha8Rng) -> Value {
    match rng.random_range(0..11) {
        0 => Value::Int(99),
        1 => Value::Int(rng.random_range(-5..500)),
        2 => Value::text("NA"),
        3 => Value::text("-"),
        4 => Value::text(""),
        5 => Value::text("  "),
        6 => Value::text(rng.random_range(0..100).to_string()),
        7 => Value::text(" 3.5"),
        8 => Value::Float(99.0),
        9 => Value::Bool(rng.random_bool(0.5)),
        _ => Value::text(if rng.random_bool(0.5) { "TRUE" } else { "abc" }),
    }
}

fn numeric(rng: &mut ChaCha8Rng) -> Value {
    match rng.random_range(0..10) {
        0..=4 => Value::Int(rng.random_range(-50..=50)),
        5 => Value::Float(rng.random_range(-1.0e4..1.0e4)),
        _ => Value::Float(rng.random_range(-100.0..100.0)),
    }
}

fn random_pane(rng: &mut ChaCha8Rng, size: usize) -> Pane {
    let null_rate = rng.random_range(0.0..0.3);
    let start = Timestamp::from_millis(rng.random_range(0..1_000_000_000));
    let mut seqs: Vec<u64> = (1..=size as u64).collect();
    seqs.shuffle(rng);
    let drop_y = (size > 0 && rng.random_bool(0.3)).then(|| rng.random_range(0..size));
    let key_span = rng.random_range(1..40);
    let mut order = 0.0f64;
    let elements: Vec<StreamElement> = (0..size)
        .map(|i| {
            let t = start.millis() + rng.random_range(0..PANE_MS);
            let x = numeric(rng);
            let y = match x.as_f64() {
                Some(v) if rng.random_bool(0.8) => Value::Float(0.3 * v + rng.random_range(-20.0..20.0)),
                _ => numeric(rng),
            };
            order += rng.random_range(-2.0..5.0f64).round();
            let o = if rng.random_bool(0.5) {
                Value::Int(order as i64)
            } else {
                Value::Float(order + 0.5)
            };
            let a = rng.random_range(0..2000i64);
            let b = a + rng.random_range(-5..60);
            let u: f64 = rng.random();
            let k = Value::Int((u * u * key_span as f64) as i64);
            let mut e = StreamElement::new(Timestamp::from_millis(t), seqs[i])
                .with("x", maybe_null(rng, null_rate, x))
                .with("k", maybe_null(rng, null_rate, k))
                .with("s", {
                    let v = text(rng);
                    maybe_null(rng, null_rate, v)
                })
                .with("p", {
                    let v = mixed(rng);
                    maybe_null(rng, null_rate, v)
                })
                .with("o", maybe_null(rng, null_rate, o))
                .with("a", maybe_null(rng, null_rate, Value::Int(a)))
                .with("b", {
                    let v = if rng.random_bool(0.3) {
                        Value::Float(b as f64 + 0.25)
                    } else {
                        Value::Int(b)
                    };
                    maybe_null(rng, null_rate, v)
                });
            if drop_y != Some(i) {
                e = e.with("y", maybe_null(rng, null_rate, y));
            }
            e
        })
        .collect();
    let secondary = (0..rng.random_range(0..60))
        .map(|j| {
            StreamElement::new(start + tidewatch::model::Span::from_millis(j), j as u64)
                .with("k", Value::Int(rng.random_range(0..50)))
        })
        .collect();
    let bounds = WindowBounds::new(start, Timestamp::from_millis(start.millis() + PANE_MS));
    Pane {
        window: WindowInstance::from_elements(bounds, elements),
        secondary,
    }
}

// ---- oracles ----

fn num(v: &Value) -> Option<f64> {
    match v {
        Value::Int(i) => Some(*i as f64),
        Value::Float(x) => Some(*x),
        _ => None,
    }
}

fn col<'a>(rows: &'a [&'a StreamElement], c: &'a str) -> impl Iterator<Item = &'a Value> + 'a {
    rows.iter().map(move |e| e.get(c).unwrap_or(&Value::Null))
}

fn nums(rows: &[&StreamElement], c: &str) -> Vec<f64> {
    col(rows, c).filter_map(num).collect()
}

fn ratio(hits: usize, of: usize) -> Value {
    if of == 0 {
        Value::Null
    } else {
        Value::Float(hits as f64 / of as f64)
    }
}

fn fraction(verdicts: impl Iterator<Item = Option<bool>>, policy: NullPolicy) -> Value {
    let v: Vec<Option<bool>> = verdicts.collect();
    match policy {
        NullPolicy::Strict => ratio(v.iter().filter(|x| **x == Some(true)).count(), v.len()),
        NullPolicy::Lenient => ratio(
            v.iter().filter(|x| **x == Some(true)).count(),
            v.iter().filter(|x| x.is_some()).count(),
        ),
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn pop_std(xs: &[f64]) -> f64 {
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / xs.len() as f64).sqrt()
}

fn float_or_null(x: Option<f64>) -> Value {
    x.map_or(Value::Null, Value::Float)
}

fn extreme(rows: &[&StreamElement], c: &str, want: Ordering) -> Value {
    let mut best: Option<(f64, &Value)> = None;
    for v in col(rows, c) {
        if let Some(x) = num(v) {
            if best.is_none_or(|(b, _)| x.partial_cmp(&b) == Some(want)) {
                best = Some((x, v));
            }
        }
    }
    best.map_or(Value::Null, |(_, v)| v.clone())
}

fn type7(xs: &[f64], q: f64) -> Value {
    if xs.is_empty() {
        return Value::Null;
    }
    let mut s = xs.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let h = (s.len() - 1) as f64 * q;
    let (lo, hi) = (h.floor() as usize, (h.ceil() as usize).min(s.len() - 1));
    Value::Float(s[lo] + (h - h.floor()) * (s[hi] - s[lo]))
}

fn display(v: &Value) -> String {
    match v {
        Value::Int(i) => i.to_string(),
        Value::Float(x) => format!("{x}"),
        Value::Text(s) => s.to_string(),
        Value::Bool(b) => b.to_string(),
        Value::Timestamp(t) => t.to_iso(),
        Value::Null => "null".into(),
    }
}

/// Hashable identity of a non-Null value; Int and Float never collide.
fn identity(v: &Value) -> String {
    match v {
        Value::Int(i) => format!("i:{i}"),
        Value::Float(x) => format!("f:{}", x.to_bits()),
        Value::Text(s) => format!("t:{s}"),
        Value::Bool(b) => format!("b:{b}"),
        Value::Timestamp(t) => format!("ts:{}", t.millis()),
        Value::Null => unreachable!(),
    }
}

fn counts(rows: &[&StreamElement], c: &str) -> HashMap<String, (usize, Value)> {
    let mut h: HashMap<String, (usize, Value)> = HashMap::new();
    for v in col(rows, c).filter(|v| !v.is_null()) {
        h.entry(identity(v)).or_insert((0, v.clone())).0 += 1;
    }
    h
}

fn ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].partial_cmp(&xs[b]).unwrap());
    let mut out = vec![0.0; xs.len()];
    let mut pos = 0;
    while pos < idx.len() {
        let tie = idx[pos..].iter().take_while(|&&j| xs[j] == xs[idx[pos]]).count();
        // Positions pos+1 ..= pos+tie share their average.
        let avg = (2 * pos + tie + 1) as f64 / 2.0;
        for &j in &idx[pos..pos + tie] {
            out[j] = avg;
        }
        pos += tie;
    }
    out
}

fn pearson(xs: &[f64], ys: &[f64]) -> Value {
    let constant = |v: &[f64]| v.iter().all(|x| *x == v[0]);
    if xs.len() < 2 || constant(xs) || constant(ys) {
        return Value::Null;
    }
    let (mx, my) = (mean(xs), mean(ys));
    let cov: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let vx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let vy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    Value::Float(cov / (vx * vy).sqrt())
}

fn orderable(v: &Value) -> Option<f64> {
    num(v)
}

fn interval_oracle(rows: &[&StreamElement], policy: &str) -> i64 {
    let mut bad = 0;
    let mut ok: Vec<(f64, f64)> = Vec::new();
    for e in rows {
        match (orderable(e.value("a")), orderable(e.value("b"))) {
            (Some(s), Some(t)) if s <= t => ok.push((s, t)),
            _ => bad += 1,
        }
    }
    ok.sort_by(|l, r| l.partial_cmp(r).unwrap());
    for i in 1..ok.len() {
        let reach = ok[..i].iter().map(|r| r.1).fold(f64::NEG_INFINITY, f64::max);
        let s = ok[i].0;
        let violates = s < reach || (policy == "disallowed" && s > reach) || (policy == "required" && s == reach);
        bad += i64::from(violates);
    }
    bad
}

fn parses(v: &Value, ty: &str) -> bool {
    match (ty, v) {
        ("int", Value::Int(_)) | ("float", Value::Int(_) | Value::Float(_)) | ("bool", Value::Bool(_)) => true,
        ("int", Value::Text(s)) => s.trim().parse::<i64>().is_ok(),
        ("float", Value::Text(s)) => s.trim().parse::<f64>().is_ok_and(f64::is_finite),
        ("bool", Value::Text(s)) => matches!(s.trim().to_ascii_lowercase().as_str(), "true" | "false"),
        _ => false,
    }
}

// ---- driver ----

struct Case {
    spec: serde_json::Value,
    policy: NullPolicy,
    expected: Expected,
}

enum Expected {
    Exact(Value),
    /// An integer count known only up to floating-point ties at a threshold.
    Between(i64, i64),
}

fn cases(rng: &mut ChaCha8Rng, pane: &Pane) -> Vec<Case> {
    let mut rows: Vec<&StreamElement> = pane.window.elements.iter().map(|e| &**e).collect();
    rows.sort_by_key(|e| (e.event_time, e.arrival_seq));
    let rows = &rows[..];
    let w = &pane.window;
    let n = rows.len();
    let mut out = Vec::new();
    let mut exact = |spec: serde_json::Value, v: Value| {
        out.push(Case {
            spec,
            policy: NullPolicy::Strict,
            expected: Expected::Exact(v),
        })
    };

    let xs = nums(rows, "x");
    exact(
        json!({"type": "basic_stats", "column": "x", "stat": "count"}),
        Value::Int(xs.len() as i64),
    );
    exact(
        json!({"type": "basic_stats", "column": "x", "stat": "min"}),
        extreme(rows, "x", Ordering::Less),
    );
    exact(
        json!({"type": "basic_stats", "column": "x", "stat": "max"}),
        extreme(rows, "x", Ordering::Greater),
    );
    let some = !xs.is_empty();
    exact(
        json!({"type": "basic_stats", "column": "x", "stat": "mean"}),
        float_or_null(some.then(|| mean(&xs))),
    );
    exact(
        json!({"type": "basic_stats", "column": "x", "stat": "std"}),
        float_or_null(some.then(|| pop_std(&xs))),
    );
    for q in [0.0, 1.0, rng.random_range(0.0..1.0), 0.5] {
        exact(
            json!({"type": "percentiles", "column": "x", "points": [q]}),
            type7(&xs, q),
        );
    }

    let lens: Vec<f64> = col(rows, "s")
        .filter_map(|v| v.as_str())
        .map(|s| s.chars().count() as f64)
        .collect();
    let has = !lens.is_empty();
    exact(
        json!({"type": "length_stats", "column": "s", "stat": "count"}),
        Value::Int(lens.len() as i64),
    );
    exact(
        json!({"type": "length_stats", "column": "s", "stat": "min"}),
        if has {
            Value::Int(lens.iter().copied().fold(f64::INFINITY, f64::min) as i64)
        } else {
            Value::Null
        },
    );
    exact(
        json!({"type": "length_stats", "column": "s", "stat": "max"}),
        if has {
            Value::Int(lens.iter().copied().fold(0.0, f64::max) as i64)
        } else {
            Value::Null
        },
    );
    exact(
        json!({"type": "length_stats", "column": "s", "stat": "mean"}),
        float_or_null(has.then(|| mean(&lens))),
    );
    exact(
        json!({"type": "length_stats", "column": "s", "stat": "std"}),
        float_or_null(has.then(|| pop_std(&lens))),
    );

    let placeholders: Vec<&str> = ["NA", "-", "99"].into_iter().filter(|_| rng.random_bool(0.6)).collect();
    let empty_is_missing = rng.random_bool(0.5);
    let present = col(rows, "p")
        .filter(|v| {
            !(v.is_null()
                || (empty_is_missing && v.as_str().is_some_and(|s| s.trim().is_empty()))
                || placeholders.contains(&display(v).as_str()))
        })
        .count();
    exact(
        json!({"type": "completeness", "column": "p", "placeholders": placeholders, "empty_is_missing": empty_is_missing}),
        ratio(present, n),
    );
    let p_nonnull: Vec<&Value> = col(rows, "p").filter(|v| !v.is_null()).collect();
    let hits: Vec<String> = p_nonnull
        .iter()
        .map(|v| display(v))
        .filter(|s| placeholders.contains(&s.as_str()))
        .collect();
    if !placeholders.is_empty() {
        exact(
            json!({"type": "placeholder_report", "column": "p", "tokens": placeholders, "report": "fraction"}),
            ratio(hits.len(), p_nonnull.len()),
        );
        exact(
            json!({"type": "placeholder_report", "column": "p", "tokens": placeholders, "report": "distinct"}),
            Value::Int(hits.iter().collect::<BTreeSet<_>>().len() as i64),
        );
    }
    for ty in ["int", "float", "bool"] {
        exact(
            json!({"type": "type_check", "column": "p", "expected": ty}),
            ratio(p_nonnull.iter().filter(|v| parses(v, ty)).count(), p_nonnull.len()),
        );
    }

    for c in ["k", "p", "x"] {
        exact(
            json!({"type": "distinct_count", "column": c}),
            Value::Int(counts(rows, c).len() as i64),
        );
    }
    let hist = counts(rows, "k");
    let nonnull_k: usize = hist.values().map(|(c, _)| c).sum();
    let singles = hist.values().filter(|(c, _)| *c == 1).count();
    exact(
        json!({"type": "uniqueness", "column": "k", "report": "count"}),
        Value::Int(singles as i64),
    );
    exact(
        json!({"type": "uniqueness", "column": "k", "report": "ratio"}),
        ratio(singles, nonnull_k),
    );
    let phi = [0.01, 0.05, 0.1, 0.2, 0.5][rng.random_range(0..5)];
    let mut heavy: Vec<(usize, i64)> = hist
        .values()
        .filter(|(c, _)| *c as f64 >= phi * nonnull_k as f64)
        .map(|(c, v)| (*c, v.as_f64().unwrap() as i64))
        .collect();
    heavy.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    exact(
        json!({"type": "heavy_hitters", "column": "k", "phi": phi, "report": "count"}),
        Value::Int(heavy.len() as i64),
    );
    exact(
        json!({"type": "heavy_hitters", "column": "k", "phi": phi, "report": "top"}),
        heavy.first().map_or(Value::Null, |h| Value::Int(h.1)),
    );

    for direction in ["increasing", "decreasing"] {
        for strict in [false, true] {
            let mut prev: Option<f64> = None;
            let mut bad = 0;
            for v in col(rows, "o") {
                let Some(cur) = num(v) else {
                    bad += 1;
                    prev = None;
                    continue;
                };
                if let Some(p) = prev {
                    let fine = match direction {
                        "increasing" => p < cur || (!strict && p == cur),
                        _ => p > cur || (!strict && p == cur),
                    };
                    bad += i64::from(!fine);
                }
                prev = Some(cur);
            }
            exact(
                json!({"type": "ordering_violations", "column": "o", "direction": direction, "strict": strict}),
                Value::Int(bad),
            );
        }
    }
    for policy in ["allowed", "disallowed", "required"] {
        exact(
            json!({"type": "interval_conflicts", "start": "a", "end": "b", "policy": policy}),
            Value::Int(interval_oracle(rows, policy)),
        );
    }

    let mut by_arrival = rows.to_vec();
    by_arrival.sort_by_key(|e| e.arrival_seq);
    let late = |key: &dyn Fn(&StreamElement) -> Option<f64>| {
        let mut top = f64::NEG_INFINITY;
        let mut count = 0;
        for e in &by_arrival {
            if let Some(v) = key(e) {
                count += i64::from(v < top);
                top = top.max(v);
            }
        }
        count
    };
    exact(
        json!({"type": "out_of_order_count"}),
        Value::Int(late(&|e| Some(e.event_time.millis() as f64))),
    );
    exact(
        json!({"type": "out_of_order_count", "field": "o"}),
        Value::Int(late(&|e| num(e.value("o")))),
    );
    exact(
        json!({"type": "freshness"}),
        rows.iter()
            .map(|e| e.event_time.millis())
            .max()
            .map_or(Value::Null, |t| Value::Int(w.end().millis() - t)),
    );
    exact(json!({"type": "volume"}), Value::Int(n as i64));

    let pairs: Vec<(f64, f64)> = rows
        .iter()
        .filter_map(|e| Some((num(e.value("x"))?, num(e.value("y"))?)))
        .collect();
    let (px, py): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    exact(json!({"type": "correlation", "a": "x", "b": "y"}), pearson(&px, &py));
    exact(
        json!({"type": "correlation", "a": "x", "b": "y", "method": "spearman"}),
        if px.len() < 2 {
            Value::Null
        } else {
            pearson(&ranks(&px), &ranks(&py))
        },
    );

    exact(
        json!({"type": "schema_check", "expected": ["x", "y"]}),
        Value::Bool(rows.iter().all(|e| e.get("x").is_some() && e.get("y").is_some())),
    );

    let keys: BTreeSet<i64> = pane
        .secondary
        .iter()
        .filter_map(|e| e.value("k").as_f64())
        .map(|k| k as i64)
        .collect();
    exact(
        json!({"type": "match_ratio", "column": "k", "stream": "side"}),
        ratio(
            col(rows, "k")
                .filter(|v| v.as_f64().is_some_and(|k| keys.contains(&(k as i64))))
                .count(),
            n,
        ),
    );

    let observed: BTreeSet<String> = col(rows, "s").filter_map(|v| v.as_str()).map(str::to_string).collect();
    let allowed: BTreeSet<String> = TEXTS
        .iter()
        .filter(|_| rng.random_bool(0.8))
        .map(|s| s.to_string())
        .collect();
    let proper = rng.random_bool(0.5);
    exact(
        json!({"type": "in_set", "column": "s", "allowed": allowed, "proper": proper}),
        Value::Bool(observed.is_subset(&allowed) && (!proper || observed.len() < allowed.len())),
    );

    for policy in [NullPolicy::Strict, NullPolicy::Lenient] {
        let lo = rng.random_range(-60..0);
        // A fractional upper bound exercises Int/Float widening.
        let hi = f64::from(rng.random_range(0..60)) + 0.5;
        let (li, hi_inc) = (rng.random_bool(0.5), rng.random_bool(0.5));
        let verdicts = col(rows, "x").map(|v| {
            let x = num(v)?;
            let above = if li { x >= lo as f64 } else { x > lo as f64 };
            let below = if hi_inc { x <= hi } else { x < hi };
            Some(above && below)
        });
        out.push(Case {
            spec: json!({"type": "valid_range", "column": "x", "lo": lo, "hi": hi,
                         "lo_inclusive": li, "hi_inclusive": hi_inc}),
            policy,
            expected: Expected::Exact(fraction(verdicts, policy)),
        });

        let re = REGEXES[rng.random_range(0..REGEXES.len())];
        let full = regex_lite::Regex::new(&format!("^(?:{re})$")).unwrap();
        out.push(Case {
            spec: json!({"type": "matches_pattern", "column": "s", "regex": re}),
            policy,
            expected: Expected::Exact(fraction(
                col(rows, "s").map(|v| v.as_str().map(|s| full.is_match(s))),
                policy,
            )),
        });

        let conforms = col(rows, "x").zip(col(rows, "k")).map(|(x, k)| {
            let left = num(x).map(|x| x > 2.5);
            let right = num(k).map(|k| k == 3.0);
            match (left, right) {
                (Some(true), _) | (_, Some(true)) => Some(true),
                (Some(false), Some(false)) => Some(false),
                _ => None,
            }
        });
        out.push(Case {
            spec: json!({"type": "conforms", "expr": "x > 2.5 or k = 3"}),
            policy,
            expected: Expected::Exact(fraction(conforms, policy)),
        });
    }

    let z = [0.5, 1.0, 1.5, 2.0, 3.0][rng.random_range(0..5)];
    let band = if xs.is_empty() {
        (0, 0)
    } else {
        let (m, s) = (mean(&xs), pop_std(&xs));
        let slack = 1e-9 * xs.iter().fold(1.0f64, |a, x| a.max(x.abs()));
        let above = |cut: f64| xs.iter().filter(|x| (*x - m).abs() > cut).count() as i64;
        if s <= slack {
            (0, 0)
        } else {
            (above(z * s + slack), above(z * s - slack))
        }
    };
    out.push(Case {
        spec: json!({"type": "z_outlier_count", "column": "x", "z": z}),
        policy: NullPolicy::Strict,
        expected: Expected::Between(band.0, band.1),
    });
    out
}

fn approx_checks(pane: &Pane, failures: &mut Failures) {
    let w = &pane.window;
    let exact = counts(&w.elements.iter().map(|e| &**e).collect::<Vec<_>>(), "x");
    let m = Measure::compile(
        &serde_json::from_value(json!({"type": "distinct_count", "column": "x", "mode": "approx"})).unwrap(),
        7,
    )
    .unwrap();
    let est = m.evaluate(w, &EvalEnv::default()).value.as_f64().unwrap_or(0.0);
    let truth = exact.len() as f64;
    failures.check((est - truth).abs() <= (0.05 * truth).max(1.0), || {
        format!("approx distinct_count {est} vs exact {truth}")
    });

    let k = 32;
    let spec = json!({"type": "heavy_hitters", "column": "k", "mode": "approx", "k": k, "phi": 1.0 / k as f64});
    let m = Measure::compile(&serde_json::from_value(spec).unwrap(), 0).unwrap();
    let reported: Vec<i64> = m
        .evaluate(w, &EvalEnv::default())
        .detail
        .and_then(|d| d.get("items").cloned())
        .and_then(|items| serde_json::from_value::<Vec<serde_json::Value>>(items).ok())
        .unwrap_or_default()
        .iter()
        .filter_map(|i| i["item"].as_i64())
        .collect();
    let rows: Vec<&StreamElement> = w.elements.iter().map(|e| &**e).collect();
    let hist = counts(&rows, "k");
    let n: usize = hist.values().map(|(c, _)| c).sum();
    for (c, v) in hist.values() {
        let item = v.as_f64().unwrap() as i64;
        failures.check(*c * k <= n || reported.contains(&item), || {
            format!("approx heavy_hitters missed item {item} with count {c} of {n}")
        });
    }
}

pub fn run() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0001);
    let mut failures = Failures::default();
    let mut evaluations = 0usize;
    let mut elements = 0usize;
    let mut compiled: BTreeMap<String, Measure> = BTreeMap::new();
    for i in 0..WINDOWS {
        let size = match i {
            0..=3 => i,
            4 => MAX_SIZE,
            _ => rng.random_range(0..=MAX_SIZE),
        };
        let pane = random_pane(&mut rng, size);
        elements += size;
        for case in cases(&mut rng, &pane) {
            let key = case.spec.to_string();
            let measure = match compiled.get(&key) {
                Some(m) => m,
                None => {
                    let spec: MeasureSpec = match serde_json::from_value(case.spec.clone()) {
                        Ok(s) => s,
                        Err(e) => return Err(format!("spec {key} rejected: {e}")),
                    };
                    let m = Measure::compile(&spec, 0).map_err(|e| format!("{key}: {e}"))?;
                    compiled.entry(key.clone()).or_insert(m)
                }
            };
            let env = EvalEnv {
                null_policy: case.policy,
                secondary: Some(&pane.secondary),
            };
            let got = measure.evaluate(&pane.window, &env).value;
            evaluations += 1;
            match case.expected {
                Expected::Exact(want) => failures.check(agree(&got, &want), || {
                    format!(
                        "window {i} (n={size}) {key} {:?}: got {got:?}, want {want:?}",
                        case.policy
                    )
                }),
                Expected::Between(lo, hi) => {
                    let ok = matches!(got, Value::Int(c) if (lo..=hi).contains(&c));
                    failures.check(ok, || format!("window {i} {key}: got {got:?}, want {lo}..={hi}"))
                }
            }
        }
        approx_checks(&pane, &mut failures);
    }
    failures.outcome(format!(
        "{WINDOWS} panes ({elements} elements, sizes 0..={MAX_SIZE}, Nulls 0-30%), {evaluations} measure evaluations, {} distinct specs",
        compiled.len()
    ))
}
