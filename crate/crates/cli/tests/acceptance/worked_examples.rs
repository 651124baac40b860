//! Small hand-built streams with known meta-stream output: a completeness
//! pair, the sliding fare-mean pair and a frozen sensor.

use std::collections::BTreeMap;

use serde_json::json;

use tidewatch::model::{MetaRecord, Span, StreamElement, Value, WindowSpec};
use tidewatch::monitor::{validate_suite, DetectorConfig, Engine, SuiteDef};

use crate::support::{ts, Outcome};

fn replay(
    window: WindowSpec,
    checks: serde_json::Value,
    elements: Vec<StreamElement>,
) -> Result<Vec<MetaRecord>, String> {
    let suite = validate_suite(SuiteDef {
        checks: serde_json::from_value(checks).map_err(|e| e.to_string())?,
        window,
        schema: None,
        references: BTreeMap::new(),
        streams: BTreeMap::new(),
        detectors: DetectorConfig {
            late_discards: false,
            ..DetectorConfig::default()
        },
        hash_seed: 0,
    })
    .map_err(|e| e.to_string())?;
    let mut engine = Engine::new(suite, Span::ZERO, 1);
    let mut out = Vec::new();
    for e in elements {
        out.extend(engine.ingest(e).records);
    }
    out.extend(engine.finish());
    Ok(out)
}

fn find<'a>(records: &'a [MetaRecord], check: &str, start: &str, end: &str) -> Result<&'a MetaRecord, String> {
    let (s, e) = (ts(start), ts(end));
    records
        .iter()
        .find(|r| r.check_id == check && r.window_start == s && r.window_end == e)
        .ok_or_else(|| format!("no `{check}` record for [{start}, {end})"))
}

fn float(v: &Value) -> Result<f64, String> {
    v.as_f64().ok_or_else(|| format!("expected a number, got {v:?}"))
}

fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

fn expect(cond: bool, what: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(what())
    }
}

/// Two 20-element panes with 3 and 5 missing passenger counts.
fn completeness() -> Result<String, String> {
    let start = ts("2015-05-07T08:00:00Z");
    let elements = (0..40)
        .map(|i| {
            let missing = if i < 20 { i % 7 == 0 } else { i % 4 == 0 };
            let t = start + Span::from_secs(i * 15);
            let passengers = if missing { Value::Null } else { Value::Int(1 + i % 3) };
            StreamElement::new(t, i as u64 + 1).with("passengers", passengers)
        })
        .collect();
    let records = replay(
        WindowSpec::tumbling(Span::from_mins(5)).unwrap(),
        json!([{"id": "passengers_complete", "measure": {"type": "completeness", "column": "passengers"}, "constraint": ">= 0.9"}]),
        elements,
    )?;
    let first = find(
        &records,
        "passengers_complete",
        "2015-05-07T08:00:00Z",
        "2015-05-07T08:05:00Z",
    )?;
    let second = find(
        &records,
        "passengers_complete",
        "2015-05-07T08:05:00Z",
        "2015-05-07T08:10:00Z",
    )?;
    expect(first.value == Value::Float(0.85), || {
        format!("first pane completeness {:?}", first.value)
    })?;
    expect(second.value == Value::Float(0.75) && !second.ok, || {
        format!("second pane <{:?}, {}>", second.value, second.ok)
    })?;
    Ok("completeness 0.85 and <0.75, false>".into())
}

/// Per-minute fares whose 5-minute and 10-minute means straddle 10.
fn fare_stream() -> Vec<StreamElement> {
    let fares = [5.0, 10.0, 10.0, 10.0, 11.45, 11.35, 9.0, 9.0, 9.0, 8.1, 17.7];
    let base = ts("2015-05-07T11:35:30Z");
    fares
        .iter()
        .enumerate()
        .map(|(i, &f)| StreamElement::new(base + Span::from_mins(i as i64), i as u64 + 1).with("fare", f))
        .collect()
}

fn sliding_means() -> Result<String, String> {
    let check = json!([{"id": "fare_mean", "measure": {"type": "basic_stats", "column": "fare", "stat": "mean"}, "constraint": "<= 10"}]);
    let mut seen = Vec::new();
    for (minutes, ends) in [(10, ["11:45", "11:46"]), (5, ["11:40", "11:41"])] {
        let spec = WindowSpec::sliding(Span::from_mins(minutes), Span::from_mins(1)).unwrap();
        let records = replay(spec, check.clone(), fare_stream())?;
        for ((start, end), (mean, ok)) in ["11:35", "11:36"]
            .into_iter()
            .zip(ends)
            .zip([(9.29, true), (10.56, false)])
        {
            let r = find(
                &records,
                "fare_mean",
                &format!("2015-05-07T{start}:00Z"),
                &format!("2015-05-07T{end}:00Z"),
            )?;
            let v = round2(float(&r.value)?);
            expect(v == mean && r.ok == ok, || {
                format!(
                    "{minutes}m panes [{start}, {end}): <{v}, {}>, want <{mean}, {ok}>",
                    r.ok
                )
            })?;
            seen.push(format!("<{start}, {end}, {v}, {}>", if ok { "True" } else { "False" }));
        }
    }
    Ok(seen.join(" "))
}

/// A sensor reporting one value for a whole pane.
fn frozen() -> Result<String, String> {
    let start = ts("2015-05-07T09:00:00Z");
    let elements = (0..40)
        .map(|i| {
            let v = if i < 20 { 1 + i % 4 } else { 2 };
            StreamElement::new(start + Span::from_secs(i * 15), i as u64 + 1).with("passengers", v)
        })
        .collect();
    let records = replay(
        WindowSpec::tumbling(Span::from_mins(5)).unwrap(),
        json!([{"id": "passengers_vary", "measure": {"type": "distinct_count", "column": "passengers"}, "constraint": "> 1"}]),
        elements,
    )?;
    let live = find(
        &records,
        "passengers_vary",
        "2015-05-07T09:00:00Z",
        "2015-05-07T09:05:00Z",
    )?;
    let stuck = find(
        &records,
        "passengers_vary",
        "2015-05-07T09:05:00Z",
        "2015-05-07T09:10:00Z",
    )?;
    expect(live.value == Value::Int(4) && live.ok, || {
        format!("live pane <{:?}, {}>", live.value, live.ok)
    })?;
    expect(stuck.value == Value::Int(1) && !stuck.ok, || {
        format!("frozen pane <{:?}, {}>", stuck.value, stuck.ok)
    })?;
    Ok("frozen distinct_count 1 -> False".into())
}

pub fn run() -> Outcome {
    Ok([completeness()?, sliding_means()?, frozen()?].join("; "))
}
