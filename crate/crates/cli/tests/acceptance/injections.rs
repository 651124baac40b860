//! One generated stream per anomaly type, replayed through the CLI with the
//! check meant to catch it. The manifest is the ground truth.

use std::path::Path;

use serde_json::json;

use tidewatch::connectors::read_manifest;
use tidewatch::model::MetaRecord;

use crate::support::{read_meta, scratch, tidewatch, write, Outcome};

fn generator(seed: u64, injection: serde_json::Value) -> serde_json::Value {
    json!({
        "seed": seed,
        "start": "2015-05-07T00:00:00Z",
        "rate": 10.0,
        "duration": "30m",
        "columns": [
            {"name": "trip_id", "gen": {"type": "sequence", "start": 1}},
            {"name": "taxi_id", "gen": {"type": "zipf", "n": 50, "s": 1.1, "prefix": "T"}},
            {"name": "fare", "gen": {"type": "uniform", "lo": 2.5, "hi": 60.0, "decimals": 2}},
            {"name": "passengers", "gen": {"type": "int", "lo": 1, "hi": 4}},
            {"name": "dest_zone", "gen": {"type": "choice", "values": ["Z01", "Z02", "Z03", "Z04", "Z05"]}}
        ],
        "injections": [injection]
    })
}

fn suite(data: &Path, meta: &Path, check: serde_json::Value) -> serde_json::Value {
    json!({
        "source": {
            "kind": "csv",
            "path": data,
            "event_time": "event_time",
            "columns": [
                {"name": "event_time", "type": "timestamp", "nullable": false},
                {"name": "trip_id", "type": "int"},
                {"name": "taxi_id", "type": "text"},
                {"name": "fare", "type": "float"},
                {"name": "passengers", "type": "int"},
                {"name": "dest_zone", "type": "text"}
            ],
            "watermark_delay": "30s"
        },
        "window": {"kind": "tumbling", "duration": "1m"},
        "checks": [check],
        "sinks": {"meta": meta},
        "engine": {"workers": 2}
    })
}

struct Scenario {
    anomaly: &'static str,
    injection: serde_json::Value,
    check: serde_json::Value,
}

fn scenarios() -> Vec<Scenario> {
    let at = |extra: serde_json::Value| {
        let mut v = json!({"start": "10m30s", "duration": "5m"});
        v.as_object_mut().unwrap().extend(extra.as_object().unwrap().clone());
        v
    };
    vec![
        Scenario {
            anomaly: "missing_burst",
            injection: at(json!({"type": "missing_burst", "column": "dest_zone"})),
            check: json!({"id": "zone_complete", "measure": {"type": "completeness", "column": "dest_zone"}, "constraint": ">= 0.99"}),
        },
        Scenario {
            anomaly: "placeholder_burst",
            injection: at(json!({"type": "placeholder_burst", "column": "dest_zone", "token": "99"})),
            check: json!({"id": "zone_complete", "measure": {"type": "completeness", "column": "dest_zone", "placeholders": ["99"]}, "constraint": ">= 0.99"}),
        },
        Scenario {
            anomaly: "duplicate_burst",
            injection: at(json!({"type": "duplicate_burst"})),
            check: json!({"id": "trip_unique", "measure": {"type": "uniqueness", "column": "trip_id"}, "constraint": ">= 1"}),
        },
        Scenario {
            anomaly: "out_of_order",
            injection: at(json!({"type": "out_of_order", "shuffle": 20})),
            check: json!({"id": "in_order", "measure": {"type": "out_of_order_count"}, "constraint": "<= 0"}),
        },
        Scenario {
            anomaly: "frozen",
            injection: at(json!({"type": "frozen", "column": "fare"})),
            check: json!({"id": "fare_varies", "measure": {"type": "distinct_count", "column": "fare"}, "constraint": "> 1"}),
        },
        Scenario {
            anomaly: "fare_spike",
            injection: at(json!({"type": "fare_spike", "column": "fare", "value": 99})),
            check: json!({"id": "fare_in_range", "measure": {"type": "valid_range", "column": "fare", "lo": 0, "hi": 90}, "constraint": ">= 1"}),
        },
    ]
}

fn run_scenario(dir: &Path, seed: u64, s: &Scenario) -> Result<String, String> {
    let spec = write(
        dir,
        &format!("{}.gen.json", s.anomaly),
        &generator(seed, s.injection.clone()).to_string(),
    );
    let data = dir.join(format!("{}.csv", s.anomaly));
    let manifest = dir.join(format!("{}.manifest.jsonl", s.anomaly));
    let out = tidewatch()
        .arg("generate")
        .args([&spec, &data])
        .arg("--manifest")
        .arg(&manifest)
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!("generate failed: {}", String::from_utf8_lossy(&out.stderr)));
    }
    let truth = read_manifest(&manifest).map_err(|e| e.to_string())?;
    let [entry] = truth.as_slice() else {
        return Err(format!(
            "{}: expected one manifest entry, got {}",
            s.anomaly,
            truth.len()
        ));
    };
    if entry.kind != s.anomaly {
        return Err(format!("manifest type {} for {}", entry.kind, s.anomaly));
    }

    let meta = dir.join(format!("{}.meta.jsonl", s.anomaly));
    let config = write(
        dir,
        &format!("{}.json", s.anomaly),
        &suite(&data, &meta, s.check.clone()).to_string(),
    );
    let out = tidewatch()
        .arg("run")
        .arg(&config)
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!("run failed: {}", String::from_utf8_lossy(&out.stderr)));
    }
    let id = s.check["id"].as_str().unwrap();
    let windows: Vec<MetaRecord> = read_meta(&meta)?
        .into_iter()
        .filter(|r| r.check_id == id && r.element_ref().is_none())
        .collect();
    let (mut inside, mut outside) = (0, 0);
    for r in &windows {
        let within = entry.start <= r.window_start && r.window_end <= entry.end;
        let apart = r.window_end <= entry.start || r.window_start >= entry.end;
        if within {
            inside += 1;
            if r.ok {
                return Err(format!(
                    "{}: `{id}` passed inside the span at {}",
                    s.anomaly,
                    r.window_start.to_iso()
                ));
            }
        } else if apart {
            outside += 1;
            if !r.ok {
                return Err(format!(
                    "{}: `{id}` failed outside the span at {}",
                    s.anomaly,
                    r.window_start.to_iso()
                ));
            }
        }
    }
    if inside == 0 || outside == 0 {
        return Err(format!("{}: {inside} windows inside and {outside} outside", s.anomaly));
    }
    Ok(format!("{} ({inside} in / {outside} out)", s.anomaly))
}

pub fn run() -> Outcome {
    let dir = scratch();
    let mut done = Vec::new();
    for (i, s) in scenarios().iter().enumerate() {
        done.push(run_scenario(dir.path(), 1000 + i as u64, s)?);
    }
    Ok(done.join(", "))
}
