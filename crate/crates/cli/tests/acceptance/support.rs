use std::fmt::Display;
use std::path::PathBuf;
use std::process::Command;

use tidewatch::model::{MetaRecord, Timestamp, Value};

/// `Ok(summary)` or `Err(why)`.
pub type Outcome = Result<String, String>;

pub const REL_TOL: f64 = 1e-9;

/// Relative closeness with an absolute floor of 1 on the scale.
pub fn close(actual: f64, expected: f64) -> bool {
    (actual - expected).abs() <= REL_TOL * expected.abs().max(1.0)
}

/// Same kind and, for floats, within tolerance.
pub fn agree(actual: &Value, expected: &Value) -> bool {
    match (actual, expected) {
        (Value::Float(a), Value::Float(e)) => close(*a, *e),
        (a, e) => a == e,
    }
}

/// Collects the first few failures of a long randomized run.
#[derive(Default)]
pub struct Failures {
    pub count: usize,
    pub shown: Vec<String>,
}

impl Failures {
    pub fn push(&mut self, msg: impl Display) {
        self.count += 1;
        if self.shown.len() < 8 {
            self.shown.push(msg.to_string());
        }
    }

    pub fn check(&mut self, ok: bool, msg: impl FnOnce() -> String) {
        if !ok {
            self.push(msg());
        }
    }

    pub fn outcome(self, summary: String) -> Outcome {
        if self.count == 0 {
            Ok(summary)
        } else {
            Err(format!("{} mismatches; first: {}", self.count, self.shown.join(" | ")))
        }
    }
}

pub fn ts(iso: &str) -> Timestamp {
    Timestamp::parse_iso(iso).unwrap_or_else(|| panic!("bad timestamp {iso}"))
}

pub fn tidewatch() -> Command {
    Command::new(env!("CARGO_BIN_EXE_tidewatch"))
}

pub fn read_meta(path: &std::path::Path) -> Result<Vec<MetaRecord>, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    text.lines()
        .map(|l| MetaRecord::from_json_line(l).map_err(|e| e.to_string()))
        .collect()
}

pub fn scratch() -> tempfile::TempDir {
    tempfile::tempdir().expect("temp dir")
}

pub fn write(dir: &std::path::Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).expect("write scratch file");
    p
}
