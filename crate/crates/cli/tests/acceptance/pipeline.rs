//! End-to-end runs of the `tidewatch` binary on the shipped configs:
//! byte-identical reruns, and wall time, peak memory and scaling at 500K records.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use serde_json::Value as Json;

use crate::support::{scratch, tidewatch, write, Outcome};

const WALL_LIMIT: Duration = Duration::from_secs(60);
const RSS_LIMIT_BYTES: u64 = 1 << 30;
const LINEARITY_TOLERANCE: f64 = 0.30;

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn load(name: &str) -> Result<Json, String> {
    let p = configs().join(name);
    let text = std::fs::read_to_string(&p).map_err(|e| format!("{}: {e}", p.display()))?;
    serde_json::from_str(&text).map_err(|e| format!("{}: {e}", p.display()))
}

fn checked(cmd: &mut Command) -> Result<std::process::Output, String> {
    let out = cmd.output().map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(out)
    } else {
        Err(format!(
            "{cmd:?} exited with {}: {}",
            out.status,
            String::from_utf8_lossy(&out.stderr)
        ))
    }
}

/// Generates `<name>.csv` from `configs/<name>.gen.json`.
fn generate(dir: &Path, name: &str) -> Result<PathBuf, String> {
    let spec = write(
        dir,
        &format!("{name}.gen.json"),
        &load(&format!("{name}.gen.json"))?.to_string(),
    );
    let data = dir.join(format!("{name}.csv"));
    checked(tidewatch().arg("generate").arg(&spec).arg(&data))?;
    Ok(data)
}

/// `configs/<name>.json` pointed at `data`, writing meta (and side) into `dir`.
fn suite(dir: &Path, name: &str, data: &Path, tag: &str, workers: usize) -> Result<(PathBuf, PathBuf), String> {
    let mut config = load(&format!("{name}.json"))?;
    config["source"]["path"] = Json::from(data.to_str().unwrap());
    let meta = dir.join(format!("{name}.{tag}.meta.jsonl"));
    config["sinks"]["meta"] = Json::from(meta.to_str().unwrap());
    if config["sinks"].get("side").is_some() {
        config["sinks"]["side"] = Json::from(dir.join(format!("{name}.{tag}.side.jsonl")).to_str().unwrap());
    }
    config["engine"]["workers"] = Json::from(workers);
    Ok((write(dir, &format!("{name}.{tag}.json"), &config.to_string()), meta))
}

pub fn determinism() -> Outcome {
    let dir = scratch();
    let data = generate(dir.path(), "taxi")?;
    let mut outputs = Vec::new();
    for (tag, workers) in [("a", 4), ("b", 4), ("serial", 1)] {
        let (config, meta) = suite(dir.path(), "taxi", &data, tag, workers)?;
        checked(tidewatch().arg("run").arg(&config))?;
        let side = meta.with_file_name(format!("taxi.{tag}.side.jsonl"));
        let bytes = std::fs::read(&meta).map_err(|e| e.to_string())?;
        let side_bytes = std::fs::read(&side).map_err(|e| e.to_string())?;
        outputs.push((tag, bytes, side_bytes));
    }
    let (_, first, first_side) = &outputs[0];
    if first.is_empty() {
        return Err("empty meta-stream".into());
    }
    for (tag, bytes, side) in &outputs[1..] {
        if bytes != first {
            return Err(format!("meta-stream of run `{tag}` differs from run `a`"));
        }
        if side != first_side {
            return Err(format!("side output of run `{tag}` differs from run `a`"));
        }
    }
    Ok(format!(
        "3 runs (4, 4 and 1 workers) wrote identical meta-streams ({} lines, {} bytes) and side outputs",
        first.iter().filter(|&&b| b == b'\n').count(),
        first.len()
    ))
}

/// Runs the child to completion and reports its exit status and peak RSS.
fn run_measured(cmd: &mut Command) -> Result<(bool, u64, Duration), String> {
    let started = Instant::now();
    let child = cmd
        .stdout(std::process::Stdio::null())
        .stderr(std::process::Stdio::null())
        .spawn()
        .map_err(|e| e.to_string())?;
    let pid = child.id() as libc::pid_t;
    let mut status = 0;
    // SAFETY: `usage` is a plain C struct and `pid` is our own unreaped child.
    let mut usage: libc::rusage = unsafe { std::mem::zeroed() };
    let reaped = unsafe { libc::wait4(pid, &mut status, 0, &mut usage) };
    let elapsed = started.elapsed();
    if reaped != pid {
        return Err(format!("wait4 failed: {}", std::io::Error::last_os_error()));
    }
    let ok = libc::WIFEXITED(status) && libc::WEXITSTATUS(status) == 0;
    // ru_maxrss is in kilobytes on Linux.
    Ok((ok, usage.ru_maxrss as u64 * 1024, elapsed))
}

pub fn performance() -> Outcome {
    let dir = scratch();
    let data = generate(dir.path(), "bench")?;
    let (config, meta) = suite(dir.path(), "bench", &data, "perf", 4)?;
    let (ok, rss, wall) = run_measured(tidewatch().arg("run").arg(&config))?;
    if !ok {
        return Err("run exited unsuccessfully".into());
    }
    let records = std::fs::read_to_string(&meta)
        .map_err(|e| e.to_string())?
        .lines()
        .count();
    if wall >= WALL_LIMIT {
        return Err(format!("500K records took {:.1}s", wall.as_secs_f64()));
    }
    if rss >= RSS_LIMIT_BYTES {
        return Err(format!("peak RSS {} MiB", rss >> 20));
    }

    let out = checked(
        tidewatch()
            .args(["bench", "--json", "--sizes", "100000,500000", "--repeats", "3"])
            .arg(&config),
    )?;
    let report: Json = serde_json::from_slice(&out.stdout).map_err(|e| format!("bench report: {e}"))?;
    let linearity = report["scaling"]["linearity"]
        .as_f64()
        .ok_or("bench report has no scaling")?;
    if (linearity - 1.0).abs() > LINEARITY_TOLERANCE {
        return Err(format!(
            "100K -> 500K wall-time ratio is {linearity:.2}x the record ratio"
        ));
    }
    let throughput = report["sizes"][1]["throughput"].as_f64().unwrap_or(0.0);
    Ok(format!(
        "500K records, 5 checks, 1-min panes: {:.2}s wall, peak RSS {} MiB, {records} meta records; \
         bench scaling 100K->500K linearity {linearity:.2} ({throughput:.0} records/s)",
        wall.as_secs_f64(),
        rss >> 20
    ))
}
