use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use clap::{Parser, Subcommand};
use serde_json::json;

use tidewatch::connectors::{default_manifest_path, write_stream, GeneratorSpec, SinkTarget};
use tidewatch::model::Span;
use tidewatch_cli::{bench, load_config, run, BenchOptions, RunError, SetupError, SuiteConfig};

/// Run finished, whatever the check verdicts were.
const EXIT_OK: u8 = 0;
/// I/O failure while reading, writing or generating.
const EXIT_IO: u8 = 1;
/// Config unreadable, malformed or invalid.
const EXIT_CONFIG: u8 = 2;

#[derive(Parser)]
#[command(
    name = "tidewatch",
    version,
    about = "Window-based data quality monitoring for event streams"
)]
struct Cli {
    /// Print reports as JSON.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a suite config without running it.
    Validate { config: PathBuf },
    /// Monitor the configured source until EOF or interrupt.
    Run {
        config: PathBuf,
        /// Meta-stream target: a path, `-` for stdout, or tcp://host:port.
        #[arg(long)]
        meta: Option<SinkTarget>,
        /// Side-output target for failing elements.
        #[arg(long)]
        side: Option<SinkTarget>,
        /// Replace the configured window length.
        #[arg(long, value_name = "SPAN")]
        window_duration: Option<Span>,
        /// Replace the slide; turns a tumbling window into a sliding one.
        #[arg(long, value_name = "SPAN")]
        slide: Option<Span>,
    },
    /// Time the suite over the first N source records for each size.
    Bench {
        config: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "100000,500000")]
        sizes: Vec<usize>,
        #[arg(long, default_value_t = 5)]
        repeats: usize,
        /// Records replayed before timing starts.
        #[arg(long)]
        warmup: Option<usize>,
    },
    /// Write a synthetic stream and its anomaly manifest.
    Generate {
        spec: PathBuf,
        out: PathBuf,
        /// Defaults to `<out>.manifest.jsonl`.
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
}

struct Failure {
    code: u8,
    lines: Vec<String>,
}

impl Failure {
    fn config(msg: impl ToString) -> Failure {
        Failure {
            code: EXIT_CONFIG,
            lines: vec![msg.to_string()],
        }
    }

    fn io(msg: impl ToString) -> Failure {
        Failure {
            code: EXIT_IO,
            lines: vec![msg.to_string()],
        }
    }
}

impl From<RunError> for Failure {
    fn from(e: RunError) -> Failure {
        match e {
            RunError::Setup(SetupError::Suite(errors)) => Failure {
                code: EXIT_CONFIG,
                lines: errors.0.iter().map(ToString::to_string).collect(),
            },
            e if e.is_config() => Failure::config(e),
            e => Failure::io(e),
        }
    }
}

fn config_at(path: &Path) -> Result<SuiteConfig, Failure> {
    load_config(path).map_err(|e| match e {
        tidewatch_cli::ConfigLoadError::Read { .. } => Failure::io(e),
        e => Failure::config(e),
    })
}

fn print_json(value: &impl serde::Serialize) {
    println!("{}", serde_json::to_string_pretty(value).expect("report serializes"));
}

fn validate(path: &Path, as_json: bool) -> Result<(), Failure> {
    let result = config_at(path).and_then(|c| {
        c.build_suite()
            .map(|s| s.checks.len())
            .map_err(|e| Failure::from(RunError::Setup(e)))
    });
    if as_json {
        let report = match &result {
            Ok(n) => json!({"valid": true, "checks": n, "errors": []}),
            Err(f) => json!({"valid": false, "errors": f.lines}),
        };
        print_json(&report);
    }
    match result {
        Ok(n) => {
            if !as_json {
                println!("{}: ok ({n} checks)", path.display());
            }
            Ok(())
        }
        Err(f) => Err(f),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Validate { config } => validate(&config, cli.json),
        Command::Run {
            config,
            meta,
            side,
            window_duration,
            slide,
        } => (|| {
            let mut c = config_at(&config)?;
            c.override_window(window_duration, slide)
                .map_err(|e| Failure::from(RunError::Setup(e)))?;
            if meta.is_some() {
                c.sinks.meta = meta;
            }
            if side.is_some() {
                c.sinks.side = side;
            }
            let stop = Arc::new(AtomicBool::new(false));
            let flag = Arc::clone(&stop);
            if let Err(e) = ctrlc::set_handler(move || flag.store(true, Ordering::Relaxed)) {
                log::warn!("cannot install interrupt handler: {e}");
            }
            let summary = run(&c, stop)?;
            if cli.json {
                eprintln!("{}", serde_json::to_string(&summary).expect("summary serializes"));
            } else {
                let e = &summary.engine;
                let s = &summary.source;
                eprintln!(
                    "{} elements ({} skipped), {} late accepted, {} discarded, {} panes, {} meta records, {} side rows",
                    s.yielded,
                    s.skipped(),
                    e.late_accepted,
                    e.discarded,
                    e.panes_closed,
                    summary.meta_lines,
                    summary.side_lines
                );
            }
            Ok(())
        })(),
        Command::Bench {
            config,
            sizes,
            repeats,
            warmup,
        } => (|| {
            let c = config_at(&config)?;
            let mut opts = BenchOptions::new(sizes, repeats);
            if let Some(w) = warmup {
                opts.warmup = w;
            }
            let report = bench(&c, &opts)?;
            if cli.json {
                print_json(&report);
            } else {
                print!("{report}");
            }
            Ok(())
        })(),
        Command::Generate { spec, out, manifest } => (|| {
            let text = std::fs::read_to_string(&spec).map_err(|e| Failure::io(format!("{}: {e}", spec.display())))?;
            let gen: GeneratorSpec =
                serde_json::from_str(&text).map_err(|e| Failure::config(format!("{}: {e}", spec.display())))?;
            let manifest = manifest.unwrap_or_else(|| default_manifest_path(&out));
            let done = write_stream(&gen, &out, &manifest).map_err(|e| match e {
                tidewatch::connectors::GeneratorError::Spec(_) => Failure::config(e),
                e => Failure::io(e),
            })?;
            if cli.json {
                print_json(&done);
            } else {
                println!(
                    "wrote {} records to {} ({} injections in {})",
                    done.records,
                    done.out.display(),
                    done.injections,
                    done.manifest.display()
                );
            }
            Ok(())
        })(),
    };
    match result {
        Ok(()) => ExitCode::from(EXIT_OK),
        Err(f) => {
            for line in &f.lines {
                eprintln!("error: {line}");
            }
            ExitCode::from(f.code)
        }
    }
}
