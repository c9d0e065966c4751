//! Command-line front end: `run`, `sweep` and `validate`.
//!
//! Exit status is 0 on success, 1 when the input is invalid and 2 when a run
//! fails. `TDTHR_OUT_DIR` supplies the output directory (the base for a
//! relative `run --out`, the default for `sweep`) and `TDTHR_JOBS` the sweep
//! thread count.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::error::Error;
use crate::metrics::MetricsLedger;
use crate::sim::{run, run_traced, SimConfig};
use crate::sweep::{write_outputs, SweepSpec};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

pub const ENV_OUT_DIR: &str = "TDTHR_OUT_DIR";
pub const ENV_JOBS: &str = "TDTHR_JOBS";

#[derive(Debug, Parser)]
#[command(name = "tdthr", version, about = "Two-hop QoS routing simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one simulation and write its metrics row.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: u64,
        /// CSV file to write (header plus one row).
        #[arg(long)]
        out: PathBuf,
        /// Also write the event trace here.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Run every combination of a sweep spec.
    Sweep {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Check a configuration and print it with every default expanded.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

/// Parses `args` (including the program name) and executes the command.
pub fn main_with_args<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
            if e.use_stderr() {
                let _ = write!(stderr, "{e}");
            } else {
                let _ = write!(stdout, "{e}");
            }
            return code;
        }
    };
    match cli.command {
        Command::Run {
            config,
            seed,
            out,
            trace,
        } => cmd_run(&config, seed, &out, trace.as_deref(), stdout, stderr),
        Command::Sweep { spec, out, jobs } => cmd_sweep(&spec, out, jobs, stdout, stderr),
        Command::Validate { config } => cmd_validate(&config, stdout, stderr),
    }
}

fn load(path: &Path, stderr: &mut dyn Write) -> Option<SimConfig> {
    let cfg = match SimConfig::from_path(path) {
        Ok(c) => c,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            return None;
        }
    };
    let violations = cfg.violations();
    if violations.is_empty() {
        return Some(cfg);
    }
    for v in violations {
        let _ = writeln!(stderr, "error: {}: {v}", path.display());
    }
    None
}

fn out_dir_env() -> Option<PathBuf> {
    std::env::var_os(ENV_OUT_DIR)
        .filter(|v| !v.is_empty())
        .map(PathBuf::from)
}

fn cmd_run(
    config: &Path,
    seed: u64,
    out: &Path,
    trace: Option<&Path>,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> i32 {
    let Some(mut cfg) = load(config, stderr) else {
        return EXIT_INVALID;
    };
    cfg.rng_seed = seed;
    let out = match out_dir_env() {
        Some(dir) if out.is_relative() => dir.join(out),
        _ => out.to_path_buf(),
    };
    let result = match trace {
        Some(t) => run_traced(&cfg)
            .map(|o| (o.ledger, o.trace.unwrap_or_default()))
            .map(|(l, text)| (l, Some((t, text)))),
        None => run(&cfg).map(|l| (l, None)),
    };
    let (ledger, trace) = match result {
        Ok(r) => r,
        Err(e) => {
            let _ = writeln!(stderr, "error: run failed: {e}");
            if let Some(t) = trace {
                if std::fs::write(t, format!("# run failed\n# {e}\n")).is_ok() {
                    let _ = writeln!(stderr, "diagnostic written to {}", t.display());
                }
            }
            return if matches!(e, Error::Config(_)) {
                EXIT_INVALID
            } else {
                EXIT_RUNTIME
            };
        }
    };
    let csv = format!("{}\n{}\n", MetricsLedger::csv_header(), ledger.csv_row());
    if let Err(e) = write_file(&out, &csv) {
        let _ = writeln!(stderr, "error: writing {}: {e}", out.display());
        return EXIT_RUNTIME;
    }
    if let Some((path, text)) = trace {
        if let Err(e) = write_file(path, &text) {
            let _ = writeln!(stderr, "error: writing {}: {e}", path.display());
            return EXIT_RUNTIME;
        }
    }
    let _ = writeln!(stdout, "{}", ledger.summary());
    EXIT_OK
}

fn write_file(path: &Path, text: &str) -> std::io::Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, text)
}

fn cmd_sweep(
    spec_path: &Path,
    out: Option<PathBuf>,
    jobs: Option<usize>,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> i32 {
    let dir = spec_path.parent().unwrap_or(Path::new("."));
    let sweep = match SweepSpec::from_path(spec_path).and_then(|s| s.resolve(dir)) {
        Ok(s) => s,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            return EXIT_INVALID;
        }
    };
    let Some(out) = out.or_else(out_dir_env).or_else(|| sweep.out.clone()) else {
        let _ = writeln!(stderr, "error: no output directory (use --out or {ENV_OUT_DIR})");
        return EXIT_INVALID;
    };
    let env_jobs = std::env::var(ENV_JOBS).ok().filter(|v| !v.is_empty());
    let jobs = match (jobs, env_jobs) {
        (Some(j), _) => j,
        (None, Some(v)) => match v.parse::<usize>() {
            Ok(j) => j,
            Err(_) => {
                let _ = writeln!(stderr, "error: {ENV_JOBS} = {v:?} is not a thread count");
                return EXIT_INVALID;
            }
        },
        (None, None) => 0,
    };
    let records = match sweep.run_with_jobs(jobs) {
        Ok(r) => r,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            return EXIT_RUNTIME;
        }
    };
    if let Err(e) = write_outputs(&out, &sweep, &records) {
        let _ = writeln!(stderr, "error: writing {}: {e}", out.display());
        return EXIT_RUNTIME;
    }
    let failed = records.iter().filter(|r| r.outcome.is_err()).count();
    let _ = writeln!(
        stdout,
        "{} runs, {failed} failed; results in {}",
        records.len(),
        out.display()
    );
    for r in records.iter().filter(|r| r.outcome.is_err()) {
        let _ = writeln!(
            stderr,
            "run {}={} {} seed {} failed: {}",
            sweep.parameter,
            r.key.value,
            r.key.protocol.name(),
            r.key.seed,
            r.outcome.as_ref().unwrap_err()
        );
    }
    if failed > 0 {
        EXIT_RUNTIME
    } else {
        EXIT_OK
    }
}

fn cmd_validate(config: &Path, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32 {
    match load(config, stderr) {
        Some(cfg) => {
            let _ = write!(stdout, "{}", cfg.to_toml_string());
            EXIT_OK
        }
        None => EXIT_INVALID,
    }
}
