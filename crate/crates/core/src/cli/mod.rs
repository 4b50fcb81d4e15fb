//! Command-line front end: `logshare --config exp.json --out dir`.

pub mod config;
pub mod experiments;
pub mod output;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::Parser;
use serde_json::Value;

use crate::error::{Error, Result};

pub use config::{validate_config, validate_value, ExperimentConfig, ExperimentKind, GridSpec, HittingVariant};
pub use experiments::{run_experiment, Bound, Criterion, ExperimentOutput, Report, Table, VERSION};
pub use output::write_outputs;

/// Environment variable capping the replication worker count.
pub const THREADS_ENV: &str = "LOGSHARE_THREADS";

/// Exit status when the run completed but some hitting times were censored.
pub const EXIT_CENSORED: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "logshare", version, about = "Run a log-weighted sharing experiment")]
pub struct Args {
    /// Experiment config (JSON).
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory; overrides `out_dir` in the config (default `out`).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Master seed; overrides the config.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Replication count; overrides the config.
    #[arg(long)]
    pub reps: Option<u64>,
    /// Print nothing on success.
    #[arg(long)]
    pub quiet: bool,
}

fn threads_from_env() -> Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(None),
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&n| n > 0)
            .map(Some)
            .ok_or_else(|| Error::MalformedConfig(format!("{THREADS_ENV} must be a positive integer, got {v:?}"))),
    }
}

/// Reads the config, applies flag overrides and validates.
pub fn load_config(args: &Args) -> Result<ExperimentConfig> {
    let raw = std::fs::read_to_string(&args.config)
        .map_err(|e| Error::MalformedConfig(format!("cannot read {}: {e}", args.config.display())))?;
    let mut value: Value = serde_json::from_str(&raw).map_err(|e| Error::MalformedConfig(e.to_string()))?;
    if let Value::Object(map) = &mut value {
        if let Some(seed) = args.seed {
            map.insert("seed".into(), seed.into());
        }
        if let Some(reps) = args.reps {
            map.insert("replications".into(), reps.into());
        }
        if let Some(out) = &args.out {
            map.insert("out_dir".into(), out.display().to_string().into());
        }
    }
    validate_value(value)
}

fn execute(args: &Args) -> Result<i32> {
    let threads = threads_from_env()?;
    let cfg = load_config(args)?;
    let dir = PathBuf::from(cfg.out_dir.clone().unwrap_or_else(|| "out".into()));
    let output = run_experiment(&cfg, threads)?;
    let written = write_outputs(&dir, &output)?;
    if !args.quiet {
        // a closed stdout (e.g. piped into `head`) is not an error
        let mut out = std::io::stdout().lock();
        let _ = writeln!(out, "{}: {}", cfg.experiment.name(), output.report.limit);
        for c in &output.report.criteria {
            let verdict = if c.pass { "PASS" } else { "FAIL" };
            let _ = writeln!(out, "{verdict} {} = {} ({})", c.name, c.statistic, c.bound);
        }
        for n in &output.report.notes {
            let _ = writeln!(out, "note: {n}");
        }
        for p in written {
            let _ = writeln!(out, "wrote {}", p.display());
        }
    }
    Ok(if output.report.censored { EXIT_CENSORED } else { 0 })
}

/// Runs the command line and returns the process exit status: 0 success,
/// 1 config error, 2 numerical failure, 3 completed with censored results.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args = match Args::try_parse_from(args) {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&args) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
