//! Configuration, subcommand dispatch and file outputs for the `qvi` binary.
//!
//! Data files are deterministic: object keys are sorted, floats use the
//! shortest decimal that round-trips, and run metadata such as timing lives
//! in `meta.json` only.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;
pub mod table;

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use serde_json::json;

pub use config::{parse_config, RunConfig};
pub use error::{CliError, Result};
pub use table::SolutionTable;

#[derive(Debug, Parser)]
#[command(name = "qvi", version, about = "Optimal regime switching in AK growth economies")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Run configuration (JSON)
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory [default: output.directory from the config, else ./out]
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check the configuration and the model's standing assumptions
    Validate(Common),
    /// Closed-form thresholds, values and regions
    Analytic(Common),
    /// Solve the HJB-QVI system on the configured grid
    Solve(Common),
    /// Simulate the economy under a feedback policy
    Simulate(Common),
    /// Compare the grid solution with the closed form
    Compare(Common),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Validate(_) => "validate",
            Command::Analytic(_) => "analytic",
            Command::Solve(_) => "solve",
            Command::Simulate(_) => "simulate",
            Command::Compare(_) => "compare",
        }
    }

    fn common(&self) -> &Common {
        match self {
            Command::Validate(c)
            | Command::Analytic(c)
            | Command::Solve(c)
            | Command::Simulate(c)
            | Command::Compare(c) => c,
        }
    }
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = fs::read_to_string(path).map_err(|source| CliError::Read { path: path.to_path_buf(), source })?;
    parse_config(&text)
}

/// Runs one subcommand and returns the process exit status.
pub fn run(cli: &Cli) -> i32 {
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn execute(cli: &Cli) -> Result<()> {
    let common = cli.command.common();
    let cfg = load_config(&common.config)?;
    if let Command::Validate(_) = cli.command {
        return commands::validate(&cfg).map(|_| ());
    }
    let dir = common
        .out_dir
        .clone()
        .or_else(|| cfg.output.directory.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("./out"));
    let mut out = output::OutDir::create(&dir, &cfg.output.formats)?;
    let started = Instant::now();
    let result = match &cli.command {
        Command::Validate(_) => unreachable!("handled above"),
        Command::Analytic(_) => commands::analytic(&cfg, &mut out),
        Command::Solve(_) => commands::solve(&cfg, &mut out),
        Command::Simulate(_) => commands::simulate_cmd(&cfg, &mut out),
        Command::Compare(_) => commands::compare(&cfg, &mut out),
    };
    let unix = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
    let meta = json!({
        "tool": "qvi",
        "version": env!("CARGO_PKG_VERSION"),
        "subcommand": cli.command.name(),
        "config": common.config.display().to_string(),
        "finished_unix": unix,
        "elapsed_seconds": started.elapsed().as_secs_f64(),
        "outputs": out.written(),
        "exit_code": result.as_ref().map_or_else(CliError::exit_code, |_| 0),
        "error": result.as_ref().err().map(|e| e.to_string()),
        "result": result.as_ref().ok(),
    });
    out.meta(&meta)?;
    result.map(|_| ())
}
