//! `kglab` — command-line front end for the mode-equation laboratory.
//!
//! Subcommands build successively more of the pipeline:
//!
//! * `conditions` — iterated-tail table and decay-condition verdicts;
//! * `gauge`      — the Riccati gauge series with its certified bounds;
//! * `simulate`   — the frequency sweep with per-mode energy statistics;
//! * `verify`     — everything above plus the clock-change gap diagnostic,
//!   aggregated into `verdict.txt`;
//! * `report`     — `verify` plus a prose `report.txt`.
//!
//! Exit codes: 0 when every verdict passes, 2 when any verdict fails,
//! 1 on operational errors (unreadable config, bad flags, I/O).
//!
//! Parallelism of the sweep follows rayon's `RAYON_NUM_THREADS`.

mod config;
mod pipeline;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::pipeline::Subcommand as Stage;

#[derive(Parser)]
#[command(name = "kglab", version, about = "Klein-Gordon mode-equation laboratory")]
struct Cli {
    /// TOML scenario file; defaults apply when omitted.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Output directory (overrides the scenario's `output.dir`).
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Override a scenario key, e.g. `--override sweep.t_end=2e3` (repeatable).
    #[arg(long = "override", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Tabulate the iterated tails and judge the decay conditions.
    Conditions,
    /// Build the gauge series and certify its bounds.
    Gauge,
    /// Run the frequency sweep and the per-mode energy checks.
    Simulate,
    /// Run the full pipeline and aggregate every verdict.
    Verify,
    /// Verify, then write a human-readable summary.
    Report,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let stage = match cli.command {
        Command::Conditions => Stage::Conditions,
        Command::Gauge => Stage::Gauge,
        Command::Simulate => Stage::Simulate,
        Command::Verify => Stage::Verify,
        Command::Report => Stage::Report,
    };
    let scenario = match config::load_scenario(cli.config.as_deref(), &cli.overrides) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(1);
        }
    };
    let out_dir = cli.out.unwrap_or_else(|| scenario.output.dir.clone());
    match pipeline::run(stage, &scenario, &out_dir) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
