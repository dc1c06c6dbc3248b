// `!(x > 0.0)`-style guards deliberately reject NaN along with the
// out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

//! Batch CLI wiring the measurement pipeline:
//! simulate -> calibrate -> extract -> measure -> reconstruct -> invert ->
//! report, with deterministic file-based interfaces.

mod commands;
mod error;
mod runconfig;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use error::CliError;

#[derive(Parser)]
#[command(name = "evshock", version, about = "Shock-wave motion-field measurement from event-camera streams")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic event streams with ground truth.
    Simulate(commands::simulate::Args),
    /// Detect LED markers and calibrate a camera from marker files.
    Calibrate(commands::calibrate::Args),
    /// Extract per-angle shock-front events from a stream.
    Extract(commands::extract::Args),
    /// Convert extracted fronts to physical radii and fit radius-time models.
    Measure(commands::measure::Args),
    /// Reconstruct 3D front points from fitted models.
    Reconstruct(commands::reconstruct::Args),
    /// Invert the TNT charge equivalence from radius/velocity data.
    Invert(commands::invert::Args),
    /// Emit plot series, figures and the charge report.
    Report(commands::report::Args),
}

/// Shared options for commands that read the parameter ledger.
#[derive(clap::Args, Clone)]
struct ConfigOpts {
    /// Parameter ledger (TOML). Defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Print the fully resolved parameter ledger and exit.
    #[arg(long)]
    dump_config: bool,
}

impl ConfigOpts {
    fn load(&self) -> Result<Option<runconfig::RunConfig>, CliError> {
        let config = runconfig::RunConfig::load(self.config.as_deref())?;
        if self.dump_config {
            print!("{}", config.to_toml());
            return Ok(None);
        }
        Ok(Some(config))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(args) => commands::simulate::run(args),
        Command::Calibrate(args) => commands::calibrate::run(args),
        Command::Extract(args) => commands::extract::run(args),
        Command::Measure(args) => commands::measure::run(args),
        Command::Reconstruct(args) => commands::reconstruct::run(args),
        Command::Invert(args) => commands::invert::run(args),
        Command::Report(args) => commands::report::run(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.render());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
