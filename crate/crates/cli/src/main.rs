//! `pproj`: certify, simulate and synthesize projection-controlled LTI
//! systems from JSON configs.
//!
//! Exit codes: 0 pass, 1 analytic failure, 2 input error, 3 inconclusive.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "pproj",
    version,
    about = "Contraction certificates and simulations for projection-based controllers"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Maximize the certified contraction rate of (A, B, K).
    Certify {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Simulate the closed loop from a batch of initial states and run the checks.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Solve the LQR Riccati equation and write the gain.
    Lqr {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Re-check and tabulate saved run directories.
    Report {
        #[arg(required = true)]
        dirs: Vec<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let start = Instant::now();
    let result = match &cli.command {
        Command::Certify { config, out } => commands::certify(config, out),
        Command::Simulate { config, out } => commands::simulate(config, out),
        Command::Lqr { config, out } => commands::lqr(config, out),
        Command::Report { dirs } => commands::report(dirs),
    };
    match result {
        Ok(verdict) => {
            eprintln!("elapsed {:.3} s", start.elapsed().as_secs_f64());
            ExitCode::from(verdict.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
