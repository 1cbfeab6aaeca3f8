//! `nonlocal`: simulate nonlocal diffusion and run the verification suites.
//!
//! Exit codes: 0 all checks pass, 1 a check fails, 2 configuration error,
//! 3 internal error.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{Format, RunConfig};
use error::CliError;

#[derive(Parser)]
#[command(
    name = "nonlocal",
    version,
    about = "Nonlocal diffusion solver and verification suites"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides `output.directory`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Artifact formats; overrides `output.formats`.
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Worker threads for the parallel parts.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// RNG seed; overrides `seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Evolve the configured initial datum and write the trajectory.
    Simulate,
    /// Check the barrier residual on a (t, x) grid.
    VerifySubsolution,
    /// Check the lower bound on x·u(t, x) far to the right.
    VerifyFlattening,
    /// Check the half-line bound and the mirror identity.
    VerifyProposition,
    /// Compare against the closed-form fractional heat solution under refinement.
    ReferenceCompare,
    /// Time the direct and FFT operator applications.
    Bench,
}

fn execute(cli: &Cli) -> Result<bool, CliError> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| CliError::Config("--config is required".into()))?;
    if let Some(threads) = cli.threads {
        if threads == 0 {
            return Err(CliError::Config("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| CliError::Internal(format!("thread pool: {e}")))?;
    }
    let mut config = RunConfig::load(path)?;
    if let Some(out) = &cli.out {
        config.output.directory = out.clone();
    }
    if let Some(format) = cli.format {
        config.output.formats = format;
    }
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    let setup = config.validate()?;
    let out = setup.config.output.directory.clone();
    let format = setup.config.output.formats;
    std::fs::create_dir_all(&out)
        .map_err(|e| CliError::Internal(format!("cannot create {}: {e}", out.display())))?;
    match cli.command {
        Command::Simulate => commands::simulate(&setup, &out, format),
        Command::VerifySubsolution => commands::verify_subsolution(&setup, &out, format),
        Command::VerifyFlattening => commands::verify_flattening(&setup, &out),
        Command::VerifyProposition => commands::verify_proposition(&setup, &out),
        Command::ReferenceCompare => commands::reference_compare(&setup, &out, format),
        Command::Bench => commands::bench(&setup, &out, format, setup.config.seed),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("nonlocal: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
