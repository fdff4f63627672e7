//! Command-line front end for the representer solvers.
//!
//! Every subcommand reads its parameters from a TOML config, writes a JSON
//! result document (stdout or `--output`), and exits 0 on success, 2 on
//! validation failure, and 3 on numeric failure. Identical config and seed
//! produce byte-identical documents.

mod commands;
mod config;
mod error;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::commands::Overrides;
use crate::config::LoadedConfig;
use crate::error::CliResult;
use crate::io::Document;

#[derive(Parser)]
#[command(
    name = "representer",
    version,
    about = "Dual-space solvers for norm-regularized reconstruction",
    propagate_version = true
)]
struct Cli {
    /// TOML configuration file; each subcommand reads its own section.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Write the JSON result document here instead of stdout.
    #[arg(long, global = true)]
    output: Option<PathBuf>,

    /// Seed for commands that synthesize data (overrides the config).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Residual tolerance for post-solve verification.
    #[arg(long, global = true)]
    tolerance: Option<f64>,

    /// Print progress notes to stderr.
    #[arg(long, global = true)]
    verbose: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Apply the norm duality map to a vector and verify the pair.
    Conjugate,
    /// Solve the symmetric ridge system (H + lambda I) a = y.
    Tikhonov,
    /// Kernel ridge fit over a positive-definite kernel family.
    RkhsFit,
    /// Sparse p-norm regression with a dual certificate.
    LpSolve,
    /// Recover point masses from low-pass measurements.
    Spikes,
    /// Sparse kernel-translate fit for an operator-defined kernel.
    GtvFit,
    /// Run the built-in verification criteria and report pass/fail.
    Selftest {
        /// Run a single criterion, 1 through 8, instead of the full suite.
        #[arg(long)]
        criterion: Option<usize>,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Conjugate => "conjugate",
            Command::Tikhonov => "tikhonov",
            Command::RkhsFit => "rkhs-fit",
            Command::LpSolve => "lp-solve",
            Command::Spikes => "spikes",
            Command::GtvFit => "gtv-fit",
            Command::Selftest { .. } => "selftest",
        }
    }
}

fn load_config(cli: &Cli) -> CliResult<LoadedConfig> {
    match &cli.config {
        Some(path) => LoadedConfig::load(path),
        None => match cli.command {
            // The selftest carries its own inputs; everything else needs a
            // config file.
            Command::Selftest { .. } => Ok(LoadedConfig::empty()),
            _ => Err(error::CliError::validation(
                "",
                "--config",
                "this command requires --config <path>",
            )),
        },
    }
}

fn execute(cli: &Cli) -> CliResult<(Document, i32)> {
    let cfg = load_config(cli)?;
    let overrides = Overrides {
        seed: cli.seed,
        tolerance: cli.tolerance,
        verbose: cli.verbose,
    };
    match &cli.command {
        Command::Conjugate => commands::conjugate(&cfg, &overrides),
        Command::Tikhonov => commands::tikhonov(&cfg, &overrides),
        Command::RkhsFit => commands::rkhs_fit(&cfg, &overrides),
        Command::LpSolve => commands::lp_solve(&cfg, &overrides),
        Command::Spikes => commands::spikes(&cfg, &overrides),
        Command::GtvFit => commands::gtv_fit(&cfg, &overrides),
        Command::Selftest { criterion } => commands::selftest(&cfg, &overrides, *criterion),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let command = cli.command.name();
    match execute(&cli) {
        Ok((doc, code)) => match io::write_document(&doc, cli.output.as_deref()) {
            Ok(()) => ExitCode::from(code as u8),
            Err(e) => {
                io::write_diagnostic(command, &e, None);
                ExitCode::from(e.exit_code() as u8)
            }
        },
        Err(e) => {
            io::write_diagnostic(command, &e, cli.output.as_deref());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
