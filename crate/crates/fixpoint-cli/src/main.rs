//! Experiment harness: runs configs, emits reports, and executes the
//! built-in verification suite.
//!
//! Exit codes: 0 success, 1 I/O or internal fault, 2 malformed config,
//! 3 inadmissible schedule or analysis precondition, 4 bound violation.

mod bundle;
mod config;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::config::ExperimentConfig;
use crate::report::ReportFormat;

pub const OUTPUT_ROOT_ENV: &str = "FIXPOINT_OUTPUT_ROOT";

#[derive(Debug)]
pub enum CliError {
    /// Unreadable or schema-invalid input (exit 2).
    Malformed(String),
    /// Admissibility precondition failed before or during a run (exit 3).
    Inadmissible(String),
    /// A theoretical bound was violated by the measured data (exit 4).
    BoundViolation(String),
    /// Everything else: I/O, serialization, numerics (exit 1).
    Other(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Other(_) => 1,
            CliError::Malformed(_) => 2,
            CliError::Inadmissible(_) => 3,
            CliError::BoundViolation(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Malformed(m)
            | CliError::Inadmissible(m)
            | CliError::BoundViolation(m)
            | CliError::Other(m) => m,
        }
    }
}

#[derive(Parser)]
#[command(name = "fixpoint", about = "Fixed-point iteration experiment harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment config and write its result bundle.
    Run {
        /// Path to a TOML experiment config.
        config: PathBuf,
        /// Overrides the seed in the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Output root; defaults to $FIXPOINT_OUTPUT_ROOT, then the
        /// current directory.
        #[arg(long)]
        output_root: Option<PathBuf>,
    },
    /// Generate a report from a bundle directory produced by `run`.
    Report {
        /// Bundle directory.
        bundle: PathBuf,
        /// One of: csv, json, svg.
        #[arg(long)]
        format: String,
    },
    /// Run the built-in verification suite and print a pass/fail table.
    Verify,
}

fn output_root(flag: Option<PathBuf>) -> PathBuf {
    flag.or_else(|| std::env::var_os(OUTPUT_ROOT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."))
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Run {
            config,
            seed,
            output_root: root,
        } => {
            let cfg = ExperimentConfig::load(&config)?;
            let dir = bundle::run_config(&cfg, &output_root(root), seed)?;
            println!("bundle written to {}", dir.display());
            Ok(())
        }
        Command::Report { bundle, format } => {
            let format = ReportFormat::parse(&format)
                .ok_or_else(|| CliError::Malformed(format!("unknown format '{format}'")))?;
            for path in report::emit_report(&bundle, format)? {
                println!("{}", path.display());
            }
            Ok(())
        }
        Command::Verify => {
            let outcomes = fixpoint::verify::run_all();
            for o in &outcomes {
                println!("{}", o.line());
            }
            let failed = outcomes.iter().filter(|o| !o.passed).count();
            if failed == 0 {
                println!("all {} criteria passed", outcomes.len());
                Ok(())
            } else {
                Err(CliError::BoundViolation(format!(
                    "{failed} of {} criteria failed",
                    outcomes.len()
                )))
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.exit_code())
        }
    }
}
