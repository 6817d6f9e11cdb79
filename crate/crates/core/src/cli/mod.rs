//! The `hyptest` command line.
//!
//! Every subcommand takes the same configuration (see [`config`]) and writes
//! its outputs under `--out` (default: the current directory for `region`
//! and `figures`; stdout only for the others unless `--out` is given).
//!
//! Exit codes: `0` success, `1` I/O failure, `2` configuration error,
//! `3` enumeration guard exceeded, `4` numerical failure.

pub mod commands;
pub mod config;
pub mod output;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::error::Error;
use config::{ConfigArgs, Validated};
use output::Outputs;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Lib(#[from] Error),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io(_) => 1,
            CliError::Config(_) => 2,
            CliError::Lib(e) => match e {
                Error::GuardExceeded { .. } => 3,
                Error::StreamExhausted { .. }
                | Error::ZeroProbability { .. }
                | Error::Unresolvable(_)
                | Error::Numerical(_) => 4,
                Error::InvalidPmf(_)
                | Error::AlphabetMismatch { .. }
                | Error::SymbolOutOfRange { .. }
                | Error::ConflictingInfinities
                | Error::DisjointSupport
                | Error::InfiniteDivergence
                | Error::DegeneratePair(_)
                | Error::InvalidParameter { .. } => 2,
            },
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "hyptest", version, about = "Error exponents of fixed-length, sequential and two-phase hypothesis tests")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Region boundaries (fixed-length curve, sequential corner, R_γ, two-phase) and a summary.
    Region(ConfigArgs),
    /// Two-phase thresholds for each γ.
    Design(ConfigArgs),
    /// Exact error, rejection and continuation probabilities by type enumeration.
    Exact(ConfigArgs),
    /// Monte Carlo estimates, compared against exact values when enumerable.
    Simulate(ConfigArgs),
    /// Monte Carlo and exact estimates across `n_values`, with fitted exponents.
    Sweep(ConfigArgs),
    /// CSV data behind the three figures (Bernoulli 0.9 / 0.2 by default).
    Figures(ConfigArgs),
}

fn execute(command: &Command) -> Result<(Outputs, Option<PathBuf>), CliError> {
    let (args, default_out) = match command {
        Command::Region(a) | Command::Figures(a) => (a, Some(PathBuf::from("."))),
        Command::Design(a) | Command::Exact(a) | Command::Simulate(a) | Command::Sweep(a) => (a, None),
    };
    let default_pair = matches!(command, Command::Figures(_)).then(commands::figures_default_pair);
    let validated = Validated::new(args.load()?, default_pair)?;
    let out = match command {
        Command::Region(_) => commands::region(&validated)?,
        Command::Design(_) => commands::design(&validated)?,
        Command::Exact(_) => commands::exact(&validated)?,
        Command::Simulate(_) => commands::simulate_cmd(&validated)?,
        Command::Sweep(_) => commands::sweep_cmd(&validated)?,
        Command::Figures(_) => commands::figures(&validated)?,
    };
    let dir = validated.out_dir().map(PathBuf::from).or(default_out);
    Ok((out, dir))
}

/// Parses `args` (including the program name), runs the command and
/// returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(&cli.command).and_then(|(out, dir)| {
        for w in &out.warnings {
            eprintln!("warning: {w}");
        }
        if let Some(dir) = dir {
            out.write_to(&dir)?;
        }
        std::io::stdout()
            .write_all(out.stdout.as_bytes())
            .map_err(|e| CliError::Io(e.to_string()))
    }) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
