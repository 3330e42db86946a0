//! Command-line front end for `jetvar-core`.
//!
//! [`run`] is the whole program; `main` only wires it to the process streams so that tests can
//! drive every subcommand in-process.

pub mod commands;
pub mod config;
pub mod csv;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("cannot access {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Core(#[from] jetvar_core::Error),

    #[error("tolerance failure: {0}")]
    Tolerance(String),
}

impl CliError {
    /// 1 for numerical or verification failures, 2 for anything the user must fix in the input.
    pub fn exit_code(&self) -> i32 {
        use jetvar_core::Error as E;
        match self {
            CliError::Config(_) | CliError::Io { .. } => 2,
            CliError::Tolerance(_) => 1,
            CliError::Core(e) => match e {
                E::Parse { .. }
                | E::InvalidArgument(_)
                | E::DegenerateLagrangian { .. }
                | E::ShapeMismatch { .. }
                | E::OrderOverflow { .. } => 2,
                _ => 1,
            },
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "jetvar", version, about = "Higher-order variational calculus on jets")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the identity suite and print a pass/fail table.
    Verify {
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 3)]
        max_k: usize,
    },
    /// Sample the force along a curve and write CSV.
    Force {
        #[arg(long)]
        config: PathBuf,
    },
    /// Sample the momentum along a curve and write CSV.
    Momentum {
        #[arg(long)]
        config: PathBuf,
    },
    /// Print both sides of the first-variation formula.
    Vary {
        #[arg(long)]
        config: PathBuf,
    },
    /// Integrate the Euler-Lagrange equation from the curve's jet at t0.
    Integrate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Solve a two-point boundary problem by shooting.
    Bvp {
        #[arg(long)]
        config: PathBuf,
    },
    /// Solve for a Riemannian cubic with clamped boundary data.
    Cubic {
        #[arg(long)]
        config: PathBuf,
    },
}

/// Parse `args` (including the program name), run the subcommand and return the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let text = e.render().to_string();
            let _ = if code == 0 {
                write!(out, "{text}")
            } else {
                write!(err, "{text}")
            };
            return code;
        }
    };
    match commands::dispatch(&cli.command, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "jetvar: {e}");
            e.exit_code()
        }
    }
}
