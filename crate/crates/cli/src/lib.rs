//! Command line front end: scenario files in, CSV tables and SVG plots out.

pub mod config;
pub mod output;
pub mod run;
pub mod verify;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid scenario: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error(transparent)]
    Model(#[from] lrlattice::Error),
    #[error("verification failed: {0}")]
    Verification(String),
}

impl CliError {
    /// 1 for validation problems, 2 for numerical non-convergence or failed checks.
    pub fn exit_code(&self) -> i32 {
        use lrlattice::Error as E;
        match self {
            CliError::Config(_) | CliError::Io(_) => 1,
            CliError::Verification(_) => 2,
            CliError::Model(e) => match e {
                E::Unconverged { .. } | E::Divergence { .. } | E::Eigen(_) => 2,
                _ => 1,
            },
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "lrlattice",
    version,
    about = "Lieb-Robinson bounds for harmonic and anharmonic lattices"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Scenario file (TOML)
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
    /// Seed for randomized suites; overrides the scenario's `seed`
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (default: all cores)
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Fourier kernels H0, H1, H-1 on the torus
    Kernels,
    /// Evolved Weyl function f_t
    Evolve,
    /// Exact commutator norms with theorem and corollary bounds
    Commutator,
    /// Threshold fronts and fitted propagation velocity
    Lightcone,
    /// General interaction bounds on the torus metric
    Genbound,
    /// Anharmonic commutator bounds
    Anharm,
    /// Truncated Fock space dynamics on a small chain or ring
    Focksim,
    /// Ground-state correlations and the clustering length
    Clustering,
    /// Randomized invariant battery
    Verify,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Kernels => "kernels",
            Command::Evolve => "evolve",
            Command::Commutator => "commutator",
            Command::Lightcone => "lightcone",
            Command::Genbound => "genbound",
            Command::Anharm => "anharm",
            Command::Focksim => "focksim",
            Command::Clustering => "clustering",
            Command::Verify => "verify",
        }
    }
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
        }
    };
    match run::execute(&cli) {
        Ok(summary) => {
            for line in summary {
                println!("{line}");
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
