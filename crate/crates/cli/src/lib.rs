//! Command-line driver for the cavity Bell-state simulator.
//!
//! Exit codes: 0 success, 1 configuration or usage error, 2 numerical failure.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

pub mod commands;
pub mod config;
pub mod output;

pub use config::{parse_config, Format, RunConfig};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("config: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(cavity_bell::Error),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

impl From<cavity_bell::Error> for CliError {
    fn from(e: cavity_bell::Error) -> Self {
        match e {
            cavity_bell::Error::InvalidParameter { .. } => CliError::Usage(e.to_string()),
            other => CliError::Numerical(other),
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Config(_) | CliError::Io(_) => 1,
            CliError::Numerical(_) => 2,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "cavity-bell", version, about = "Two-cavity Bell-state preparation with a single three-level atom")]
pub struct Cli {
    /// Flat key = value configuration file.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Write the result here instead of stdout.
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Monte Carlo seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Average by Monte Carlo with this many samples instead of quadrature.
    #[arg(long, global = true, value_name = "N")]
    pub mc_samples: Option<usize>,
    /// Gauss-Hermite nodes per axis.
    #[arg(long, global = true, value_name = "N")]
    pub nodes: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the protocol once and report probabilities and fidelities.
    Simulate,
    /// Fidelity and success probability over a uniform γ grid.
    SweepGamma {
        min: f64,
        max: f64,
        steps: usize,
    },
    /// Probe-atom scan of a heralded field state against its dephased mixture.
    Probe(ProbeArgs),
    /// Compare the flight time with the cavity damping and atomic lifetimes.
    Feasibility(FeasibilityArgs),
    /// Run the built-in cross-checks.
    Validate {
        #[arg(long, hide = true, default_value_t = 1.0)]
        tolerance_scale: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Outcome {
    L0,
    L2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProbeMode {
    /// The probe crosses cavity 1 only.
    Cavity1,
    /// The probe crosses cavity 1 and then cavity 2.
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FieldSource {
    /// The ideal Bell target.
    Bell,
    /// The jitter-averaged heralded state from a protocol run.
    Protocol,
}

#[derive(Debug, Args)]
pub struct ProbeArgs {
    #[arg(long, value_enum, default_value = "l2")]
    pub outcome: Outcome,
    #[arg(long, value_enum, default_value = "both")]
    pub mode: ProbeMode,
    #[arg(long, value_enum, default_value = "bell")]
    pub state: FieldSource,
    /// Probe coupling in rad/s; defaults to the configured g1.
    #[arg(long)]
    pub g_probe: Option<f64>,
    /// Comma-separated interaction times in seconds.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub times: Vec<f64>,
    /// Uniform scan from 0 to this time, with --t-steps points.
    #[arg(long, requires = "t_steps", conflicts_with = "times")]
    pub t_max: Option<f64>,
    #[arg(long, requires = "t_max")]
    pub t_steps: Option<usize>,
}

#[derive(Debug, Args)]
pub struct FeasibilityArgs {
    /// Photon number stored in each cavity.
    #[arg(long)]
    pub p: u32,
    /// Cavity quality factor.
    #[arg(long)]
    pub q: Option<f64>,
    /// Cavity frequency.
    #[arg(long)]
    pub omega: Option<f64>,
    /// Treat --omega as a cycle frequency and use 2π·omega.
    #[arg(long)]
    pub omega_cycles: bool,
    /// Apparatus length, m.
    #[arg(long)]
    pub length: Option<f64>,
    /// Atom velocity, m/s.
    #[arg(long)]
    pub velocity: Option<f64>,
    /// Atomic lifetime, s.
    #[arg(long)]
    pub tau_atom: Option<f64>,
}

/// Parses `args`, runs the command and writes the result; returns the exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
                    let _ = write!(stdout, "{}", e.render());
                    0
                }
                _ => {
                    let _ = write!(stderr, "{}", e.render());
                    1
                }
            };
            return code;
        }
    };
    match commands::execute(&cli) {
        Ok(outcome) => {
            let written = match &cli.out {
                Some(path) => std::fs::write(path, &outcome.body),
                None => stdout.write_all(outcome.body.as_bytes()),
            };
            if let Err(e) = written {
                let _ = writeln!(stderr, "error: {}", CliError::Io(e));
                return 1;
            }
            if outcome.failed {
                let _ = writeln!(stderr, "error: validation failed");
                return 2;
            }
            0
        }
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}
