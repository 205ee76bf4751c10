//! Command-line front end: argument grammar, output formats, and the
//! rayon-backed executor. The binary in `main.rs` is a thin shell over
//! [`run`]; integration tests drive the same entry points.

pub mod commands;
pub mod formats;
pub mod runner;
pub mod spec;

use clap::Parser;
use serde::{Deserialize, Serialize};

/// Exit status conventions: 0 ok, 1 computation failure, 2 usage error.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Failure(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Failure(_) => 1,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Usage(m) => m,
            CliError::Failure(m) => m,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn failure(msg: impl Into<String>) -> CliError {
    CliError::Failure(msg.into())
}

/// Common run controls shared by every subcommand. The resolved values are
/// embedded in the emitted config so any output can be reproduced.
#[derive(Debug, Clone, Parser, Serialize, Deserialize)]
pub struct RunOpts {
    /// Master seed for all random streams.
    #[arg(long, default_value_t = 1234)]
    pub seed: u64,
    /// Output directory (defaults to $L1PHASE_OUT_DIR, then ".").
    #[arg(long)]
    pub out: Option<String>,
    /// Basename prefix for emitted files (defaults to the command name).
    #[arg(long)]
    pub name: Option<String>,
    /// Worker threads; 0 means all cores. Results are identical for any
    /// worker count.
    #[arg(long, default_value_t = 0)]
    pub workers: usize,
    /// Stdout format: human-readable text or the result JSON.
    #[arg(long, default_value = "text")]
    pub format: String,
}

impl RunOpts {
    pub fn out_dir(&self) -> String {
        self.out
            .clone()
            .or_else(|| std::env::var("L1PHASE_OUT_DIR").ok())
            .unwrap_or_else(|| ".".to_string())
    }
}

#[derive(Debug, Clone, Parser, Serialize, Deserialize)]
pub struct ThresholdArgs {
    /// Density of non-zero coefficients, in (0, 1).
    #[arg(long)]
    pub rho: f64,
    /// Correlation parameter of the tridiagonal column correlation, |r| <= 1/2.
    #[arg(long)]
    pub r: f64,
    #[arg(long, default_value_t = 100_000)]
    pub n_chain: usize,
    #[arg(long, default_value_t = 50)]
    pub samples: usize,
    #[arg(long, default_value_t = 0.02)]
    pub alpha_lo: f64,
    #[arg(long, default_value_t = 0.999)]
    pub alpha_hi: f64,
    #[arg(long, default_value_t = 0.0015)]
    pub tol_alpha: f64,
    #[arg(long, default_value_t = 0.5)]
    pub damping: f64,
    #[command(flatten)]
    #[serde(flatten)]
    pub run: RunOpts,
}

#[derive(Debug, Clone, Parser, Serialize, Deserialize)]
pub struct SweepArgs {
    /// Fixed density when sweeping over r.
    #[arg(long)]
    pub rho: Option<f64>,
    /// Fixed correlation when sweeping over rho.
    #[arg(long)]
    pub r: Option<f64>,
    /// Density grid `lo:hi:step`.
    #[arg(long)]
    pub rho_grid: Option<String>,
    /// Correlation grid `lo:hi:step`.
    #[arg(long)]
    pub r_grid: Option<String>,
    #[arg(long, default_value_t = 100_000)]
    pub n_chain: usize,
    #[arg(long, default_value_t = 50)]
    pub samples: usize,
    #[arg(long, default_value_t = 0.02)]
    pub alpha_lo: f64,
    #[arg(long, default_value_t = 0.999)]
    pub alpha_hi: f64,
    #[arg(long, default_value_t = 0.0015)]
    pub tol_alpha: f64,
    #[command(flatten)]
    #[serde(flatten)]
    pub run: RunOpts,
}

#[derive(Debug, Clone, Parser, Serialize, Deserialize)]
pub struct ExperimentArgs {
    #[arg(long, default_value_t = 0.5)]
    pub rho: f64,
    #[arg(long, default_value_t = 0.5)]
    pub r: f64,
    /// Observation-side correlation: `identity`, `tridiag:<r>`, `file:<path>`.
    #[arg(long, default_value = "identity")]
    pub rr: String,
    /// Comma-separated signal dimensions.
    #[arg(long, default_value = "100,200,400,800")]
    pub n_list: String,
    #[arg(long, default_value_t = 500)]
    pub trials: usize,
    /// Alpha grid `lo:hi:step`; `auto` centers a 9-point grid on the
    /// replica prediction for (rho, r).
    #[arg(long, default_value = "auto")]
    pub alpha_grid: String,
    #[command(flatten)]
    #[serde(flatten)]
    pub run: RunOpts,
}

#[derive(Debug, Clone, Parser, Serialize, Deserialize)]
pub struct InstanceArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub alpha: f64,
    #[arg(long)]
    pub rho: f64,
    /// Column correlation: `identity`, `tridiag:<r>`, `file:<path>`.
    #[arg(long, default_value = "identity")]
    pub rt: String,
    /// Row correlation: `identity`, `tridiag:<r>`, `file:<path>`.
    #[arg(long, default_value = "identity")]
    pub rr: String,
    #[command(flatten)]
    #[serde(flatten)]
    pub run: RunOpts,
}

#[derive(Debug, Clone, Parser, Serialize, Deserialize)]
pub struct RecoverArgs {
    /// Load a serialized instance by stem (as written by `instance`).
    #[arg(long)]
    pub instance: Option<String>,
    /// Or generate one on the fly:
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub rho: Option<f64>,
    #[arg(long, default_value = "identity")]
    pub rt: String,
    #[arg(long, default_value = "identity")]
    pub rr: String,
    #[arg(long, default_value_t = 50_000)]
    pub max_iters: usize,
    #[command(flatten)]
    #[serde(flatten)]
    pub run: RunOpts,
}

#[derive(Debug, Clone, Parser, Serialize, Deserialize)]
pub struct RrCheckArgs {
    #[arg(long, default_value_t = 400)]
    pub n: usize,
    #[arg(long, default_value_t = 0.5)]
    pub rho: f64,
    #[arg(long, default_value_t = 0.5)]
    pub r: f64,
    #[arg(long, default_value_t = 0.85)]
    pub alpha: f64,
    #[arg(long, default_value_t = 200)]
    pub trials: usize,
    /// Observation-side correlations to compare (repeatable).
    #[arg(long = "rr", required = true)]
    pub rr_list: Vec<String>,
    #[command(flatten)]
    #[serde(flatten)]
    pub run: RunOpts,
}

/// The full command grammar. Serialized form doubles as the re-runnable
/// config file.
#[derive(Debug, Clone, Parser, Serialize, Deserialize)]
#[command(
    name = "l1phase",
    about = "Phase-transition analysis of L1 reconstruction under correlated compression matrices",
    version
)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Command {
    /// Locate the reconstruction threshold alpha_c(rho, r).
    Threshold(ThresholdArgs),
    /// Threshold curves over a rho- or r-grid.
    Sweep(SweepArgs),
    /// Empirical transition study with finite-size extrapolation.
    Experiment(ExperimentArgs),
    /// Generate and serialize a problem instance.
    Instance(InstanceArgs),
    /// Run basis pursuit on a generated or serialized instance.
    Recover(RecoverArgs),
    /// Compare success fractions across observation-side correlations.
    RrCheck(RrCheckArgs),
}

/// Wrapper for `--config` re-runs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConfigFile {
    pub schema: String,
    #[serde(flatten)]
    pub command: Command,
}

pub const CONFIG_SCHEMA: &str = "l1phase.config.v1";

impl ConfigFile {
    pub fn new(command: Command) -> Self {
        ConfigFile {
            schema: CONFIG_SCHEMA.to_string(),
            command,
        }
    }
}

/// Executes one command; all file writing happens here.
pub fn run(command: Command) -> CliResult<()> {
    match command {
        Command::Threshold(args) => commands::threshold(&args),
        Command::Sweep(args) => commands::sweep(&args),
        Command::Experiment(args) => commands::experiment(&args),
        Command::Instance(args) => commands::instance(&args),
        Command::Recover(args) => commands::recover(&args),
        Command::RrCheck(args) => commands::rr_check(&args),
    }
}
