// Negated comparisons reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod convergence;
mod estimate;
mod geo;
mod output;
mod streams;
mod synth;

/// Black-box leakage estimation from (secret, observation) samples.
#[derive(Parser, Debug)]
#[command(name = "leakest", version)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Master seed; every random choice derives from it through a named sub-stream.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Directory for traces, channels, datasets and summary.json.
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    /// Only log errors.
    #[arg(long, short, global = true)]
    pub quiet: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Estimate the Bayes risk and leakage of sampled data.
    Estimate(estimate::EstimateArgs),
    /// Generate a synthetic system, report its exact leakage, optionally sample it.
    Synth(synth::SynthArgs),
    /// Build a location-privacy mechanism over the Gowalla-style grid.
    Geo(geo::GeoArgs),
    /// Report when estimate traces converge to a known Bayes risk.
    Convergence(convergence::ConvergenceArgs),
}

/// An invalid combination of flags or parameter values (exit code 2).
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

pub fn config_error(msg: impl Into<String>) -> anyhow::Error {
    ConfigError(msg.into()).into()
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<ConfigError>() {
            return 2;
        }
        if let Some(leakest::Error::InvalidArgument(_)) = cause.downcast_ref::<leakest::Error>() {
            return 2;
        }
    }
    1
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.common.quiet { "error" } else { "info" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    let result = match &cli.command {
        Command::Estimate(a) => estimate::run(a, &cli.common),
        Command::Synth(a) => synth::run(a, &cli.common),
        Command::Geo(a) => geo::run(a, &cli.common),
        Command::Convergence(a) => convergence::run(a, &cli.common),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
