//! The `kanload` command line: synthesis, training, extraction, evaluation
//! and baseline comparison.
//!
//! Exit codes: 0 on success, 1 on runtime or numerical failure, 2 on usage
//! or input errors.

mod commands;
mod config;
mod model;

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub use commands::{
    compare, compare_table, eval, extract, extract_equations, synth, train, CompareRow, COMPARE_HEADER,
};
pub use config::RunConfig;
pub use model::{
    Equation, EquationsFile, ModelFile, TargetModel, EQUATIONS_FORMAT_VERSION,
    MODEL_FORMAT_VERSION,
};

use crate::error::{Error, Result};

#[derive(Debug, Parser)]
#[command(name = "kanload", version, about = "Symbolic static load models from disturbance data")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write train/validation/test CSVs for a ground-truth load model.
    Synth(SynthArgs),
    /// Train one network per target, optionally with Bayesian search.
    Train(TrainArgs),
    /// Extract symbolic equations from a trained model.
    Extract(ExtractArgs),
    /// Score a model or equations file on a dataset.
    Eval(EvalArgs),
    /// Compare KAN, MLP, ZIP and exponential models on one split.
    Compare(CompareArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TruthKind {
    Zip,
    Exp,
    Composite,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Ground-truth model; defaults to the config's `[truth]`, else zip.
    #[arg(long, value_enum)]
    pub truth: Option<TruthKind>,
    /// `paper-split` writes busA/busB/busC as train/validation/test; a
    /// single preset name writes one `<name>.csv`.
    #[arg(long, default_value = "paper-split")]
    pub preset: String,
    #[arg(long)]
    pub out: PathBuf,
    /// Replaces each scenario's seed with one derived from this value.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Noise standard deviation as a fraction of each channel's range.
    #[arg(long)]
    pub noise: Option<f64>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

/// Either a directory holding `train.csv`, `validation.csv` and `test.csv`,
/// or explicit files.
#[derive(Debug, Clone, Default, Args)]
pub struct DataArgs {
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub train: Option<PathBuf>,
    #[arg(long)]
    pub val: Option<PathBuf>,
    #[arg(long)]
    pub test: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Output directory for model.json, report.txt and loss curves.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value = "V,f")]
    pub inputs: String,
    #[arg(long, default_value = "P,Q")]
    pub targets: String,
    /// Hidden layer widths, e.g. `2` or `4,2`; `0` for none.
    #[arg(long)]
    pub hidden: Option<String>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Bayesian search trials per target.
    #[arg(long)]
    pub bo_budget: Option<usize>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = crate::symbolic::DEFAULT_DECIMALS)]
    pub decimals: u32,
    /// Keep powers of affine arguments unexpanded.
    #[arg(long)]
    pub no_expand: bool,
    /// R² above which an edge is always locked.
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long, required_unless_present = "equations", conflicts_with = "equations")]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub equations: Option<PathBuf>,
    /// A CSV file, or a directory whose `test.csv` is used.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, default_value_t = 12)]
    pub bo_budget: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "V,f")]
    pub inputs: String,
    /// Mantissa decimals of the table entries and equation rounding.
    #[arg(long, default_value_t = crate::symbolic::DEFAULT_DECIMALS)]
    pub decimals: u32,
    /// Optional directory for comparison.tsv, equations and the report.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

/// Runs a parsed command, writing its console output to `stdout`.
pub fn run(cli: Cli, stdout: &mut dyn Write) -> Result<()> {
    match cli.command {
        Command::Synth(a) => synth(&a, stdout),
        Command::Train(a) => train(&a, stdout),
        Command::Extract(a) => extract(&a, stdout),
        Command::Eval(a) => eval(&a, stdout),
        Command::Compare(a) => compare(&a, stdout),
    }
}

/// Exit code for a failed command.
pub fn exit_code(err: &Error) -> i32 {
    if err.is_input_error() {
        2
    } else {
        1
    }
}
