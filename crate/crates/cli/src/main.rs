//! `xstrat`: split extreme multi-label datasets and evaluate splits.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use xstrat::sampler::{
    DEFAULT_DECAY, DEFAULT_EPOCHS, DEFAULT_SWAP_PROBABILITY, DEFAULT_THRESHOLD_PROPORTION,
};

#[derive(Debug, Parser)]
#[command(name = "xstrat", version, about = "Stratified train/test splits for extreme multi-label data")]
pub struct Cli {
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true, env = "XSTRAT_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Partition a dataset and write the split.
    Split(SplitArgs),
    /// Report metrics for an existing split.
    Evaluate(EvaluateArgs),
    /// Run several methods on one dataset and print one CSV row per method.
    Compare(CompareArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Stratified,
    Random,
    Iterative,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Stratified => "stratified",
            Method::Random => "random",
            Method::Iterative => "iterative",
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct SamplerArgs {
    /// Target fraction of points in the test set.
    #[arg(long)]
    test_size: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_EPOCHS)]
    epochs: usize,
    #[arg(long, default_value_t = DEFAULT_THRESHOLD_PROPORTION)]
    threshold_proportion: f64,
    #[arg(long, default_value_t = DEFAULT_SWAP_PROBABILITY)]
    swap_probability: f64,
    #[arg(long, default_value_t = DEFAULT_DECAY)]
    decay: f64,
    /// Wall-clock limit for the iterative method, in minutes.
    #[arg(long)]
    timeout_mins: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    /// Repository-format dataset.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum, default_value_t = Method::Stratified)]
    method: Method,
    #[command(flatten)]
    sampler: SamplerArgs,
    #[arg(long)]
    out_train: Option<PathBuf>,
    #[arg(long)]
    out_test: Option<PathBuf>,
    /// One line per point: 0 = train, 1 = test.
    #[arg(long)]
    out_index: Option<PathBuf>,
    /// Per-epoch CSV trace (stratified only).
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Full dataset; required with --index, optional consistency check with
    /// --train/--test.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long, conflicts_with_all = ["train", "test"])]
    index: Option<PathBuf>,
    #[arg(long, requires = "test")]
    train: Option<PathBuf>,
    #[arg(long, requires = "train")]
    test: Option<PathBuf>,
    /// Write the label-proportion histogram as CSV.
    #[arg(long)]
    hist_csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[arg(long)]
    input: PathBuf,
    /// Comma-separated list of methods.
    #[arg(long, value_enum, value_delimiter = ',', required = true)]
    methods: Vec<Method>,
    #[command(flatten)]
    sampler: SamplerArgs,
}

/// Exit status for a method that hit its time limit.
pub const EXIT_TIMEOUT: u8 = 2;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::FAILURE } else { ExitCode::SUCCESS };
        }
    };
    if let Some(threads) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    }
    let result = match cli.command {
        Command::Split(args) => commands::split(args),
        Command::Evaluate(args) => commands::evaluate(args),
        Command::Compare(args) => commands::compare(args),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
