//! `reclink`: sample block linkages, apply them, combine analyses, and
//! evaluate against known links.

mod commands;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "reclink", version, about = "Bayesian record linkage within blocks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the sampler and write permutation samples.
    Sample(SampleArgs),
    /// Build the linked file for one permutation sample.
    Apply(ApplyArgs),
    /// Fit an analysis model on every sample and combine the results.
    Combine(CombineArgs),
    /// Count correct links against a truth file.
    Evaluate(EvaluateArgs),
    /// Generate a synthetic pair of files with known links.
    Simulate(SimulateArgs),
}

#[derive(Args, Debug, Clone)]
struct InputArgs {
    /// File A (delimited, with header).
    #[arg(long)]
    a: Option<String>,
    /// File B (delimited, with header).
    #[arg(long)]
    b: Option<String>,
    /// Name of the block-identifier column shared by both files.
    #[arg(long)]
    block: Option<String>,
}

#[derive(Args, Debug)]
struct SampleArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Model as "formula:family", repeatable; order defines the chain.
    #[arg(long = "model")]
    models: Vec<String>,
    /// Number of exported samples.
    #[arg(long)]
    m: Option<usize>,
    /// Inner kernel iterations per parameter update.
    #[arg(long)]
    iters: Option<usize>,
    /// Swap proposals per slot per iteration.
    #[arg(long)]
    t: Option<usize>,
    #[arg(long)]
    burnin: Option<usize>,
    /// Iterations between exported samples.
    #[arg(long)]
    interval: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    threads: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<String>,
    /// JSON file with any of the above settings; flags take precedence.
    #[arg(long)]
    config: Option<String>,
}

#[derive(Args, Debug)]
struct ApplyArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Permutation samples written by `sample`.
    #[arg(long)]
    perm: String,
    /// Sample column to apply, 0-based.
    #[arg(long, default_value_t = 0)]
    column: usize,
    /// Output file for the linked records.
    #[arg(long)]
    out: String,
}

#[derive(Args, Debug)]
struct CombineArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long)]
    perm: Option<String>,
    /// Analysis model, e.g. "Y~X1".
    #[arg(long)]
    formula: Option<String>,
    #[arg(long, default_value = "normal")]
    family: String,
    /// Comma-separated estimates, instead of fitting on samples.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    estimates: Vec<f64>,
    /// Comma-separated standard errors matching --estimates.
    #[arg(long = "std-errors", value_delimiter = ',')]
    std_errors: Vec<f64>,
    /// normal, barnard_rubin (r in the observed-data df) or barnard_rubin_standard (γ).
    #[arg(long, default_value = "normal")]
    df: String,
    /// Complete-data degrees of freedom; defaults to rows minus parameters.
    #[arg(long)]
    vcom: Option<f64>,
    /// Confidence level of the intervals.
    #[arg(long, default_value_t = 0.95)]
    level: f64,
    /// JSON output file; the result is always printed.
    #[arg(long)]
    out: Option<String>,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long)]
    perm: String,
    /// Truth file with columns a_row,b_row.
    #[arg(long)]
    truth: String,
    /// Also score this many uniformly random linkages.
    #[arg(long)]
    baseline: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// JSON output file.
    #[arg(long)]
    out: Option<String>,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[arg(long, default_value_t = 1200)]
    n: usize,
    /// Mean size of multi-record blocks.
    #[arg(long = "block-mean", default_value_t = 3.0)]
    block_mean: f64,
    /// Correlation of the continuous response with its mean.
    #[arg(long, default_value_t = 0.8)]
    correlation: f64,
    /// Share of records in singleton blocks.
    #[arg(long = "singleton-fraction", default_value_t = 1.0 / 3.0)]
    singleton_fraction: f64,
    /// Share of each multi-record block dropped from one file.
    #[arg(long = "drop-fraction", default_value_t = 0.0)]
    drop_fraction: f64,
    /// File that loses records: a or b.
    #[arg(long = "drop-side", default_value = "b")]
    drop_side: String,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: String,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    let result = match cli.command {
        Command::Sample(args) => commands::sample(args),
        Command::Apply(args) => commands::apply(args),
        Command::Combine(args) => commands::combine(args),
        Command::Evaluate(args) => commands::evaluate(args),
        Command::Simulate(args) => commands::simulate(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {:#}", failure.error);
            ExitCode::from(failure.kind as u8)
        }
    }
}
