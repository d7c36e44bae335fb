//! `tngen` — train, sample, evaluate and search generative models over token
//! sequences. Every subcommand is deterministic given its configuration and
//! seed; exit codes are 0 (success), 1 (runtime or data error), 2 (usage).

mod cmd_eval;
mod cmd_sample;
mod cmd_search;
mod cmd_train;
mod config;
mod util;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(String),
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    pub fn runtime(msg: impl Into<String>) -> Self {
        CliError::Runtime(msg.into())
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Runtime(m) => write!(f, "{m}"),
        }
    }
}

impl std::error::Error for CliError {}

#[derive(Parser)]
#[command(name = "tngen", version, about = "Generative sequence models: train, sample, eval, search")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model and emit a run directory.
    Train(TrainArgs),
    /// Draw decoded samples from a checkpoint.
    Sample(SampleArgs),
    /// Fold-based evaluation of sample files against a property table.
    Eval(EvalArgs),
    /// Random hyperparameter search ranked by best Fréchet distance.
    Search(SearchArgs),
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    dataset: Option<String>,
    /// positive_mps | born_real | born_complex | lps_real | lps_complex | gan
    #[arg(long)]
    kind: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    bond_dim: Option<usize>,
    #[arg(long)]
    purif_dim: Option<usize>,
    #[arg(long)]
    hidden_layers: Option<usize>,
    #[arg(long)]
    hidden_units: Option<usize>,
    #[arg(long)]
    prior_dim: Option<usize>,
    #[arg(long)]
    dropout: Option<f64>,
    #[arg(long)]
    eval_samples: Option<usize>,
    #[arg(long)]
    eval_every: Option<usize>,
    /// ngram:K or file:PATH
    #[arg(long)]
    featurizer: Option<String>,
    /// brackets | whitespace
    #[arg(long)]
    tokenizer: Option<String>,
    #[arg(long)]
    max_len: Option<usize>,
    /// Independent training repetitions (per-rep subdirectories when > 1).
    #[arg(long)]
    repetitions: Option<usize>,
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Args, Debug)]
pub struct SampleArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    checkpoint: Option<String>,
    #[arg(long)]
    count: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output samples file (one decoded string per line).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Repeatable `tag=path` (pool several files with `tag=a.txt+b.txt`).
    #[arg(long)]
    samples: Vec<String>,
    /// Training corpus for novelty comparison.
    #[arg(long)]
    dataset: Option<String>,
    /// Property table CSV.
    #[arg(long)]
    properties: Option<String>,
    /// Name of a [criteria.NAME] config section.
    #[arg(long)]
    criteria: Option<String>,
    /// `column:sense,...`, e.g. `bde:min,ip:max,sa:min`.
    #[arg(long)]
    objectives: Option<String>,
    /// Reference point values, e.g. `85,182,10`.
    #[arg(long, alias = "ref")]
    reference: Option<String>,
    #[arg(long)]
    folds: Option<usize>,
    /// Also evaluate the union of all models.
    #[arg(long)]
    combine: bool,
    /// Exhaustive subset search over the given models.
    #[arg(long)]
    subset_search: bool,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Args, Debug)]
pub struct SearchArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    dataset: Option<String>,
    #[arg(long)]
    kind: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Trials per stratum (default 1 for TN kinds, 200 for the GAN).
    #[arg(long)]
    trials: Option<usize>,
    /// Epoch budget per trial (default 200 for TN kinds, 1000 for the GAN).
    #[arg(long)]
    budget: Option<usize>,
    /// TN strata, e.g. `2,3,5`.
    #[arg(long)]
    bond_dims: Option<String>,
    /// GAN strata, e.g. `1,2,3`.
    #[arg(long)]
    layer_counts: Option<String>,
    /// Add the log-uniform learning-rate axis to TN strata.
    #[arg(long)]
    lr_axis: bool,
    #[arg(long)]
    purif_dim: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    eval_samples: Option<usize>,
    #[arg(long)]
    eval_every: Option<usize>,
    #[arg(long)]
    featurizer: Option<String>,
    #[arg(long)]
    tokenizer: Option<String>,
    #[arg(long)]
    max_len: Option<usize>,
    #[arg(long)]
    jobs: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train(args) => cmd_train::run(args),
        Command::Sample(args) => cmd_sample::run(args),
        Command::Eval(args) => cmd_eval::run(args),
        Command::Search(args) => cmd_search::run(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
