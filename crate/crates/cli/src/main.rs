//! `helprank`: prepare review data, pre-train embeddings, train and compare
//! helpfulness classifiers.

mod commands;
mod config;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use helprank::classifiers::ModelKind;
use helprank::train::Task;

#[derive(Debug, Parser)]
#[command(name = "helprank", version, about = "Review helpfulness prediction pipeline")]
pub struct Cli {
    /// Print machine-readable JSON results on standard output
    #[arg(long, global = true, display_order = 100)]
    pub json: bool,

    /// Worker threads for parallel stages [default: all cores]
    #[arg(long, global = true, value_name = "N", display_order = 100)]
    pub jobs: Option<usize>,

    /// Only log warnings and errors
    #[arg(short, long, global = true, display_order = 100)]
    pub quiet: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Label, balance and split one category's raw reviews
    Prepare(PrepareArgs),
    /// Distribution of total votes over a raw review file
    Stats(StatsArgs),
    /// Pre-train a subword skip-gram look-up table
    Embed(EmbedArgs),
    /// Train a classifier and write its checkpoint and report
    Train(TrainArgs),
    /// Score a checkpoint on a prepared split
    Eval(EvalArgs),
    /// Predict the helpfulness of one review
    Predict(PredictArgs),
    /// Per-category accuracy deltas between two reports
    Compare(CompareArgs),
}

#[derive(Debug, Args)]
pub struct PrepareArgs {
    /// Raw reviews, one JSON object per line
    #[arg(long)]
    pub input: PathBuf,
    /// Category name [default: the input file name]
    #[arg(long)]
    pub category: Option<String>,
    /// Labeled reviews to keep per class
    #[arg(long, default_value_t = 50_000)]
    pub per_class: usize,
    /// Zero-vote reviews to keep as the unlabeled pool
    #[arg(long, default_value_t = 0)]
    pub unlabeled: usize,
    /// Longest accepted review, in tokens [default: 500]
    #[arg(long)]
    pub max_len: Option<usize>,
    /// Fewest total votes for a labeled review [default: 10]
    #[arg(long)]
    pub min_votes: Option<u64>,
    /// Labeling config file (flat key=value or JSON)
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Random seed [default: 0]
    #[arg(long, env = "HELPRANK_SEED")]
    pub seed: Option<u64>,
    /// Output directory
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    /// Raw reviews, one JSON object per line
    #[arg(long)]
    pub input: PathBuf,
    /// Category name [default: the input file name]
    #[arg(long)]
    pub category: Option<String>,
}

/// Flags shared by commands that resolve a training config.
#[derive(Debug, Args)]
pub struct ConfigArgs {
    /// Config file (flat key=value or JSON); flags override it
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Set any config key, e.g. `--set pretrain.window=7` (repeatable)
    #[arg(long = "set", value_name = "KEY=VALUE", value_parser = config::parse_assignment)]
    pub set: Vec<(String, serde_json::Value)>,
    /// Random seed [default: 0]
    #[arg(long, env = "HELPRANK_SEED")]
    pub seed: Option<u64>,
    /// Words seen fewer times are mapped to UNK [default: 5]
    #[arg(long)]
    pub min_count: Option<u64>,
}

#[derive(Debug, Args)]
pub struct EmbedArgs {
    /// Prepared data directory (train and validation splits)
    #[arg(long)]
    pub labeled: PathBuf,
    /// Prepared directory whose unlabeled pool is added [default: --labeled]
    #[arg(long)]
    pub unlabeled: Option<PathBuf>,
    /// Vector dimension [default: 300]
    #[arg(long)]
    pub dim: Option<usize>,
    /// Passes over the corpus [default: 5]
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Largest context window [default: 5]
    #[arg(long)]
    pub window: Option<usize>,
    /// Noise words per context word [default: 5]
    #[arg(long)]
    pub negatives: Option<usize>,
    #[command(flatten)]
    pub common: ConfigArgs,
    /// Also write the word vectors as text ("|V| d" header, one word per line)
    #[arg(long)]
    pub text: Option<PathBuf>,
    /// Output table file; the vocabulary and provenance are written beside it
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// t1 (supervised) or t2 (skip-gram initialized) [default: t1]
    #[arg(long)]
    pub task: Option<Task>,
    /// rcnn, cnn, linear or svm [default: rcnn]
    #[arg(long)]
    pub model: Option<ModelKind>,
    /// Prepared data directory
    #[arg(long)]
    pub data: PathBuf,
    /// Pre-trained table from `embed` (t2); trained in-process when absent
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    /// Training epochs [default: 10]
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Mini-batch size [default: 128]
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Adam learning rate [default: 0.001]
    #[arg(long)]
    pub learning_rate: Option<f64>,
    /// Word vector dimension [default: 256 for t1, 300 for t2]
    #[arg(long)]
    pub embed_dim: Option<usize>,
    /// Tokens kept per review [default: 500]
    #[arg(long)]
    pub max_len: Option<usize>,
    /// Dropout before the CNN output layer [default: 0]
    #[arg(long)]
    pub dropout: Option<f64>,
    #[command(flatten)]
    pub common: ConfigArgs,
    /// Output directory
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Checkpoint written by `train`
    #[arg(long)]
    pub model: PathBuf,
    /// Prepared data directory
    #[arg(long)]
    pub data: PathBuf,
    /// Split to score: train, validation or test
    #[arg(long, default_value = "test")]
    pub split: String,
    /// Vocabulary file [default: vocab.txt beside the checkpoint]
    #[arg(long)]
    pub vocab: Option<PathBuf>,
    /// Subword table for unseen words [default: table.bin beside the checkpoint, if any]
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    /// Checkpoint written by `train`
    #[arg(long)]
    pub model: PathBuf,
    /// Vocabulary file written by `train`
    #[arg(long)]
    pub vocab: PathBuf,
    /// Subword table for unseen words
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    /// Review text
    #[arg(long)]
    pub text: String,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Baseline report (file or `train` output directory)
    pub report_a: PathBuf,
    /// Report compared against the baseline
    pub report_b: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.quiet { "warn" } else { "info" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp_secs()
        .init();
    if let Some(n) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            log::warn!("could not size the thread pool: {e}");
        }
    }
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", commands::error_json(&e));
            ExitCode::from(1)
        }
    }
}
