//! `emopred`: tweet emoji prediction pipeline front end.
//!
//! Subcommands cover the full workflow: `preprocess` (stdin/stdout filter),
//! `stats` (n-gram statistics), `embed` (skip-gram pretraining), `train`
//! (BiLSTM-attention classifier), `eval`, `predict` (with optional attention
//! heatmaps), `baseline` (BOW / N-BOW + linear SVM), and `search` (seeded
//! random hyper-parameter search).
//!
//! Exit codes: 0 on success, 2 on usage errors, 1 on runtime errors.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use emopred_core::model::AttentionVariant;

#[derive(Parser)]
#[command(name = "emopred", version, about = "Tweet emoji prediction pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Normalize raw tweets from stdin to processed token lines on stdout
    Preprocess(PreprocessArgs),
    /// Build n-gram statistics from processed token lines
    Stats(StatsArgs),
    /// Train skip-gram word embeddings on a processed corpus
    Embed(EmbedArgs),
    /// Train the BiLSTM-attention classifier
    Train(TrainArgs),
    /// Evaluate a checkpoint: metrics report and confusion matrix
    Eval(EvalArgs),
    /// Predict labels; optionally render attention heatmaps
    Predict(PredictArgs),
    /// Bag-of-words baselines with a linear SVM
    Baseline(BaselineArgs),
    /// Seeded random hyper-parameter search
    Search(SearchArgs),
}

/// Preprocessing knobs shared by every command that reads raw tweets.
#[derive(Args, Debug, Clone, Default)]
struct PrepFlags {
    /// N-gram statistics file (enables hashtag segmentation and spell correction)
    #[arg(long)]
    stats: Option<PathBuf>,
    /// Emoticon lexicon file extending the built-in map ("surface TAB tag")
    #[arg(long)]
    lexicon: Option<PathBuf>,
    /// Correct out-of-vocabulary words against the statistics
    #[arg(long)]
    spell_correct: bool,
    /// Edit-distance budget for spell correction (1 or 2)
    #[arg(long)]
    max_edits: Option<usize>,
    /// Keep hashtag bodies whole instead of segmenting them
    #[arg(long)]
    no_segment_hashtags: bool,
    /// Keep elongated words as written
    #[arg(long)]
    no_elongated: bool,
}

#[derive(Args, Debug)]
struct PreprocessArgs {
    #[command(flatten)]
    prep: PrepFlags,
}

#[derive(Args, Debug)]
struct StatsArgs {
    /// Token-line corpus; stdin when omitted
    #[arg(long)]
    input: Option<PathBuf>,
    /// Output statistics file
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args, Debug)]
struct EmbedArgs {
    /// Processed token-line corpus
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// Output directory (vectors.txt + run_config.txt)
    #[arg(long)]
    out_dir: PathBuf,
    /// Config file providing defaults for any flag
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    window: Option<usize>,
    #[arg(long)]
    negatives: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    min_count: Option<u64>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    final_learning_rate: Option<f64>,
    #[arg(long)]
    subsample: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[arg(long)]
    train_text: Option<PathBuf>,
    #[arg(long)]
    train_labels: Option<PathBuf>,
    /// Validation files; when omitted the training set is split
    #[arg(long)]
    val_text: Option<PathBuf>,
    #[arg(long)]
    val_labels: Option<PathBuf>,
    /// Train/val/test ratios used when no validation files are given
    #[arg(long)]
    split: Option<String>,
    #[arg(long)]
    classes: Option<usize>,
    /// Output directory (checkpoint.json, history.tsv, run_config.txt)
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Pretrained word2vec text file initializing the embedding layer
    #[arg(long)]
    embeddings: Option<PathBuf>,
    /// Vocabulary threshold when no pretrained embeddings are given
    #[arg(long)]
    min_count: Option<u64>,
    #[arg(long, value_parser = clap::builder::ValueParser::new(|s: &str| s.parse::<AttentionVariant>()))]
    attention: Option<AttentionVariant>,
    #[arg(long)]
    embed_dim: Option<usize>,
    #[arg(long)]
    hidden_size: Option<usize>,
    #[arg(long)]
    noise_sigma: Option<f64>,
    #[arg(long)]
    dropout_embed: Option<f64>,
    #[arg(long)]
    dropout_rnn: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    max_epochs: Option<usize>,
    #[arg(long)]
    patience: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    clip_norm: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    prep: PrepFlags,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long)]
    text: Option<PathBuf>,
    #[arg(long)]
    labels: Option<PathBuf>,
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Output directory (metrics.tsv/json, confusion.tsv, run_config.txt)
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    prep: PrepFlags,
}

#[derive(Args, Debug)]
struct PredictArgs {
    #[arg(long)]
    text: Option<PathBuf>,
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Write predicted labels here instead of stdout
    #[arg(long)]
    output: Option<PathBuf>,
    /// Directory for per-example attention heatmap HTML files
    #[arg(long)]
    heatmaps: Option<PathBuf>,
    /// Gold labels shown in heatmap headers
    #[arg(long)]
    gold_labels: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    prep: PrepFlags,
}

#[derive(Args, Debug)]
struct BaselineArgs {
    /// Feature family: "bow" (TF-IDF) or "nbow" (embedding centroids)
    #[arg(long)]
    features: Option<String>,
    #[arg(long)]
    train_text: Option<PathBuf>,
    #[arg(long)]
    train_labels: Option<PathBuf>,
    #[arg(long)]
    test_text: Option<PathBuf>,
    #[arg(long)]
    test_labels: Option<PathBuf>,
    #[arg(long)]
    classes: Option<usize>,
    /// Embeddings file (required for nbow features)
    #[arg(long)]
    embeddings: Option<PathBuf>,
    /// SVM regularization trade-off
    #[arg(long)]
    c: Option<f64>,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (metrics, confusion, svm_model.txt, run_config.txt)
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    prep: PrepFlags,
}

#[derive(Args, Debug)]
struct SearchArgs {
    #[arg(long)]
    train_text: Option<PathBuf>,
    #[arg(long)]
    train_labels: Option<PathBuf>,
    #[arg(long)]
    classes: Option<usize>,
    #[arg(long)]
    budget: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Epoch cap per trial
    #[arg(long)]
    trial_epochs: Option<usize>,
    #[arg(long)]
    embed_dim: Option<usize>,
    #[arg(long)]
    split: Option<String>,
    /// Learning-rate range, e.g. "1e-4,1e-2"
    #[arg(long)]
    learning_rates: Option<String>,
    /// Comma-separated choice lists narrowing the space
    #[arg(long)]
    batch_sizes: Option<String>,
    #[arg(long)]
    hidden_sizes: Option<String>,
    /// Output directory (trials.tsv, best_config.txt, run_config.txt)
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    prep: PrepFlags,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Preprocess(args) => commands::preprocess(args),
        Command::Stats(args) => commands::stats(args),
        Command::Embed(args) => commands::embed(args),
        Command::Train(args) => commands::train(args),
        Command::Eval(args) => commands::eval(args),
        Command::Predict(args) => commands::predict(args),
        Command::Baseline(args) => commands::baseline(args),
        Command::Search(args) => commands::search(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {:#}", err);
            ExitCode::from(1)
        }
    }
}
