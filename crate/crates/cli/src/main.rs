mod commands;
mod dataset;
mod error;
mod scoring;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use pedants::{NormPolicy, NormPreset};

use crate::scoring::MetricKind;

/// Answer-correctness judging for short-form question answering.
#[derive(Debug, Parser)]
#[command(name = "pedants", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train a judge bundle (on the bundled seed corpus unless --dataset is given).
    Train(TrainArgs),
    /// Judge every record of a dataset; writes one JSON verdict per line.
    Judge(JudgeArgs),
    /// Agreement accuracy and macro F1 of each metric against human labels.
    Eval(EvalArgs),
    /// Pairwise model-ranking agreement between metrics and humans.
    Rank(RankArgs),
    /// Token-F1 agreement at several thresholds.
    Sweep(SweepArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Norm {
    Em,
    Pedants,
}

impl Norm {
    fn policy(self) -> NormPolicy {
        match self {
            Norm::Em => NormPreset::Em.policy(),
            Norm::Pedants => NormPreset::Pedants.policy(),
        }
    }
}

/// Dataset and execution options shared by the streaming commands.
#[derive(Debug, Clone, Args)]
struct RunArgs {
    /// JSONL dataset, one example per line.
    #[arg(long)]
    dataset: PathBuf,
    /// Model bundle produced by `train`.
    #[arg(long, env = "PEDANTS_MODEL")]
    model: Option<PathBuf>,
    /// Skip malformed lines instead of aborting.
    #[arg(long)]
    skip_bad: bool,
    /// Worker threads (default: available cores).
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Debug, Args)]
struct TrainArgs {
    /// Annotated JSONL corpus; the bundled seed corpus when omitted.
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Where to write the model bundle.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 668)]
    seed: u64,
    #[arg(long)]
    skip_bad: bool,
}

#[derive(Debug, Args)]
struct JudgeArgs {
    #[command(flatten)]
    run: RunArgs,
    #[arg(long, value_enum, default_value = "pedants")]
    metric: MetricKind,
    /// F1 cutoff for `--metric f1` (default 0.5).
    #[arg(long, value_delimiter = ',')]
    threshold: Vec<f64>,
    /// Normalization for the em and f1 metrics.
    #[arg(long, value_enum, default_value = "em")]
    norm: Norm,
    /// Output file (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Metrics to evaluate (default: em, f1, and pedants when a model is set).
    #[arg(long, value_enum, value_delimiter = ',')]
    metric: Vec<MetricKind>,
    /// F1 cutoffs; one f1 row per value (default 0.5).
    #[arg(long, value_delimiter = ',')]
    threshold: Vec<f64>,
    #[arg(long, value_enum, default_value = "em")]
    norm: Norm,
    /// Directory for report.csv and report.json (default: JSON to stdout).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct RankArgs {
    /// JSON rate table: {"human": {model: rate}, "metrics": {name: {model: rate}}}.
    #[arg(long, conflicts_with = "dataset")]
    rates: Option<PathBuf>,
    /// Labeled JSONL with model_id; rates are computed per model.
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long, env = "PEDANTS_MODEL")]
    model: Option<PathBuf>,
    #[arg(long, value_enum, value_delimiter = ',')]
    metric: Vec<MetricKind>,
    #[arg(long, value_delimiter = ',')]
    threshold: Vec<f64>,
    #[arg(long, value_enum, default_value = "em")]
    norm: Norm,
    #[arg(long)]
    skip_bad: bool,
    #[arg(long)]
    workers: Option<usize>,
    /// Directory for ranking.csv and ranking.json (default: JSON to stdout).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Cutoffs to evaluate (default 0.3,0.5,0.7).
    #[arg(long, value_delimiter = ',')]
    threshold: Vec<f64>,
    #[arg(long, value_enum, default_value = "em")]
    norm: Norm,
    /// Directory for sweep.csv and sweep.json (default: JSON to stdout).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(error::EXIT_VALIDATION as u8)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match &cli.command {
        Command::Train(a) => commands::train(a),
        Command::Judge(a) => commands::judge(a),
        Command::Eval(a) => commands::eval(a),
        Command::Rank(a) => commands::rank(a),
        Command::Sweep(a) => commands::sweep(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
