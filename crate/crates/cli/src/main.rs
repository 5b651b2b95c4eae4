//! `cgs`: planted-task generation, training, threshold sweeps, baselines,
//! the exhaustive oracle and the MSFBCNN parameter calculator.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::EvaluatorKind;

#[derive(Debug, Parser)]
#[command(name = "cgs", version, about = "Constrained node selection with conditional Gumbel-Softmax")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a planted synthetic task (CSV + metadata JSON).
    Generate(GenerateArgs),
    /// Train one selection layer jointly with a classifier.
    Train(TrainArgs),
    /// Compare methods across distance thresholds.
    Sweep(SweepArgs),
    /// Print the hard selection stored in a trained model.
    Select(SelectArgs),
    /// Exhaustively score every feasible selection.
    Oracle(ScoreArgs),
    /// Mutual-information greedy constrained selection.
    Baseline(ScoreArgs),
    /// Per-layer parameter counts of the MSFBCNN classifier.
    ArchCalc(ArchArgs),
}

#[derive(Debug, Args)]
struct GenerateArgs {
    /// Named task preset.
    #[arg(long, value_parser = clap::builder::PossibleValuesParser::new(cgs_core::data::PRESETS), conflicts_with = "spec")]
    preset: Option<String>,
    /// Generator spec file (JSON or TOML) instead of a preset.
    #[arg(long, required_unless_present = "preset")]
    spec: Option<PathBuf>,
    /// Generator seed (default 0, or the value in the generator file).
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// File name stem; defaults to the preset name or `task`.
    #[arg(long)]
    stem: Option<String>,
}

#[derive(Debug, Args)]
struct Common {
    /// Experiment file (JSON or TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Task metadata JSON written by `generate`.
    #[arg(long)]
    task: Option<PathBuf>,
    /// Generate a preset task in memory.
    #[arg(long, value_parser = clap::builder::PossibleValuesParser::new(cgs_core::data::PRESETS))]
    preset: Option<String>,
    /// External CSV dataset (needs a topology file with node geometry).
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long)]
    feature_dim: Option<usize>,
    #[arg(long)]
    classes: Option<usize>,
    /// Seed for the preset generator and the data split.
    #[arg(long)]
    data_seed: Option<u64>,
    /// `star`, `line`, or a topology file.
    #[arg(long)]
    topology: Option<String>,
    /// Number of communication-graph vertices.
    #[arg(long = "M", alias = "vertices")]
    m: Option<usize>,
    #[arg(long)]
    root: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    epochs: Option<usize>,
    /// Worker threads.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
enum LayerArg {
    Conditional,
    Vanilla,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_enum, default_value = "conditional")]
    layer: LayerArg,
    #[arg(long)]
    threshold: Option<f64>,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    /// Comma-separated, ascending.
    #[arg(long, value_delimiter = ',')]
    thresholds: Option<Vec<f64>>,
    /// Comma-separated subset of conditional, greedy-mi, oracle, vanilla.
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<cgs_core::train::Method>>,
    /// Seeds `seed, seed + 1, ...`.
    #[arg(long)]
    repeats: Option<u64>,
    /// Record per-cell wall time (makes outputs run-dependent).
    #[arg(long)]
    wall_time: bool,
}

#[derive(Debug, Args)]
struct SelectArgs {
    /// Model JSON written by `train`.
    model: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ScoreArgs {
    #[command(flatten)]
    common: Common,
    /// Comma-separated thresholds.
    #[arg(long, value_delimiter = ',')]
    threshold: Option<Vec<f64>>,
    #[arg(long, value_enum)]
    evaluator: Option<EvaluatorKind>,
    #[arg(long)]
    bins: Option<usize>,
    #[arg(long)]
    wall_time: bool,
}

#[derive(Debug, Args)]
struct ArchArgs {
    /// EEG channels.
    #[arg(long = "C")]
    c: u64,
    /// Time samples.
    #[arg(long = "T")]
    t: u64,
    #[arg(long = "F_T", alias = "ft")]
    f_t: u64,
    #[arg(long = "F_S", alias = "fs")]
    f_s: u64,
    #[arg(long = "N_C", alias = "nc")]
    n_c: u64,
    /// Print JSON instead of a table.
    #[arg(long)]
    json: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Failure classes mapped onto exit codes.
#[derive(Debug)]
enum Failure {
    Usage(anyhow::Error),
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Self::Runtime(e)
    }
}

impl From<cgs_core::Error> for Failure {
    fn from(e: cgs_core::Error) -> Self {
        Self::Runtime(e.into())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Generate(a) => commands::generate(a),
        Command::Train(a) => commands::train(a),
        Command::Sweep(a) => commands::sweep(a),
        Command::Select(a) => commands::select(a),
        Command::Oracle(a) => commands::score(a, commands::Scorer::Oracle),
        Command::Baseline(a) => commands::score(a, commands::Scorer::Greedy),
        Command::ArchCalc(a) => commands::arch_calc(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
