mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use triage_reduce::icf::IcfParams;
use triage_reduce::neighbors::{Metric, NeighborQuery, DEFAULT_K_NN};
use triage_reduce::{ChiVariant, Error, Order, ReductionConfig, Stoplist};

const THREADS_VAR: &str = "TRIAGE_REDUCE_THREADS";

#[derive(Parser, Debug)]
#[command(
    name = "triage-reduce",
    version,
    about = "Training-set reduction for bug triage"
)]
struct Cli {
    /// More log output (repeat for debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Label, deduplicate and filter a JSONL bug-report dump into a corpus file.
    Ingest(commands::IngestArgs),
    /// Reduce the whole corpus once and write the reduced matrix.
    Reduce(commands::ReduceArgs),
    /// Reduce the corpus and train a model on all of it.
    Train(commands::TrainArgs),
    /// Recommend developers for new reports.
    Predict(commands::PredictArgs),
    /// Five-fold cross-validated comparison of reduction orders.
    Experiment(commands::ExperimentArgs),
    /// Generate a synthetic JSONL bug-report dump.
    Synth(commands::SynthArgs),
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct ReductionArgs {
    /// Fraction of words kept by CHI selection.
    #[arg(long, default_value_t = 0.30)]
    pub word_ratio: f64,
    /// Fraction of reports kept by ICF selection.
    #[arg(long, default_value_t = 0.50)]
    pub report_ratio: f64,
    /// `standard` or `as_printed` (unsquared numerator).
    #[arg(long, default_value = "standard")]
    pub chi_variant: ChiVariant,
    /// Neighbors consulted by the ICF noise filter.
    #[arg(long = "knn-k", default_value_t = DEFAULT_K_NN)]
    pub knn_k: usize,
    /// `cosine` or `euclidean`.
    #[arg(long, default_value = "cosine")]
    pub metric: Metric,
    /// Noise-filter passes before condensing.
    #[arg(long, default_value_t = 1)]
    pub noise_passes: usize,
}

impl ReductionArgs {
    pub fn config(&self, order: Order) -> ReductionConfig {
        ReductionConfig {
            order,
            word_ratio: self.word_ratio,
            report_ratio: self.report_ratio,
            chi_variant: self.chi_variant,
            icf: IcfParams {
                neighbor: NeighborQuery {
                    k_nn: self.knn_k,
                    metric: self.metric,
                },
                noise_passes: self.noise_passes,
            },
        }
    }
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct StoplistArgs {
    /// Stopword file, one word per line (default: built-in English list).
    #[arg(long, conflicts_with = "no_stopwords")]
    pub stopwords: Option<PathBuf>,
    /// Keep every word.
    #[arg(long)]
    pub no_stopwords: bool,
}

impl StoplistArgs {
    pub fn load(&self) -> triage_reduce::Result<Stoplist> {
        match (&self.stopwords, self.no_stopwords) {
            (_, true) => Ok(Stoplist::empty()),
            (Some(path), false) => Stoplist::load(path),
            (None, false) => Ok(Stoplist::english()),
        }
    }
}

/// Usage problems exit 1, data problems 2, broken invariants 3.
fn exit_code(err: &Error) -> u8 {
    match err.root() {
        Error::Parameter(_) => 1,
        Error::Invariant(_) => 3,
        _ => 2,
    }
}

fn configure_threads() -> Result<(), String> {
    let Ok(value) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| format!("{THREADS_VAR} must be a positive integer, got `{value}`"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    if let Err(msg) = configure_threads() {
        eprintln!("error: {msg}");
        return ExitCode::from(1);
    }

    let result = match &cli.command {
        Command::Ingest(args) => commands::ingest(args),
        Command::Reduce(args) => commands::reduce(args),
        Command::Train(args) => commands::train(args),
        Command::Predict(args) => commands::predict(args),
        Command::Experiment(args) => commands::experiment(args),
        Command::Synth(args) => commands::synth(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
