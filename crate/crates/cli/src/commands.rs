use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use log::{info, warn};
use serde::Serialize;
use triage_reduce::classifier::DEFAULT_ALPHA;
use triage_reduce::corpus::{parse_reports, read_reports, DEFAULT_MIN_FIXED};
use triage_reduce::harness::{
    emit_reports, render_markdown, ExperimentConfig, ReportFormat, DEFAULT_K_MAX,
};
use triage_reduce::io::write_atomic;
use triage_reduce::reduce::summarize;
use triage_reduce::synth::{generate, to_jsonl, SynthConfig};
use triage_reduce::vectorize::analyze;
use triage_reduce::{
    build_matrix, ingest as ingest_reports, reduce as reduce_matrix, run_experiment,
    train as train_model, Corpus, Error, Order, Result, TrainedModel,
};

use crate::{ReductionArgs, StoplistArgs};

/// Written next to every output so a run can be repeated exactly.
#[derive(Serialize)]
struct ConfigEcho<'a, A: Serialize, C: Serialize> {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    arguments: &'a A,
    resolved: C,
}

fn write_echo<A: Serialize, C: Serialize>(
    path: &Path,
    command: &'static str,
    arguments: &A,
    resolved: C,
) -> Result<()> {
    let echo = ConfigEcho {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        command,
        arguments,
        resolved,
    };
    write_atomic(path, &serde_json::to_vec_pretty(&echo)?)
}

/// `out/file.json` → `out/file.json.config.json`
fn sibling_echo(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".config.json");
    path.with_file_name(name)
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Inputs are checked up front so no work is done for a mistyped path.
fn ensure_input(path: &Path) -> Result<()> {
    match fs::metadata(path) {
        Ok(meta) if meta.is_dir() => Err(Error::io(
            path,
            io::Error::new(io::ErrorKind::InvalidInput, "is a directory"),
        )),
        Ok(_) => Ok(()),
        Err(e) => Err(Error::io(path, e)),
    }
}

fn print(text: &str) {
    let mut out = io::stdout().lock();
    // a closed pipe is not worth an error exit
    let _ = out.write_all(text.as_bytes()).and_then(|()| out.flush());
}

#[derive(Args, Debug, Serialize)]
pub struct IngestArgs {
    /// JSONL bug reports, one object per line.
    #[arg(long)]
    input: PathBuf,
    /// Corpus file to write.
    #[arg(long)]
    out: PathBuf,
    /// Developers with fewer fixed reports are removed.
    #[arg(long, default_value_t = DEFAULT_MIN_FIXED)]
    min_fixed: usize,
    #[command(flatten)]
    stoplist: StoplistArgs,
}

pub fn ingest(args: &IngestArgs) -> Result<()> {
    ensure_input(&args.input)?;
    let stoplist = args.stoplist.load()?;
    let reports = read_reports(&args.input)?;
    let corpus = ingest_reports(&reports, args.min_fixed)?;
    let words = build_matrix(&corpus.reports, &stoplist)?.n();
    corpus.save(&args.out)?;
    write_echo(&sibling_echo(&args.out), "ingest", args, &corpus.summary)?;

    let s = &corpus.summary;
    let l = &s.labeling;
    let mut text = String::new();
    let _ = writeln!(text, "candidate reports            {}", l.input);
    let _ = writeln!(text, "labeled                      {}", l.labeled);
    let _ = writeln!(
        text,
        "dropped while labeling       {} blank, {} other status, {} missing master, {} cycle, {} no fixer",
        l.dropped_blank, l.dropped_other_status, l.dropped_missing_master, l.dropped_cycle, l.dropped_no_fixer
    );
    let _ = writeln!(
        text,
        "early duplicates removed     {}",
        s.duplicates_removed
    );
    let _ = writeln!(text, "inactive-developer reports   {}", s.inactive_removed);
    let _ = writeln!(text);
    let _ = writeln!(text, "Number of instances          {}", s.instances);
    let _ = writeln!(text, "Number of features           {words}");
    let _ = writeln!(text, "Number of developers         {}", s.developers);
    let _ = writeln!(
        text,
        "Min bugs per developer       {}",
        corpus.developers.min_count().unwrap_or(0)
    );
    let _ = writeln!(
        text,
        "Max bugs per developer       {}",
        corpus.developers.max_count().unwrap_or(0)
    );
    print(&text);
    Ok(())
}

#[derive(Args, Debug, Serialize)]
pub struct ReduceArgs {
    /// Corpus file from `ingest`.
    #[arg(long)]
    corpus: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// none, fs-only, is-only, fs-is or is-fs.
    #[arg(long, default_value = "fs-is")]
    order: Order,
    #[command(flatten)]
    reduction: ReductionArgs,
    #[command(flatten)]
    stoplist: StoplistArgs,
}

pub fn reduce(args: &ReduceArgs) -> Result<()> {
    ensure_input(&args.corpus)?;
    let config = args.reduction.config(args.order);
    config.validate()?;
    let stoplist = args.stoplist.load()?;
    let corpus = Corpus::load(&args.corpus)?;
    let matrix = build_matrix(&corpus.reports, &stoplist)?;
    let (reduced, summary) = reduce_matrix(&matrix, &config)?;

    ensure_dir(&args.out)?;
    let mut csv = Vec::new();
    reduced
        .write_csv(&mut csv)
        .map_err(|e| Error::io(&args.out, e))?;
    write_atomic(&args.out.join("matrix.csv"), &csv)?;
    write_atomic(
        &args.out.join("summary.json"),
        &serde_json::to_vec_pretty(&summary)?,
    )?;
    let text = summarize(&summary);
    write_atomic(&args.out.join("summary.txt"), text.as_bytes())?;
    for phase in &summary.phases {
        if let Some(log) = &phase.icf_log {
            let mut body = Vec::new();
            log.write_csv(&mut body)
                .map_err(|e| Error::io(&args.out, e))?;
            write_atomic(&args.out.join("icf_log.csv"), &body)?;
        }
    }
    write_echo(&args.out.join("config.json"), "reduce", args, config)?;
    print(&text);
    Ok(())
}

#[derive(Args, Debug, Serialize)]
pub struct TrainArgs {
    /// Corpus file from `ingest`.
    #[arg(long)]
    corpus: PathBuf,
    /// Model file to write.
    #[arg(long)]
    model: PathBuf,
    /// none, fs-only, is-only, fs-is or is-fs.
    #[arg(long, default_value = "fs-is")]
    order: Order,
    #[command(flatten)]
    reduction: ReductionArgs,
    /// Additive smoothing.
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    alpha: f64,
    #[command(flatten)]
    stoplist: StoplistArgs,
}

pub fn train(args: &TrainArgs) -> Result<()> {
    ensure_input(&args.corpus)?;
    let config = args.reduction.config(args.order);
    config.validate()?;
    let stoplist = args.stoplist.load()?;
    let corpus = Corpus::load(&args.corpus)?;
    let matrix = build_matrix(&corpus.reports, &stoplist)?;
    let (reduced, summary) = reduce_matrix(&matrix, &config)?;
    let model = train_model(&reduced, args.alpha)?;
    model.save(&args.model)?;
    write_echo(&sibling_echo(&args.model), "train", args, config)?;
    let mut text = summarize(&summary);
    let _ = writeln!(
        text,
        "model: {} developers, {} words, trained on {} reports",
        model.developers().len(),
        model.vocabulary().len(),
        reduced.m()
    );
    print(&text);
    Ok(())
}

#[derive(Args, Debug, Serialize)]
pub struct PredictArgs {
    /// Model file from `train`.
    #[arg(long)]
    model: PathBuf,
    /// Text of a single new report.
    #[arg(long, conflicts_with = "input", required_unless_present = "input")]
    text: Option<String>,
    /// JSONL bug reports; one recommendation line is printed per report.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Length of the recommendation list.
    #[arg(short, long, default_value_t = 5)]
    k: usize,
}

#[derive(Serialize)]
struct PredictionLine<'a> {
    id: u64,
    recommendations: &'a [triage_reduce::classifier::Recommendation],
}

pub fn predict(args: &PredictArgs) -> Result<()> {
    ensure_input(&args.model)?;
    let model = TrainedModel::load(&args.model)?;
    let k = if args.k > model.developers().len() {
        warn!(
            "list size {} exceeds the {} model developers",
            args.k,
            model.developers().len()
        );
        model.developers().len()
    } else {
        args.k
    };
    // the model vocabulary already excludes stopwords
    let stoplist = triage_reduce::Stoplist::empty();
    let mut out = String::new();
    if let Some(text) = &args.text {
        let list = model.predict_tokens(&analyze(text, &stoplist), k)?;
        for (rank, r) in list.entries.iter().enumerate() {
            let _ = writeln!(out, "{}\t{}\t{:.6}", rank + 1, r.developer, r.log_posterior);
        }
    } else if let Some(path) = &args.input {
        ensure_input(path)?;
        let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let reports = parse_reports(io::BufReader::new(file))?;
        for report in &reports {
            let text = format!("{}\n{}", report.summary, report.description);
            let list = model.predict_tokens(&analyze(&text, &stoplist), k)?;
            let line = PredictionLine {
                id: report.id,
                recommendations: &list.entries,
            };
            out.push_str(&serde_json::to_string(&line)?);
            out.push('\n');
        }
        info!("scored {} reports", reports.len());
    }
    print(&out);
    Ok(())
}

#[derive(Args, Debug, Serialize)]
pub struct ExperimentArgs {
    /// Corpus file from `ingest`.
    #[arg(long)]
    corpus: PathBuf,
    /// Output directory for report.csv, report.md, plotdata.csv and report.json.
    #[arg(long)]
    out: PathBuf,
    /// Orders to evaluate (repeatable).
    #[arg(long, required_unless_present = "all", conflicts_with = "all")]
    order: Vec<Order>,
    /// Evaluate Origin, CHI, ICF, CHI→ICF and ICF→CHI.
    #[arg(long)]
    all: bool,
    #[command(flatten)]
    reduction: ReductionArgs,
    /// Additive smoothing.
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    alpha: f64,
    /// Longest recommendation list evaluated.
    #[arg(long, default_value_t = DEFAULT_K_MAX)]
    k_max: usize,
    /// Fold assignment seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    stoplist: StoplistArgs,
}

pub fn experiment(args: &ExperimentArgs) -> Result<()> {
    ensure_input(&args.corpus)?;
    let orders: Vec<Order> = if args.all {
        Order::ALL.to_vec()
    } else {
        args.order.clone()
    };
    let configs: Vec<ExperimentConfig> = orders
        .iter()
        .map(|&order| ExperimentConfig {
            reduction: args.reduction.config(order),
            k_max: args.k_max,
            alpha: args.alpha,
            seed: args.seed,
        })
        .collect();
    for c in &configs {
        c.reduction.validate()?;
    }
    if args.k_max == 0 {
        return Err(Error::Parameter("k_max must be at least 1".into()));
    }
    let stoplist = args.stoplist.load()?;
    let corpus = Corpus::load(&args.corpus)?;

    let mut reports = Vec::with_capacity(configs.len());
    for config in &configs {
        info!("running {}", config.reduction.order.display_name());
        reports.push(run_experiment(&corpus.reports, &stoplist, config)?);
    }
    ensure_dir(&args.out)?;
    emit_reports(&reports, &args.out, &ReportFormat::ALL)?;
    write_echo(&args.out.join("config.json"), "experiment", args, &configs)?;
    print(&render_markdown(&reports));
    Ok(())
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    /// 1,000 reports from 40 developers.
    Acceptance,
    /// 11,313 reports from 267 developers.
    Scale,
}

#[derive(Args, Debug, Serialize)]
pub struct SynthArgs {
    /// JSONL file to write.
    #[arg(long)]
    out: PathBuf,
    /// Base parameter set; the flags below override it.
    #[arg(long, value_enum, default_value = "acceptance")]
    preset: Preset,
    /// Number of reports.
    #[arg(long)]
    reports: Option<usize>,
    /// Number of developers.
    #[arg(long)]
    developers: Option<usize>,
    /// Private words per developer.
    #[arg(long)]
    signal_vocab: Option<usize>,
    /// Size of the shared noise vocabulary.
    #[arg(long)]
    noise_vocab: Option<usize>,
    /// Share of reports that are near-copies of an earlier one.
    #[arg(long)]
    duplicate_fraction: Option<f64>,
    /// Generator seed.
    #[arg(long)]
    seed: Option<u64>,
}

impl SynthArgs {
    fn config(&self) -> SynthConfig {
        let base = match self.preset {
            Preset::Acceptance => SynthConfig::default(),
            Preset::Scale => SynthConfig::full_scale(SynthConfig::default().seed),
        };
        SynthConfig {
            reports: self.reports.unwrap_or(base.reports),
            developers: self.developers.unwrap_or(base.developers),
            signal_vocab: self.signal_vocab.unwrap_or(base.signal_vocab),
            noise_vocab: self.noise_vocab.unwrap_or(base.noise_vocab),
            duplicate_fraction: self.duplicate_fraction.unwrap_or(base.duplicate_fraction),
            seed: self.seed.unwrap_or(base.seed),
            ..base
        }
    }
}

pub fn synth(args: &SynthArgs) -> Result<()> {
    let config = args.config();
    let reports = generate(&config)?;
    write_atomic(&args.out, to_jsonl(&reports)?.as_bytes())?;
    write_echo(&sibling_echo(&args.out), "synth", args, config)?;
    print(&format!(
        "wrote {} reports from {} developers to {}\n",
        reports.len(),
        config.developers,
        args.out.display()
    ));
    Ok(())
}
