//! Five-fold cross-validated experiments and report output.
//!
//! Each report has exactly one correct developer, so with `h_k` hits among
//! `t` test reports: accuracy = h/t, precision = h/(t·k), recall = h/t.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::classifier::{train, TrainedModel, DEFAULT_ALPHA};
use crate::corpus::LabeledReport;
use crate::error::{Error, Result};
use crate::io::write_atomic;
use crate::reduce::{reduce, ReductionConfig, ReductionSummary};
use crate::vectorize::{analyze, build_matrix, csv_field, Stoplist};

pub const FOLDS: usize = 5;
pub const DEFAULT_K_MAX: usize = 10;
/// Slack allowed on the precision/recall identities after fold averaging.
pub const IDENTITY_TOLERANCE: f64 = 1e-12;

/// Report ids dealt into disjoint folds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub seed: u64,
    pub folds: Vec<Vec<u64>>,
}

/// Seeded shuffle, then round-robin into [`FOLDS`] folds. Not stratified.
pub fn make_folds(report_ids: &[u64], seed: u64) -> Result<FoldPlan> {
    if report_ids.len() < FOLDS {
        return Err(Error::Parameter(format!(
            "{FOLDS}-fold cross-validation needs at least {FOLDS} reports, got {}",
            report_ids.len()
        )));
    }
    let mut ids = report_ids.to_vec();
    ids.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut folds: Vec<Vec<u64>> = (0..FOLDS)
        .map(|_| Vec::with_capacity(ids.len() / FOLDS + 1))
        .collect();
    for (i, id) in ids.into_iter().enumerate() {
        folds[i % FOLDS].push(id);
    }
    Ok(FoldPlan { seed, folds })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub reduction: ReductionConfig,
    pub k_max: usize,
    pub alpha: f64,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            reduction: ReductionConfig::default(),
            k_max: DEFAULT_K_MAX,
            alpha: DEFAULT_ALPHA,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: usize,
    pub train_reports: usize,
    pub train_words: usize,
    pub test_reports: usize,
    /// Test reports whose developer is part of the trained model.
    pub known_test_reports: usize,
    pub model_developers: usize,
    /// `hits[k-1]`: test reports whose developer is in the top-k list.
    pub hits: Vec<usize>,
    pub reduction: ReductionSummary,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KMetrics {
    pub k: usize,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub name: String,
    pub config: ExperimentConfig,
    pub per_k: Vec<KMetrics>,
    pub folds: Vec<FoldResult>,
}

impl MetricsReport {
    pub fn accuracy(&self, k: usize) -> f64 {
        self.per_k[k - 1].accuracy
    }

    /// Accuracy nondecreasing in k, precision·k = accuracy, recall = accuracy.
    pub fn check_identities(&self) -> Result<()> {
        for (i, m) in self.per_k.iter().enumerate() {
            if m.k != i + 1 {
                return Err(Error::Invariant(format!(
                    "{}: list sizes out of order",
                    self.name
                )));
            }
            if !(0.0..=1.0).contains(&m.accuracy) {
                return Err(Error::Invariant(format!(
                    "{}: accuracy@{} outside [0,1]",
                    self.name, m.k
                )));
            }
            if i > 0 && m.accuracy < self.per_k[i - 1].accuracy {
                return Err(Error::Invariant(format!(
                    "{}: accuracy decreases at k={}",
                    self.name, m.k
                )));
            }
            if (m.precision * m.k as f64 - m.accuracy).abs() > IDENTITY_TOLERANCE {
                return Err(Error::Invariant(format!(
                    "{}: precision@{}·k != accuracy",
                    self.name, m.k
                )));
            }
            if m.recall != m.accuracy {
                return Err(Error::Invariant(format!(
                    "{}: recall@{} != accuracy",
                    self.name, m.k
                )));
            }
        }
        // a list holding every model developer finds every known test report
        for f in &self.folds {
            let full = f.model_developers;
            if full <= f.hits.len() && f.hits[full - 1] != f.known_test_reports {
                return Err(Error::Invariant(format!(
                    "{}: fold {} full-list hits {} != {} known test reports",
                    self.name,
                    f.fold,
                    f.hits[full - 1],
                    f.known_test_reports
                )));
            }
        }
        Ok(())
    }
}

/// Vectorizes and reduces the training reports and fits the model.
pub fn train_fold(
    train_reports: &[LabeledReport],
    stoplist: &Stoplist,
    config: &ExperimentConfig,
) -> Result<(TrainedModel, ReductionSummary, usize)> {
    let matrix = build_matrix(train_reports, stoplist)?;
    let (reduced, summary) = reduce(&matrix, &config.reduction)?;
    let model = train(&reduced, config.alpha)?;
    Ok((model, summary, reduced.m()))
}

fn evaluate_fold(
    fold: usize,
    corpus: &[LabeledReport],
    test_ids: &HashSet<u64>,
    stoplist: &Stoplist,
    config: &ExperimentConfig,
) -> Result<FoldResult> {
    let (train_reports, test_reports): (Vec<_>, Vec<_>) = corpus
        .iter()
        .cloned()
        .partition(|r| !test_ids.contains(&r.report_id));
    let (model, reduction, train_rows) = train_fold(&train_reports, stoplist, config)?;
    let list_size = config.k_max.min(model.developers().len());
    let mut hits = vec![0usize; config.k_max];
    let known_test_reports = test_reports
        .iter()
        .filter(|r| model.developers().binary_search(&r.label).is_ok())
        .count();
    for report in &test_reports {
        let tokens = analyze(&report.text, stoplist);
        let list = model.predict_tokens(&tokens, list_size)?;
        if let Some(rank) = list.rank_of(&report.label) {
            hits[rank - 1..].iter_mut().for_each(|h| *h += 1);
        }
    }
    Ok(FoldResult {
        fold,
        train_reports: train_rows,
        train_words: model.vocabulary().len(),
        test_reports: test_reports.len(),
        known_test_reports,
        model_developers: model.developers().len(),
        hits,
        reduction,
    })
}

pub fn run_experiment(
    corpus: &[LabeledReport],
    stoplist: &Stoplist,
    config: &ExperimentConfig,
) -> Result<MetricsReport> {
    let ids: Vec<u64> = corpus.iter().map(|r| r.report_id).collect();
    let plan = make_folds(&ids, config.seed)?;
    run_experiment_with_plan(corpus, &plan, stoplist, config)
}

pub fn run_experiment_with_plan(
    corpus: &[LabeledReport],
    plan: &FoldPlan,
    stoplist: &Stoplist,
    config: &ExperimentConfig,
) -> Result<MetricsReport> {
    if config.k_max == 0 {
        return Err(Error::Parameter("k_max must be at least 1".into()));
    }
    config.reduction.validate()?;
    // folds run one after another; each one parallelizes internally
    let folds = plan
        .folds
        .iter()
        .enumerate()
        .map(|(i, fold)| {
            let test: HashSet<u64> = fold.iter().copied().collect();
            evaluate_fold(i, corpus, &test, stoplist, config).map_err(|e| e.in_fold(i))
        })
        .collect::<Result<Vec<_>>>()?;

    let per_k = (1..=config.k_max)
        .map(|k| {
            let mean = |f: &dyn Fn(&FoldResult) -> f64| {
                folds.iter().map(f).sum::<f64>() / folds.len() as f64
            };
            let accuracy = mean(&|r| r.hits[k - 1] as f64 / r.test_reports as f64);
            let precision = mean(&|r| r.hits[k - 1] as f64 / (r.test_reports * k) as f64);
            KMetrics {
                k,
                accuracy,
                precision,
                recall: accuracy,
            }
        })
        .collect();

    let report = MetricsReport {
        name: config.reduction.order.display_name().to_string(),
        config: *config,
        per_k,
        folds,
    };
    report.check_identities()?;
    Ok(report)
}

/// `k,config,accuracy,precision,recall`, grouped by list size.
pub fn render_csv(reports: &[MetricsReport]) -> String {
    let mut out = String::from("k,config,accuracy,precision,recall\n");
    let k_max = reports.iter().map(|r| r.per_k.len()).max().unwrap_or(0);
    for k in 1..=k_max {
        for r in reports.iter().filter(|r| r.per_k.len() >= k) {
            let m = &r.per_k[k - 1];
            let _ = writeln!(
                out,
                "{},{},{:.4},{:.4},{:.4}",
                k,
                csv_field(&r.name),
                m.accuracy,
                m.precision,
                m.recall
            );
        }
    }
    out
}

/// One report: all three metrics per k. Several: accuracy (in percent) per
/// configuration, in the order given.
pub fn render_markdown(reports: &[MetricsReport]) -> String {
    let mut out = String::new();
    match reports {
        [single] => {
            out.push_str("| k | accuracy | precision | recall |\n|---|---|---|---|\n");
            for m in &single.per_k {
                let _ = writeln!(
                    out,
                    "| {} | {:.4} | {:.4} | {:.4} |",
                    m.k, m.accuracy, m.precision, m.recall
                );
            }
        }
        _ => {
            let _ = write!(out, "| k |");
            for r in reports {
                let _ = write!(out, " {} |", r.name);
            }
            let _ = write!(out, "\n|---|");
            for _ in reports {
                out.push_str("---|");
            }
            out.push('\n');
            let k_max = reports.iter().map(|r| r.per_k.len()).max().unwrap_or(0);
            for k in 1..=k_max {
                let _ = write!(out, "| {k} |");
                for r in reports {
                    match r.per_k.get(k - 1) {
                        Some(m) => {
                            let _ = write!(out, " {:.2} |", 100.0 * m.accuracy);
                        }
                        None => out.push_str("  |"),
                    }
                }
                out.push('\n');
            }
        }
    }
    out
}

/// Precision/recall points per configuration, list size 1 first.
pub fn render_plotdata(reports: &[MetricsReport]) -> String {
    let mut out = String::from("config,k,precision,recall\n");
    for r in reports {
        for m in &r.per_k {
            let _ = writeln!(
                out,
                "{},{},{:.4},{:.4}",
                csv_field(&r.name),
                m.k,
                m.precision,
                m.recall
            );
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Markdown,
    PlotData,
    Json,
}

impl ReportFormat {
    pub const ALL: [ReportFormat; 4] = [
        ReportFormat::Csv,
        ReportFormat::Markdown,
        ReportFormat::PlotData,
        ReportFormat::Json,
    ];

    pub fn file_name(self) -> &'static str {
        match self {
            ReportFormat::Csv => "report.csv",
            ReportFormat::Markdown => "report.md",
            ReportFormat::PlotData => "plotdata.csv",
            ReportFormat::Json => "report.json",
        }
    }
}

/// Writes each format into `dir`; returns the written paths.
pub fn emit_reports(
    reports: &[MetricsReport],
    dir: &Path,
    formats: &[ReportFormat],
) -> Result<Vec<PathBuf>> {
    for r in reports {
        r.check_identities()?;
    }
    let mut written = Vec::new();
    for &format in formats {
        let body = match format {
            ReportFormat::Csv => render_csv(reports),
            ReportFormat::Markdown => render_markdown(reports),
            ReportFormat::PlotData => render_plotdata(reports),
            ReportFormat::Json => serde_json::to_string_pretty(reports)?,
        };
        let path = dir.join(format.file_name());
        write_atomic(&path, body.as_bytes())?;
        written.push(path);
    }
    Ok(written)
}
