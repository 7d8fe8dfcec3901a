//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any criterion fails.

mod common;

use std::time::{Duration, Instant};

use triage_reduce::harness::{render_csv, run_experiment, ExperimentConfig, MetricsReport};
use triage_reduce::reduce::{ratio_target, summarize};
use triage_reduce::synth::{generate, SynthConfig};
use triage_reduce::{build_matrix, ingest, LabeledReport, Order, ReductionConfig, Stoplist};

const WORD_RATIO: f64 = 0.30;
const REPORT_RATIO: f64 = 0.50;
const TREND_SEEDS: [u64; 5] = [1, 2, 3, 4, 5];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn secs(d: Duration) -> String {
    format!("{:.1}s", d.as_secs_f64())
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let start = Instant::now();
    let out = f();
    (out, start.elapsed())
}

fn peak_memory_kib() -> Option<u64> {
    let status = std::fs::read_to_string("/proc/self/status").ok()?;
    let line = status.lines().find(|l| l.starts_with("VmHWM:"))?;
    line.split_whitespace().nth(1)?.parse().ok()
}

fn chi_oracle() -> Outcome {
    let (result, took) = timed(|| common::check_chi(200, 101));
    match result {
        Ok(words) => outcome(
            took < Duration::from_secs(10),
            format!(
                "200 matrices, {words} word scores within 1e-9, {}",
                secs(took)
            ),
        ),
        Err(e) => outcome(false, e),
    }
}

fn icf_oracle() -> Outcome {
    let (result, took) = timed(|| common::check_icf(100, 202, |_| 1));
    match result {
        Ok((agreed, reduced)) => outcome(
            took < Duration::from_secs(60),
            format!(
                "{agreed} matrices agree ({reduced} with removals), {}",
                secs(took)
            ),
        ),
        Err(e) => outcome(false, e),
    }
}

fn nb_oracle() -> Outcome {
    match common::check_nb(50, 303) {
        Ok(values) => outcome(
            true,
            format!("50 corpora, {values} log-posteriors within 1e-12 relative"),
        ),
        Err(e) => outcome(false, e),
    }
}

/// All five configurations for every trend seed, in seed-major order.
struct TrendRun {
    reports: Vec<MetricsReport>,
    csv: String,
    took: Duration,
}

fn trend_corpus() -> (Vec<LabeledReport>, usize) {
    let reports = generate(&SynthConfig::default()).expect("synthetic corpus");
    let corpus = ingest(&reports, 10).expect("ingest");
    let developers = corpus.developers.len();
    (corpus.reports, developers)
}

fn run_trend(corpus: &[LabeledReport], k_max: usize) -> TrendRun {
    let stop = Stoplist::english();
    let start = Instant::now();
    let mut reports = Vec::new();
    let mut csv = String::new();
    for seed in TREND_SEEDS {
        let per_seed: Vec<MetricsReport> = Order::ALL
            .iter()
            .map(|&order| {
                let config = ExperimentConfig {
                    reduction: ReductionConfig {
                        word_ratio: WORD_RATIO,
                        report_ratio: REPORT_RATIO,
                        ..ReductionConfig::default()
                    }
                    .with_order(order),
                    k_max,
                    seed,
                    ..ExperimentConfig::default()
                };
                run_experiment(corpus, &stop, &config).expect("experiment")
            })
            .collect();
        csv.push_str(&render_csv(&per_seed));
        reports.extend(per_seed);
    }
    TrendRun {
        reports,
        csv,
        took: start.elapsed(),
    }
}

fn mean_accuracy(run: &TrendRun, order: Order, k: usize) -> f64 {
    let of_order: Vec<f64> = run
        .reports
        .iter()
        .filter(|r| r.config.reduction.order == order)
        .map(|r| r.accuracy(k))
        .collect();
    of_order.iter().sum::<f64>() / of_order.len() as f64
}

fn metric_identities(reports: &[&MetricsReport], developers: usize) -> Outcome {
    let mut exhaustive = 0;
    for r in reports {
        if let Err(e) = r.check_identities() {
            return outcome(false, e.to_string());
        }
        let complete = r.config.k_max == developers
            && r.folds.iter().all(|f| f.model_developers == developers);
        if complete {
            if r.accuracy(developers) != 1.0 {
                return outcome(
                    false,
                    format!(
                        "{}: accuracy@{developers} = {}",
                        r.name,
                        r.accuracy(developers)
                    ),
                );
            }
            exhaustive += 1;
        }
    }
    let origin_and_chi = reports
        .iter()
        .filter(|r| matches!(r.config.reduction.order, Order::None | Order::FsOnly))
        .count();
    outcome(
        exhaustive >= origin_and_chi,
        format!(
            "{} reports checked, accuracy@{developers} == 1 on all {exhaustive} whose models keep every developer",
            reports.len()
        ),
    )
}

fn trend(run: &TrendRun) -> Outcome {
    let acc = |o, k| mean_accuracy(run, o, k);
    let (origin1, chi1, icf1) = (
        acc(Order::None, 1),
        acc(Order::FsOnly, 1),
        acc(Order::IsOnly, 1),
    );
    let origin5 = acc(Order::None, 5);
    let mut detail = format!(
        "acc@1 Origin {origin1:.4} CHI {chi1:.4} ICF {icf1:.4}; acc@5 Origin {origin5:.4} CHI→ICF {:.4} ICF→CHI {:.4}",
        acc(Order::FsIs, 5),
        acc(Order::IsFs, 5)
    );
    let mut pass = chi1 >= origin1 && icf1 <= chi1;
    let mut shortfalls = 0;
    for order in [Order::FsIs, Order::IsFs] {
        pass &= acc(order, 5) >= origin5 - 0.02;
        for r in run
            .reports
            .iter()
            .filter(|r| r.config.reduction.order == order)
        {
            for f in &r.folds {
                let first = &f.reduction.phases[0];
                let is = f.reduction.phase("is").expect("is phase");
                let reports_ok = f.train_reports <= ratio_target(REPORT_RATIO, first.reports_in);
                let words_ok = f.train_words <= ratio_target(WORD_RATIO, first.words_in);
                if !reports_ok && is.icf_log.as_ref().is_some_and(|l| l.shortfall()) {
                    shortfalls += 1;
                } else {
                    pass &= reports_ok;
                }
                pass &= words_ok;
            }
        }
    }
    if shortfalls > 0 {
        detail.push_str(&format!("; {shortfalls} fixpoint shortfalls exempted"));
    }
    detail.push_str(&format!("; {}", secs(run.took)));
    outcome(pass && run.took < Duration::from_secs(120), detail)
}

fn accounting(run: &TrendRun) -> Outcome {
    let mut folds = 0;
    let mut example = String::new();
    for r in run
        .reports
        .iter()
        .filter(|r| r.config.reduction.order == Order::FsIs)
    {
        for f in &r.folds {
            let fs = f.reduction.phase("fs").expect("fs phase");
            let is = f.reduction.phase("is").expect("is phase");
            if fs.words_out != ratio_target(WORD_RATIO, fs.words_in) {
                return outcome(
                    false,
                    format!(
                        "fold {}: kept {} of {} words",
                        f.fold, fs.words_out, fs.words_in
                    ),
                );
            }
            if is.reports_out > ratio_target(REPORT_RATIO, fs.reports_in) {
                return outcome(
                    false,
                    format!(
                        "fold {}: kept {} of {} reports",
                        f.fold, is.reports_out, fs.reports_in
                    ),
                );
            }
            if example.is_empty() {
                let text = summarize(&f.reduction);
                let line = text
                    .lines()
                    .find(|l| l.ends_with("reports removed"))
                    .unwrap_or_default();
                example = format!(
                    "fs kept {}/{} words, is kept {}/{} reports: \"{line}\"",
                    fs.words_out, fs.words_in, is.reports_out, fs.reports_in
                );
            }
            folds += 1;
        }
    }
    outcome(folds > 0, format!("{folds} folds exact; e.g. {example}"))
}

fn scale() -> (Outcome, Option<MetricsReport>) {
    let config = SynthConfig::full_scale(7);
    let reports = generate(&config).expect("synthetic corpus");
    let corpus = ingest(&reports, 10).expect("ingest");
    let words = build_matrix(&corpus.reports, &Stoplist::english())
        .expect("matrix")
        .n();
    let shape_ok =
        corpus.reports.len() == 11_313 && words >= 35_000 && corpus.developers.len() == 267;
    let experiment = ExperimentConfig {
        reduction: ReductionConfig {
            word_ratio: WORD_RATIO,
            report_ratio: REPORT_RATIO,
            ..ReductionConfig::default()
        }
        .with_order(Order::FsIs),
        seed: 1,
        ..ExperimentConfig::default()
    };
    let (result, took) =
        timed(|| run_experiment(&corpus.reports, &Stoplist::english(), &experiment));
    let report = match result {
        Ok(r) => r,
        Err(e) => return (outcome(false, e.to_string()), None),
    };
    let peak = peak_memory_kib();
    let mem_ok = peak.is_some_and(|kib| kib < 4 * 1024 * 1024);
    (
        outcome(
            shape_ok && mem_ok && took < Duration::from_secs(15 * 60),
            format!(
                "{} reports, {words} words, {} developers; FS→IS 5-fold run {} (acc@1 {:.4}), peak memory {} MiB",
                corpus.reports.len(),
                corpus.developers.len(),
                secs(took),
                report.accuracy(1),
                peak.map_or("unknown".into(), |k| (k / 1024).to_string())
            ),
        ),
        Some(report),
    )
}

fn determinism(corpus: &[LabeledReport], k_max: usize, reference: &str) -> Outcome {
    let mut detail = Vec::new();
    let mut pass = true;
    for threads in [1, 4] {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .expect("pool");
        let csv = pool.install(|| run_trend(corpus, k_max).csv);
        pass &= csv == reference;
        detail.push(format!(
            "{threads} thread(s): {}",
            if csv == reference {
                "identical"
            } else {
                "DIFFERENT"
            }
        ));
    }
    outcome(
        pass,
        format!("{} CSV bytes; {}", reference.len(), detail.join(", ")),
    )
}

fn main() {
    let mut lines: Vec<(usize, &str, Outcome)> = Vec::new();
    let mut report = |n, name, o: Outcome| {
        println!(
            "criterion {n} [{name}]: {} ({})",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
        lines.push((n, name, o));
    };

    report(1, "CHI oracle", chi_oracle());
    report(2, "ICF oracle", icf_oracle());
    report(3, "NB oracle", nb_oracle());

    let (corpus, developers) = trend_corpus();
    // lists as long as the developer set, so accuracy@|D| is observable
    let trend_run = run_trend(&corpus, developers);
    let (scale_outcome, scale_report) = scale();

    let mut all: Vec<&MetricsReport> = trend_run.reports.iter().collect();
    all.extend(scale_report.as_ref());
    report(4, "metric identities", metric_identities(&all, developers));
    report(5, "trend", trend(&trend_run));
    report(6, "reduction accounting", accounting(&trend_run));
    report(7, "scale", scale_outcome);
    report(
        8,
        "determinism",
        determinism(&corpus, developers, &trend_run.csv),
    );

    let failed: Vec<usize> = lines
        .iter()
        .filter(|(_, _, o)| !o.pass)
        .map(|(n, _, _)| *n)
        .collect();
    if failed.is_empty() {
        println!("acceptance: all {} criteria passed", lines.len());
    } else {
        println!("acceptance: failed criteria {failed:?}");
        std::process::exit(1);
    }
}
