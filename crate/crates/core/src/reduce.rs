//! Two-phase training-set reduction: word selection (FS) and instance
//! selection (IS), in either order.

use std::fmt::{self, Write as _};
use std::str::FromStr;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::chi::{select_top_words, ChiVariant};
use crate::error::{Error, Result};
use crate::icf::{icf_reduce, IcfLog, IcfParams, IterationRecord, StopReason};
use crate::vectorize::TextMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Order {
    None,
    FsOnly,
    IsOnly,
    FsIs,
    IsFs,
}

impl Order {
    /// Column order of the comparison table.
    pub const ALL: [Order; 5] = [
        Order::None,
        Order::FsOnly,
        Order::IsOnly,
        Order::FsIs,
        Order::IsFs,
    ];

    /// Name used in reports.
    pub fn display_name(self) -> &'static str {
        match self {
            Order::None => "Origin",
            Order::FsOnly => "CHI",
            Order::IsOnly => "ICF",
            Order::FsIs => "CHI→ICF",
            Order::IsFs => "ICF→CHI",
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Order::None => "none",
            Order::FsOnly => "fs_only",
            Order::IsOnly => "is_only",
            Order::FsIs => "fs_is",
            Order::IsFs => "is_fs",
        }
    }
}

impl FromStr for Order {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.replace('-', "_").as_str() {
            "none" => Ok(Order::None),
            "fs_only" => Ok(Order::FsOnly),
            "is_only" => Ok(Order::IsOnly),
            "fs_is" => Ok(Order::FsIs),
            "is_fs" => Ok(Order::IsFs),
            _ => Err(Error::Parameter(format!("unknown order `{s}`"))),
        }
    }
}

impl fmt::Display for Order {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReductionConfig {
    pub order: Order,
    /// Fraction of the FS input's words to keep.
    pub word_ratio: f64,
    /// Fraction of the IS input's reports to keep.
    pub report_ratio: f64,
    pub chi_variant: ChiVariant,
    pub icf: IcfParams,
}

impl Default for ReductionConfig {
    fn default() -> Self {
        ReductionConfig {
            order: Order::None,
            word_ratio: 0.30,
            report_ratio: 0.50,
            chi_variant: ChiVariant::Standard,
            icf: IcfParams::default(),
        }
    }
}

/// `ceil(ratio * size)`, at least 1. A tiny slack absorbs products such as
/// `0.3 * 10 = 3.0000000000000004`.
pub fn ratio_target(ratio: f64, size: usize) -> usize {
    let target = (ratio * size as f64 - 1e-9).ceil().max(1.0) as usize;
    target.min(size.max(1))
}

impl ReductionConfig {
    pub fn with_order(self, order: Order) -> Self {
        ReductionConfig { order, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, r) in [
            ("word_ratio", self.word_ratio),
            ("report_ratio", self.report_ratio),
        ] {
            if !(r > 0.0 && r <= 1.0) {
                return Err(Error::Parameter(format!(
                    "{name} must be in (0, 1], got {r}"
                )));
            }
        }
        if self.icf.neighbor.k_nn == 0 {
            return Err(Error::Parameter("k_nn must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseSummary {
    pub name: String,
    pub words_in: usize,
    pub words_out: usize,
    pub reports_in: usize,
    pub reports_out: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub icf_log: Option<IcfLog>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReductionSummary {
    pub order: Order,
    pub phases: Vec<PhaseSummary>,
}

impl ReductionSummary {
    fn totals(&self) -> Option<(usize, usize, usize, usize)> {
        let first = self.phases.first()?;
        let last = self.phases.last()?;
        Some((
            first.words_in,
            last.words_out,
            first.reports_in,
            last.reports_out,
        ))
    }

    pub fn phase(&self, name: &str) -> Option<&PhaseSummary> {
        self.phases.iter().find(|p| p.name == name)
    }
}

fn phase_summary(
    name: &str,
    before: &TextMatrix,
    after: &TextMatrix,
    icf_log: Option<IcfLog>,
) -> PhaseSummary {
    PhaseSummary {
        name: name.to_string(),
        words_in: before.n(),
        words_out: after.n(),
        reports_in: before.m(),
        reports_out: after.m(),
        icf_log,
    }
}

fn run_fs(matrix: &TextMatrix, config: &ReductionConfig) -> Result<TextMatrix> {
    let n_f = ratio_target(config.word_ratio, matrix.n());
    select_top_words(matrix, n_f, config.chi_variant).map_err(|e| e.in_phase("fs"))
}

fn run_is(matrix: &TextMatrix, config: &ReductionConfig) -> Result<(TextMatrix, IcfLog)> {
    let m_i = ratio_target(config.report_ratio, matrix.m());
    if m_i == matrix.m() {
        // nothing to remove beyond reports without words
        let out = matrix.drop_empty_rows();
        if out.m() == 0 {
            return Err(Error::EmptyCorpus("every report is empty".into()).in_phase("is"));
        }
        let log = IcfLog {
            target: m_i,
            iterations: vec![IterationRecord {
                iteration: 0,
                rows_before: matrix.m(),
                rows_removed: matrix.m() - out.m(),
                rows_after: out.m(),
            }],
            stop: StopReason::TargetReached,
        };
        return Ok((out, log));
    }
    let (out, log) = icf_reduce(matrix, m_i, &config.icf).map_err(|e| e.in_phase("is"))?;
    if log.shortfall() {
        warn!(
            "instance selection stopped at a fixpoint with {} reports (target {})",
            log.final_size(),
            log.target
        );
    }
    Ok((out, log))
}

/// Applies the configured phases. Each ratio is taken against the matrix at
/// the input of its own phase.
pub fn reduce(
    matrix: &TextMatrix,
    config: &ReductionConfig,
) -> Result<(TextMatrix, ReductionSummary)> {
    config.validate()?;
    if matrix.m() == 0 {
        return Err(Error::EmptyCorpus("nothing to reduce".into()));
    }
    let mut phases = Vec::new();
    let out = match config.order {
        Order::None => matrix.clone(),
        Order::FsOnly => {
            let fs = run_fs(matrix, config)?;
            phases.push(phase_summary("fs", matrix, &fs, None));
            fs
        }
        Order::IsOnly => {
            let (is, log) = run_is(matrix, config)?;
            phases.push(phase_summary("is", matrix, &is, Some(log)));
            is
        }
        Order::FsIs => {
            let fs = run_fs(matrix, config)?;
            phases.push(phase_summary("fs", matrix, &fs, None));
            // empty rows left by FS are removed inside IS
            let (is, log) = run_is(&fs, config)?;
            phases.push(phase_summary("is", &fs, &is, Some(log)));
            is
        }
        Order::IsFs => {
            let (is, log) = run_is(matrix, config)?;
            phases.push(phase_summary("is", matrix, &is, Some(log)));
            let fs = run_fs(&is, config)?.drop_empty_rows();
            if fs.m() == 0 {
                return Err(
                    Error::EmptyCorpus("no report kept any selected word".into()).in_phase("fs"),
                );
            }
            phases.push(phase_summary("fs", &is, &fs, None));
            fs
        }
    };
    Ok((
        out,
        ReductionSummary {
            order: config.order,
            phases,
        },
    ))
}

fn pct_removed(before: usize, after: usize) -> f64 {
    if before == 0 {
        0.0
    } else {
        100.0 * (before - after) as f64 / before as f64
    }
}

/// Plain-text table of words and reports in/out per phase.
pub fn summarize(summary: &ReductionSummary) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "order: {} ({})",
        summary.order,
        summary.order.display_name()
    );
    let _ = writeln!(
        out,
        "{:<6} {:>9} {:>9} {:>8} {:>11} {:>11} {:>8}",
        "phase", "words_in", "words_out", "removed", "reports_in", "reports_out", "removed"
    );
    let mut line = |name: &str, wi: usize, wo: usize, ri: usize, ro: usize| {
        let _ = writeln!(
            out,
            "{:<6} {:>9} {:>9} {:>7.0}% {:>11} {:>11} {:>7.0}%",
            name,
            wi,
            wo,
            pct_removed(wi, wo),
            ri,
            ro,
            pct_removed(ri, ro)
        );
    };
    for p in &summary.phases {
        line(
            &p.name,
            p.words_in,
            p.words_out,
            p.reports_in,
            p.reports_out,
        );
    }
    let (wi, wo, ri, ro) = summary.totals().unwrap_or((0, 0, 0, 0));
    line("total", wi, wo, ri, ro);
    let _ = writeln!(
        out,
        "{:.0}% words removed, {:.0}% reports removed",
        pct_removed(wi, wo),
        pct_removed(ri, ro)
    );
    for p in &summary.phases {
        if let Some(log) = p.icf_log.as_ref().filter(|l| l.shortfall()) {
            let _ = writeln!(
                out,
                "note: {} phase reached a fixpoint at {} reports (target {})",
                p.name,
                log.final_size(),
                log.target
            );
        }
    }
    out
}
