//! Bug-report ingestion: JSONL parsing, duplicate-chain resolution, developer
//! labeling and the inactive-developer filter.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::io::BufRead;
use std::path::Path;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::write_atomic;

pub const CORPUS_FORMAT_VERSION: u32 = 1;
pub const DEFAULT_MIN_FIXED: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Fixed,
    Duplicate,
    Other,
}

/// One raw record from the bug tracker.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BugReport {
    pub id: u64,
    pub summary: String,
    pub description: String,
    pub status: Status,
    pub fixer: Option<String>,
    pub dup_of: Option<u64>,
    pub product: Option<String>,
    pub component: Option<String>,
}

impl BugReport {
    pub fn is_blank(&self) -> bool {
        self.summary.trim().is_empty() && self.description.trim().is_empty()
    }

    fn validate(&self) -> std::result::Result<(), String> {
        if self.id == 0 {
            return Err("id must be a positive integer".into());
        }
        match self.status {
            Status::Duplicate if self.dup_of.is_none() => {
                Err(format!("report {} is a duplicate without dup_of", self.id))
            }
            Status::Fixed if self.fixer.as_deref().is_none_or(str::is_empty) => {
                Err(format!("report {} is fixed without a fixer", self.id))
            }
            _ => Ok(()),
        }
    }
}

/// A report with its developer label; `text` is summary and description joined.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledReport {
    pub report_id: u64,
    pub label: String,
    pub text: String,
}

/// Developers ordered by identifier, with the number of reports each one labels.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeveloperSet {
    pub fix_counts: BTreeMap<String, usize>,
}

impl DeveloperSet {
    pub fn from_labels<'a>(labels: impl IntoIterator<Item = &'a str>) -> Self {
        let mut fix_counts = BTreeMap::new();
        for label in labels {
            *fix_counts.entry(label.to_string()).or_insert(0) += 1;
        }
        DeveloperSet { fix_counts }
    }

    pub fn developers(&self) -> impl Iterator<Item = &str> {
        self.fix_counts.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.fix_counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fix_counts.is_empty()
    }

    pub fn contains(&self, developer: &str) -> bool {
        self.fix_counts.contains_key(developer)
    }

    pub fn min_count(&self) -> Option<usize> {
        self.fix_counts.values().copied().min()
    }

    pub fn max_count(&self) -> Option<usize> {
        self.fix_counts.values().copied().max()
    }
}

/// Reads one [`BugReport`] per non-blank line. Ids must be unique.
pub fn parse_reports<R: BufRead>(reader: R) -> Result<Vec<BugReport>> {
    let mut reports = Vec::new();
    let mut seen = HashSet::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let report: BugReport = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        report.validate().map_err(|message| Error::Parse {
            line: line_no,
            message,
        })?;
        if !seen.insert(report.id) {
            return Err(Error::Integrity(format!(
                "duplicate report id {} on line {line_no}",
                report.id
            )));
        }
        reports.push(report);
    }
    Ok(reports)
}

pub fn read_reports(path: &Path) -> Result<Vec<BugReport>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_reports(std::io::BufReader::new(file))
}

/// Outcome of following a duplicate chain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Resolution<'a> {
    Master(&'a BugReport),
    /// The chain points at an id that is not in the corpus.
    Missing(u64),
    Cycle,
}

impl<'a> Resolution<'a> {
    pub fn master(self) -> Option<&'a BugReport> {
        match self {
            Resolution::Master(r) => Some(r),
            _ => None,
        }
    }
}

/// Follows `dup_of` links until a non-duplicate report is reached.
/// A non-duplicate report resolves to itself.
pub fn resolve_duplicate<'a>(
    report: &'a BugReport,
    corpus: &'a HashMap<u64, BugReport>,
) -> Resolution<'a> {
    let mut visited = HashSet::new();
    let mut current = report;
    while current.status == Status::Duplicate {
        if !visited.insert(current.id) {
            warn!("duplicate chain starting at report {} cycles", report.id);
            return Resolution::Cycle;
        }
        let Some(next_id) = current.dup_of else {
            return Resolution::Missing(current.id);
        };
        match corpus.get(&next_id) {
            Some(next) => current = next,
            None => return Resolution::Missing(next_id),
        }
    }
    Resolution::Master(current)
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelSummary {
    pub input: usize,
    pub labeled: usize,
    pub dropped_blank: usize,
    pub dropped_other_status: usize,
    pub dropped_missing_master: usize,
    pub dropped_cycle: usize,
    pub dropped_no_fixer: usize,
}

pub fn label_corpus(reports: &[BugReport]) -> (Vec<LabeledReport>, LabelSummary) {
    let by_id: HashMap<u64, BugReport> = reports.iter().map(|r| (r.id, r.clone())).collect();
    let mut summary = LabelSummary {
        input: reports.len(),
        ..Default::default()
    };
    let mut labeled = Vec::with_capacity(reports.len());

    for report in reports {
        if report.is_blank() {
            warn!(
                "report {} has no summary or description; dropped",
                report.id
            );
            summary.dropped_blank += 1;
            continue;
        }
        let fixer = match report.status {
            Status::Other => {
                summary.dropped_other_status += 1;
                continue;
            }
            Status::Fixed => report.fixer.as_deref(),
            Status::Duplicate => match resolve_duplicate(report, &by_id) {
                Resolution::Master(master) if master.status == Status::Fixed => {
                    master.fixer.as_deref()
                }
                Resolution::Master(_) => None,
                Resolution::Missing(_) => {
                    summary.dropped_missing_master += 1;
                    continue;
                }
                Resolution::Cycle => {
                    summary.dropped_cycle += 1;
                    continue;
                }
            },
        };
        match fixer.filter(|f| !f.is_empty()) {
            Some(fixer) => labeled.push(LabeledReport {
                report_id: report.id,
                label: fixer.to_string(),
                text: format!("{}\n{}", report.summary, report.description),
            }),
            None => summary.dropped_no_fixer += 1,
        }
    }
    summary.labeled = labeled.len();
    (labeled, summary)
}

/// `(duplicate id, master id)` for every direct `dup_of` link.
pub fn duplicate_pairs(reports: &[BugReport]) -> BTreeSet<(u64, u64)> {
    reports
        .iter()
        .filter(|r| r.status == Status::Duplicate)
        .filter_map(|r| r.dup_of.map(|m| (r.id, m)))
        .collect()
}

/// For every pair whose two members are both present, drops the earlier
/// (smaller) id and keeps the later one.
pub fn drop_early_duplicates(
    labeled: Vec<LabeledReport>,
    dup_pairs: &BTreeSet<(u64, u64)>,
) -> Vec<LabeledReport> {
    let present: HashSet<u64> = labeled.iter().map(|r| r.report_id).collect();
    let removed: HashSet<u64> = dup_pairs
        .iter()
        .filter(|(a, b)| a != b && present.contains(a) && present.contains(b))
        .map(|&(a, b)| a.min(b))
        .collect();
    labeled
        .into_iter()
        .filter(|r| !removed.contains(&r.report_id))
        .collect()
}

/// Single pass: counts are taken once and developers below `min_fixed` are
/// dropped together with their reports.
pub fn filter_inactive_developers(
    labeled: Vec<LabeledReport>,
    min_fixed: usize,
) -> Result<(Vec<LabeledReport>, DeveloperSet)> {
    if min_fixed == 0 {
        return Err(Error::Parameter("min_fixed must be at least 1".into()));
    }
    let counts = DeveloperSet::from_labels(labeled.iter().map(|r| r.label.as_str()));
    let kept: Vec<LabeledReport> = labeled
        .into_iter()
        .filter(|r| counts.fix_counts[&r.label] >= min_fixed)
        .collect();
    if kept.is_empty() {
        return Err(Error::EmptyCorpus(format!(
            "no developer has fixed at least {min_fixed} reports"
        )));
    }
    let developers = DeveloperSet::from_labels(kept.iter().map(|r| r.label.as_str()));
    Ok((kept, developers))
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestSummary {
    pub labeling: LabelSummary,
    pub duplicates_removed: usize,
    pub inactive_removed: usize,
    pub instances: usize,
    pub developers: usize,
}

/// A labeled, filtered corpus ready for experiments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Corpus {
    pub format_version: u32,
    pub min_fixed: usize,
    pub summary: IngestSummary,
    pub developers: DeveloperSet,
    pub reports: Vec<LabeledReport>,
}

/// The full preparation protocol: label, drop early duplicates, drop inactive developers.
pub fn ingest(reports: &[BugReport], min_fixed: usize) -> Result<Corpus> {
    let (labeled, labeling) = label_corpus(reports);
    let before_dedup = labeled.len();
    let deduped = drop_early_duplicates(labeled, &duplicate_pairs(reports));
    let duplicates_removed = before_dedup - deduped.len();
    let before_filter = deduped.len();
    let (kept, developers) = filter_inactive_developers(deduped, min_fixed)?;
    let summary = IngestSummary {
        labeling,
        duplicates_removed,
        inactive_removed: before_filter - kept.len(),
        instances: kept.len(),
        developers: developers.len(),
    };
    Ok(Corpus {
        format_version: CORPUS_FORMAT_VERSION,
        min_fixed,
        summary,
        developers,
        reports: kept,
    })
}

impl Corpus {
    /// Wraps already-labeled reports without the ingestion filters.
    pub fn from_labeled(reports: Vec<LabeledReport>) -> Self {
        let developers = DeveloperSet::from_labels(reports.iter().map(|r| r.label.as_str()));
        Corpus {
            format_version: CORPUS_FORMAT_VERSION,
            min_fixed: 1,
            summary: IngestSummary {
                instances: reports.len(),
                developers: developers.len(),
                ..Default::default()
            },
            developers,
            reports,
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let bytes = serde_json::to_vec(self)?;
        write_atomic(path, &bytes)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        let corpus: Corpus = serde_json::from_slice(&bytes)?;
        if corpus.format_version != CORPUS_FORMAT_VERSION {
            return Err(Error::Integrity(format!(
                "unsupported corpus format version {}",
                corpus.format_version
            )));
        }
        Ok(corpus)
    }
}
