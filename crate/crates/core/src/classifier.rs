//! Multinomial Naive Bayes developer recommender.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::write_atomic;
use crate::vectorize::{SparseVector, TextMatrix, Vocabulary};

pub const MODEL_FORMAT_VERSION: u32 = 1;
pub const DEFAULT_ALPHA: f64 = 1.0;

/// Trained on term frequencies with additive smoothing. Developers without
/// training rows are not part of the model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "ModelFile", try_from = "ModelFile")]
pub struct TrainedModel {
    developers: Vec<String>,
    doc_counts: Vec<u64>,
    token_counts: Vec<SparseVector>,
    token_totals: Vec<u64>,
    vocabulary: Vocabulary,
    alpha: f64,
    priors: Vec<f64>,
    /// `ln P(word | developer)`, developer-major.
    log_likelihoods: Vec<f64>,
}

/// On-disk form: counts only, probabilities are recomputed on load.
#[derive(Serialize, Deserialize)]
struct ModelFile {
    format_version: u32,
    alpha: f64,
    vocabulary: Vocabulary,
    developers: Vec<String>,
    doc_counts: Vec<u64>,
    token_counts: Vec<SparseVector>,
}

impl From<TrainedModel> for ModelFile {
    fn from(m: TrainedModel) -> Self {
        ModelFile {
            format_version: MODEL_FORMAT_VERSION,
            alpha: m.alpha,
            vocabulary: m.vocabulary,
            developers: m.developers,
            doc_counts: m.doc_counts,
            token_counts: m.token_counts,
        }
    }
}

impl TryFrom<ModelFile> for TrainedModel {
    type Error = Error;

    fn try_from(f: ModelFile) -> Result<Self> {
        if f.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::Integrity(format!(
                "unsupported model format version {}",
                f.format_version
            )));
        }
        if f.developers.len() != f.doc_counts.len() || f.developers.len() != f.token_counts.len() {
            return Err(Error::Integrity(
                "model tables have mismatched lengths".into(),
            ));
        }
        TrainedModel::from_counts(
            f.developers,
            f.doc_counts,
            f.token_counts,
            f.vocabulary,
            f.alpha,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recommendation {
    pub developer: String,
    pub log_posterior: f64,
}

/// Developers by descending log-posterior; equal scores in ascending id order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecommendationList {
    pub entries: Vec<Recommendation>,
}

impl RecommendationList {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// 1-based position of `developer`, if listed.
    pub fn rank_of(&self, developer: &str) -> Option<usize> {
        self.entries
            .iter()
            .position(|e| e.developer == developer)
            .map(|p| p + 1)
    }

    pub fn developers(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.developer.as_str())
    }
}

pub fn train(matrix: &TextMatrix, alpha: f64) -> Result<TrainedModel> {
    if matrix.m() == 0 {
        return Err(Error::EmptyCorpus("cannot train on an empty matrix".into()));
    }
    let n_dev = matrix.developers().len();
    let mut doc_counts = vec![0u64; n_dev];
    let mut pairs: Vec<Vec<(u32, u32)>> = vec![Vec::new(); n_dev];
    for row in matrix.rows() {
        doc_counts[row.label as usize] += 1;
        pairs[row.label as usize].extend(row.vector.iter());
    }
    let mut developers = Vec::new();
    let mut kept_docs = Vec::new();
    let mut token_counts = Vec::new();
    for (dev, (docs, pairs)) in doc_counts.into_iter().zip(pairs).enumerate() {
        if docs > 0 {
            developers.push(matrix.developer(dev as u32).to_string());
            kept_docs.push(docs);
            token_counts.push(SparseVector::from_pairs(pairs));
        }
    }
    TrainedModel::from_counts(
        developers,
        kept_docs,
        token_counts,
        matrix.vocabulary().clone(),
        alpha,
    )
}

impl TrainedModel {
    fn from_counts(
        developers: Vec<String>,
        doc_counts: Vec<u64>,
        token_counts: Vec<SparseVector>,
        vocabulary: Vocabulary,
        alpha: f64,
    ) -> Result<Self> {
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(Error::Parameter(format!(
                "alpha must be positive, got {alpha}"
            )));
        }
        if vocabulary.is_empty() {
            return Err(Error::EmptyCorpus("cannot train without any word".into()));
        }
        if developers.is_empty() || developers.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Integrity(
                "model developers must be non-empty and strictly sorted".into(),
            ));
        }
        let n = vocabulary.len();
        let docs_total: u64 = doc_counts.iter().sum();
        let priors: Vec<f64> = doc_counts
            .iter()
            .map(|&c| c as f64 / docs_total as f64)
            .collect();
        let token_totals: Vec<u64> = token_counts.iter().map(SparseVector::total).collect();

        let mut log_likelihoods = Vec::with_capacity(developers.len() * n);
        for (counts, &total) in token_counts.iter().zip(&token_totals) {
            let log_denominator = (total as f64 + alpha * n as f64).ln();
            let base = log_likelihoods.len();
            log_likelihoods.extend(std::iter::repeat_n(alpha.ln() - log_denominator, n));
            for (col, c) in counts.iter() {
                if col as usize >= n {
                    return Err(Error::Integrity(
                        "token count outside the vocabulary".into(),
                    ));
                }
                log_likelihoods[base + col as usize] = (c as f64 + alpha).ln() - log_denominator;
            }
        }

        Ok(TrainedModel {
            developers,
            doc_counts,
            token_counts,
            token_totals,
            vocabulary,
            alpha,
            priors,
            log_likelihoods,
        })
    }

    pub fn developers(&self) -> &[String] {
        &self.developers
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocabulary
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn priors(&self) -> &[f64] {
        &self.priors
    }

    pub fn likelihood(&self, developer: usize, word: u32) -> f64 {
        self.log_likelihoods[developer * self.vocabulary.len() + word as usize].exp()
    }

    /// `ln P(d) + Σ count(w) ln P(w | d)` for every model developer.
    /// `vector` must be indexed by this model's vocabulary.
    pub fn log_posteriors(&self, vector: &SparseVector) -> Vec<f64> {
        let n = self.vocabulary.len();
        self.priors
            .iter()
            .enumerate()
            .map(|(dev, prior)| {
                let table = &self.log_likelihoods[dev * n..(dev + 1) * n];
                prior.ln()
                    + vector
                        .iter()
                        .filter(|&(col, _)| (col as usize) < n)
                        .map(|(col, c)| f64::from(c) * table[col as usize])
                        .sum::<f64>()
            })
            .collect()
    }

    /// Posteriors normalized to sum to one.
    pub fn posteriors(&self, vector: &SparseVector) -> Vec<f64> {
        let logs = self.log_posteriors(vector);
        let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
        let sum: f64 = exps.iter().sum();
        exps.into_iter().map(|e| e / sum).collect()
    }

    pub fn predict(&self, vector: &SparseVector, k: usize) -> Result<RecommendationList> {
        if k == 0 || k > self.developers.len() {
            return Err(Error::Parameter(format!(
                "list size {k} outside 1..={}",
                self.developers.len()
            )));
        }
        let logs = self.log_posteriors(vector);
        let mut order: Vec<usize> = (0..logs.len()).collect();
        order.sort_by(|&a, &b| logs[b].total_cmp(&logs[a]).then(a.cmp(&b)));
        Ok(RecommendationList {
            entries: order
                .into_iter()
                .take(k)
                .map(|d| Recommendation {
                    developer: self.developers[d].clone(),
                    log_posterior: logs[d],
                })
                .collect(),
        })
    }

    /// Like [`Self::predict`], for raw tokens; unknown words are ignored.
    pub fn predict_tokens<S: AsRef<str>>(
        &self,
        tokens: &[S],
        k: usize,
    ) -> Result<RecommendationList> {
        self.predict(&self.vocabulary.vectorize(tokens), k)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, &serde_json::to_vec(self)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_slice(&bytes)?)
    }
}
