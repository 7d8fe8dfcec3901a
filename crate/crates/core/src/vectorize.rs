//! Bag-of-words text matrix: one row per bug report, one column per word,
//! raw term frequencies stored sparsely.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::io::Write;
use std::path::Path;

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::LabeledReport;
use crate::error::{Error, Result};

const DEFAULT_STOPWORDS: &str = include_str!("../data/stopwords_en.txt");
const MIN_TOKEN_CHARS: usize = 2;

/// `(report_id, label, [(word, count)])`, the input of [`TextMatrix::from_word_counts`].
pub type WordCountRow<L, W> = (u64, L, Vec<(W, u32)>);

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Stoplist {
    words: HashSet<String>,
}

impl Stoplist {
    pub fn empty() -> Self {
        Self::default()
    }

    /// The English list bundled with the crate.
    pub fn english() -> Self {
        Self::parse(DEFAULT_STOPWORDS)
    }

    /// One word per line; blank lines and `#` comments are ignored.
    pub fn parse(text: &str) -> Self {
        let words = text
            .lines()
            .map(|l| l.split('#').next().unwrap_or("").trim())
            .filter(|w| !w.is_empty())
            .map(str::to_lowercase)
            .collect();
        Stoplist { words }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(Self::parse(&text))
    }

    pub fn contains(&self, word: &str) -> bool {
        self.words.contains(word)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

impl<S: Into<String>> FromIterator<S> for Stoplist {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        Stoplist {
            words: iter.into_iter().map(Into::into).collect(),
        }
    }
}

/// Lowercased maximal runs of alphabetic characters. Anything else separates
/// tokens; tokens shorter than two characters are dropped. No stemming.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphabetic())
        .filter(|run| run.chars().count() >= MIN_TOKEN_CHARS)
        .map(str::to_lowercase)
        .collect()
}

pub fn remove_stopwords(tokens: Vec<String>, stoplist: &Stoplist) -> Vec<String> {
    tokens
        .into_iter()
        .filter(|t| !stoplist.contains(t))
        .collect()
}

pub fn analyze(text: &str, stoplist: &Stoplist) -> Vec<String> {
    remove_stopwords(tokenize(text), stoplist)
}

/// Sparse vector of `(column, count)` pairs, sorted by column, counts ≥ 1.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SparseVector {
    entries: Vec<(u32, u32)>,
}

impl SparseVector {
    /// Builds from arbitrary pairs: sorts, merges repeated columns, drops zeros.
    pub fn from_pairs(pairs: impl IntoIterator<Item = (u32, u32)>) -> Self {
        let mut merged: BTreeMap<u32, u32> = BTreeMap::new();
        for (col, count) in pairs {
            *merged.entry(col).or_insert(0) += count;
        }
        SparseVector {
            entries: merged.into_iter().filter(|&(_, c)| c > 0).collect(),
        }
    }

    pub fn entries(&self) -> &[(u32, u32)] {
        &self.entries
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        self.entries.iter().copied()
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn total(&self) -> u64 {
        self.entries.iter().map(|&(_, c)| u64::from(c)).sum()
    }

    pub fn get(&self, col: u32) -> u32 {
        self.entries
            .binary_search_by_key(&col, |&(c, _)| c)
            .map_or(0, |i| self.entries[i].1)
    }

    pub fn squared_norm(&self) -> u64 {
        self.entries
            .iter()
            .map(|&(_, c)| u64::from(c) * u64::from(c))
            .sum()
    }

    pub fn scaled(&self, factor: u32) -> Self {
        SparseVector {
            entries: self
                .entries
                .iter()
                .map(|&(col, c)| (col, c * factor))
                .filter(|&(_, c)| c > 0)
                .collect(),
        }
    }

    /// Maps every column through `mapping`; columns mapped to `None` are dropped.
    /// `mapping` must be monotone on the kept columns.
    fn remap(&self, mapping: &[Option<u32>]) -> Self {
        SparseVector {
            entries: self
                .entries
                .iter()
                .filter_map(|&(col, c)| mapping[col as usize].map(|new| (new, c)))
                .collect(),
        }
    }
}

/// Sorted list of distinct words with a reverse index.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct Vocabulary {
    words: Vec<String>,
    index: HashMap<String, u32>,
}

impl From<Vec<String>> for Vocabulary {
    fn from(mut words: Vec<String>) -> Self {
        words.sort();
        words.dedup();
        let index = words
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), i as u32))
            .collect();
        Vocabulary { words, index }
    }
}

impl From<Vocabulary> for Vec<String> {
    fn from(v: Vocabulary) -> Self {
        v.words
    }
}

impl Vocabulary {
    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn word(&self, col: u32) -> &str {
        &self.words[col as usize]
    }

    pub fn column(&self, word: &str) -> Option<u32> {
        self.index.get(word).copied()
    }

    /// Term-frequency vector of `tokens`; words outside the vocabulary are ignored.
    pub fn vectorize<S: AsRef<str>>(&self, tokens: &[S]) -> SparseVector {
        SparseVector::from_pairs(
            tokens
                .iter()
                .filter_map(|t| self.column(t.as_ref()))
                .map(|col| (col, 1)),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Row {
    pub report_id: u64,
    /// Index into [`TextMatrix::developers`].
    pub label: u32,
    pub vector: SparseVector,
}

/// Labeled term-frequency matrix. The developer list is the label space and
/// stays fixed when rows are removed; a developer may end up with no rows.
#[derive(Debug, Clone, PartialEq)]
pub struct TextMatrix {
    rows: Vec<Row>,
    vocabulary: Vocabulary,
    developers: Vec<String>,
}

impl TextMatrix {
    pub fn new(rows: Vec<Row>, vocabulary: Vocabulary, developers: Vec<String>) -> Result<Self> {
        if developers.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Integrity(
                "developers must be strictly sorted".into(),
            ));
        }
        let n = vocabulary.len() as u32;
        let mut ids = HashSet::with_capacity(rows.len());
        for row in &rows {
            if !ids.insert(row.report_id) {
                return Err(Error::Integrity(format!(
                    "report {} appears twice",
                    row.report_id
                )));
            }
            if row.label as usize >= developers.len() {
                return Err(Error::Integrity(format!(
                    "report {} has an unknown label",
                    row.report_id
                )));
            }
            if row.vector.entries.iter().any(|&(c, _)| c >= n) {
                return Err(Error::Integrity(format!(
                    "report {} references a column outside the vocabulary",
                    row.report_id
                )));
            }
        }
        Ok(TextMatrix {
            rows,
            vocabulary,
            developers,
        })
    }

    /// Convenience constructor from `(report_id, label, [(word, count)])` triples.
    pub fn from_word_counts<L, W>(rows: &[WordCountRow<L, W>]) -> Result<Self>
    where
        L: AsRef<str>,
        W: AsRef<str>,
    {
        let words: BTreeSet<String> = rows
            .iter()
            .flat_map(|(_, _, counts)| counts.iter().map(|(w, _)| w.as_ref().to_string()))
            .collect();
        let vocabulary = Vocabulary::from(words.into_iter().collect::<Vec<_>>());
        let developers: Vec<String> = rows
            .iter()
            .map(|(_, l, _)| l.as_ref().to_string())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let out_rows = rows
            .iter()
            .map(|(id, label, counts)| Row {
                report_id: *id,
                label: developers
                    .binary_search(&label.as_ref().to_string())
                    .unwrap() as u32,
                vector: SparseVector::from_pairs(
                    counts
                        .iter()
                        .map(|(w, c)| (vocabulary.column(w.as_ref()).unwrap(), *c)),
                ),
            })
            .collect();
        TextMatrix::new(out_rows, vocabulary, developers)
    }

    pub fn m(&self) -> usize {
        self.rows.len()
    }

    pub fn n(&self) -> usize {
        self.vocabulary.len()
    }

    pub fn rows(&self) -> &[Row] {
        &self.rows
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocabulary
    }

    pub fn developers(&self) -> &[String] {
        &self.developers
    }

    pub fn developer(&self, label: u32) -> &str {
        &self.developers[label as usize]
    }

    pub fn developer_index(&self, name: &str) -> Option<u32> {
        self.developers
            .binary_search_by(|d| d.as_str().cmp(name))
            .ok()
            .map(|i| i as u32)
    }

    pub fn label_of(&self, row: usize) -> &str {
        self.developer(self.rows[row].label)
    }

    /// Rows per developer, indexed like [`Self::developers`].
    pub fn developer_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.developers.len()];
        for row in &self.rows {
            counts[row.label as usize] += 1;
        }
        counts
    }

    pub fn report_ids(&self) -> Vec<u64> {
        self.rows.iter().map(|r| r.report_id).collect()
    }

    /// Keeps the rows whose index satisfies `keep`; vocabulary is unchanged.
    pub fn retain_rows(&self, mut keep: impl FnMut(usize, &Row) -> bool) -> TextMatrix {
        TextMatrix {
            rows: self
                .rows
                .iter()
                .enumerate()
                .filter(|(i, r)| keep(*i, r))
                .map(|(_, r)| r.clone())
                .collect(),
            vocabulary: self.vocabulary.clone(),
            developers: self.developers.clone(),
        }
    }

    /// Projects every row onto the given columns. Rows that lose all their
    /// words are kept.
    pub fn select_columns(&self, columns: &BTreeSet<u32>) -> TextMatrix {
        let mut mapping = vec![None; self.n()];
        let mut words = Vec::with_capacity(columns.len());
        for (new, &old) in columns.iter().enumerate() {
            mapping[old as usize] = Some(new as u32);
            words.push(self.vocabulary.word(old).to_string());
        }
        TextMatrix {
            rows: self
                .rows
                .iter()
                .map(|r| Row {
                    report_id: r.report_id,
                    label: r.label,
                    vector: r.vector.remap(&mapping),
                })
                .collect(),
            vocabulary: Vocabulary::from(words),
            developers: self.developers.clone(),
        }
    }

    /// Columns with at least one nonzero count.
    pub fn used_columns(&self) -> BTreeSet<u32> {
        self.rows
            .iter()
            .flat_map(|r| r.vector.entries.iter().map(|&(c, _)| c))
            .collect()
    }

    pub fn prune_empty_columns(&self) -> TextMatrix {
        let used = self.used_columns();
        if used.len() == self.n() {
            return self.clone();
        }
        self.select_columns(&used)
    }

    pub fn drop_empty_rows(&self) -> TextMatrix {
        self.retain_rows(|_, r| !r.vector.is_empty())
    }

    /// Sparse triplet export: header `report_id,label,word,count`, one line
    /// per nonzero cell in row order.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "report_id,label,word,count")?;
        for row in &self.rows {
            for (col, count) in row.vector.iter() {
                writeln!(
                    out,
                    "{},{},{},{}",
                    row.report_id,
                    csv_field(self.developer(row.label)),
                    self.vocabulary.word(col),
                    count
                )?;
            }
        }
        Ok(())
    }
}

pub(crate) fn csv_field(s: &str) -> std::borrow::Cow<'_, str> {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\"")).into()
    } else {
        s.into()
    }
}

/// Builds the term-frequency matrix. The vocabulary is the sorted union of
/// all post-stopword tokens; reports with no surviving token are dropped.
pub fn build_matrix(labeled: &[LabeledReport], stoplist: &Stoplist) -> Result<TextMatrix> {
    if labeled.is_empty() {
        return Err(Error::EmptyCorpus("no reports to vectorize".into()));
    }
    let tokenized: Vec<Vec<String>> = labeled
        .par_iter()
        .map(|r| analyze(&r.text, stoplist))
        .collect();

    let mut kept = Vec::with_capacity(labeled.len());
    for (report, tokens) in labeled.iter().zip(&tokenized) {
        if tokens.is_empty() {
            warn!(
                "report {} has no words after stopword removal; dropped",
                report.report_id
            );
        } else {
            kept.push((report, tokens));
        }
    }
    if kept.is_empty() {
        return Err(Error::EmptyCorpus(
            "every report is empty after stopword removal".into(),
        ));
    }

    let words: BTreeSet<&str> = kept
        .iter()
        .flat_map(|(_, tokens)| tokens.iter().map(String::as_str))
        .collect();
    let vocabulary = Vocabulary::from(words.into_iter().map(str::to_string).collect::<Vec<_>>());
    let developers: Vec<String> = kept
        .iter()
        .map(|(r, _)| r.label.as_str())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .map(str::to_string)
        .collect();

    let rows = kept
        .par_iter()
        .map(|(report, tokens)| Row {
            report_id: report.report_id,
            label: developers
                .binary_search_by(|d| d.as_str().cmp(&report.label))
                .expect("label collected above") as u32,
            vector: vocabulary.vectorize(tokens),
        })
        .collect();
    TextMatrix::new(rows, vocabulary, developers)
}
