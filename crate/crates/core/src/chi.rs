//! χ² word scoring against developers and top-n word selection.
//!
//! Each word is scored by the largest χ² statistic over all developers,
//! computed from document-level presence counts.

use std::collections::BTreeSet;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vectorize::{csv_field, TextMatrix};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChiVariant {
    /// `m (AD - CB)^2 / ((A+C)(B+D)(A+B)(C+D))`
    #[default]
    Standard,
    /// Same with the numerator left unsquared; may be negative.
    AsPrinted,
}

impl FromStr for ChiVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "standard" => Ok(ChiVariant::Standard),
            "as_printed" | "as-printed" => Ok(ChiVariant::AsPrinted),
            _ => Err(Error::Parameter(format!("unknown chi variant `{s}`"))),
        }
    }
}

impl fmt::Display for ChiVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ChiVariant::Standard => "standard",
            ChiVariant::AsPrinted => "as_printed",
        })
    }
}

/// 2×2 document counts for one (word, developer) pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ContingencyCounts {
    /// labeled with the developer, containing the word
    pub a: u64,
    /// other developers, containing the word
    pub b: u64,
    /// labeled with the developer, lacking the word
    pub c: u64,
    /// other developers, lacking the word
    pub d: u64,
}

impl ContingencyCounts {
    /// From the word's document frequency within the developer (`a`) and
    /// overall (`df`), the developer's row count and the matrix size.
    fn from_frequencies(a: u64, df: u64, class_rows: u64, m: u64) -> Self {
        let b = df - a;
        let c = class_rows - a;
        ContingencyCounts {
            a,
            b,
            c,
            d: m - a - b - c,
        }
    }

    pub fn total(&self) -> u64 {
        self.a + self.b + self.c + self.d
    }

    /// Zero when any marginal is zero.
    pub fn statistic(&self, variant: ChiVariant) -> f64 {
        let ContingencyCounts { a, b, c, d } = *self;
        let denom = [(a + c), (b + d), (a + b), (c + d)];
        if denom.contains(&0) {
            return 0.0;
        }
        let m = self.total() as f64;
        let diff = (a * d) as f64 - (c * b) as f64;
        let numerator = match variant {
            ChiVariant::Standard => diff * diff,
            ChiVariant::AsPrinted => diff,
        };
        let denom: f64 = denom.iter().map(|&x| x as f64).product();
        m * numerator / denom
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChiScore {
    pub word: String,
    pub score: f64,
    pub argmax_developer: String,
}

fn check_column(matrix: &TextMatrix, word: u32) -> Result<()> {
    if (word as usize) < matrix.n() {
        Ok(())
    } else {
        Err(Error::Lookup {
            kind: "word column",
            name: word.to_string(),
        })
    }
}

pub fn contingency(matrix: &TextMatrix, word: u32, developer: u32) -> Result<ContingencyCounts> {
    check_column(matrix, word)?;
    if developer as usize >= matrix.developers().len() {
        return Err(Error::Lookup {
            kind: "developer",
            name: developer.to_string(),
        });
    }
    let mut a = 0;
    let mut df = 0;
    let mut class_rows = 0;
    for row in matrix.rows() {
        let present = row.vector.get(word) > 0;
        let own = row.label == developer;
        df += u64::from(present);
        a += u64::from(present && own);
        class_rows += u64::from(own);
    }
    Ok(ContingencyCounts::from_frequencies(
        a,
        df,
        class_rows,
        matrix.m() as u64,
    ))
}

/// Maximum over developers; the first developer (in id order) wins ties.
fn max_over_developers(
    per_developer_df: &[u64],
    df: u64,
    class_rows: &[u64],
    m: u64,
    variant: ChiVariant,
) -> (f64, usize) {
    let mut best = (f64::NEG_INFINITY, 0);
    for (dev, (&a, &rows)) in per_developer_df.iter().zip(class_rows).enumerate() {
        let s = ContingencyCounts::from_frequencies(a, df, rows, m).statistic(variant);
        if s > best.0 {
            best = (s, dev);
        }
    }
    best
}

pub fn chi_score(matrix: &TextMatrix, word: u32, variant: ChiVariant) -> Result<ChiScore> {
    check_column(matrix, word)?;
    let class_rows: Vec<u64> = matrix
        .developer_counts()
        .iter()
        .map(|&c| c as u64)
        .collect();
    let mut per_dev = vec![0u64; class_rows.len()];
    let mut df = 0;
    for row in matrix.rows() {
        if row.vector.get(word) > 0 {
            per_dev[row.label as usize] += 1;
            df += 1;
        }
    }
    let (score, dev) = max_over_developers(&per_dev, df, &class_rows, matrix.m() as u64, variant);
    Ok(ChiScore {
        word: matrix.vocabulary().word(word).to_string(),
        score,
        argmax_developer: matrix.developer(dev as u32).to_string(),
    })
}

/// Scores for every column, in column order.
pub fn score_all(matrix: &TextMatrix, variant: ChiVariant) -> Vec<ChiScore> {
    let n_dev = matrix.developers().len();
    let m = matrix.m() as u64;
    let class_rows: Vec<u64> = matrix
        .developer_counts()
        .iter()
        .map(|&c| c as u64)
        .collect();

    // labels of the rows containing each word
    let mut postings: Vec<Vec<u32>> = vec![Vec::new(); matrix.n()];
    for row in matrix.rows() {
        for (col, _) in row.vector.iter() {
            postings[col as usize].push(row.label);
        }
    }

    postings
        .par_iter()
        .enumerate()
        .map_init(
            || vec![0u64; n_dev],
            |per_dev, (col, labels)| {
                per_dev.iter_mut().for_each(|x| *x = 0);
                for &l in labels {
                    per_dev[l as usize] += 1;
                }
                let (score, dev) =
                    max_over_developers(per_dev, labels.len() as u64, &class_rows, m, variant);
                ChiScore {
                    word: matrix.vocabulary().word(col as u32).to_string(),
                    score,
                    argmax_developer: matrix.developer(dev as u32).to_string(),
                }
            },
        )
        .collect()
}

/// Column ids ordered best first: descending score, then ascending word.
pub fn rank_columns(scores: &[ChiScore]) -> Vec<u32> {
    let mut order: Vec<u32> = (0..scores.len() as u32).collect();
    order.sort_by(|&x, &y| {
        let (sx, sy) = (&scores[x as usize], &scores[y as usize]);
        sy.score
            .total_cmp(&sx.score)
            .then_with(|| sx.word.cmp(&sy.word))
    });
    order
}

/// Keeps the `n_f` best-scoring words. Rows left without words are retained.
pub fn select_top_words(
    matrix: &TextMatrix,
    n_f: usize,
    variant: ChiVariant,
) -> Result<TextMatrix> {
    if n_f == 0 || n_f > matrix.n() {
        return Err(Error::Parameter(format!(
            "word count {n_f} outside 1..={}",
            matrix.n()
        )));
    }
    if n_f == matrix.n() {
        return Ok(matrix.clone());
    }
    let scores = score_all(matrix, variant);
    let keep: BTreeSet<u32> = rank_columns(&scores).into_iter().take(n_f).collect();
    Ok(matrix.select_columns(&keep))
}

/// `word,score,argmax_developer`, best first.
pub fn write_scores_csv<W: Write>(scores: &[ChiScore], mut out: W) -> std::io::Result<()> {
    writeln!(out, "word,score,argmax_developer")?;
    for col in rank_columns(scores) {
        let s = &scores[col as usize];
        writeln!(
            out,
            "{},{},{}",
            s.word,
            s.score,
            csv_field(&s.argmax_developer)
        )?;
    }
    Ok(())
}
