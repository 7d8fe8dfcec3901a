//! Independent reference implementations and random fixtures shared by the
//! integration tests. Nothing here calls into the library's algorithms; the
//! oracles work on plain dense rows.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use triage_reduce::neighbors::Metric;
use triage_reduce::vectorize::WordCountRow;
use triage_reduce::TextMatrix;

/// A labeled dense row: `counts[j]` is the count of word `words[j]`.
#[derive(Debug, Clone)]
pub struct DenseRow {
    pub id: u64,
    pub label: String,
    pub counts: Vec<u32>,
}

#[derive(Debug, Clone)]
pub struct Dense {
    pub words: Vec<String>,
    pub rows: Vec<DenseRow>,
}

impl Dense {
    pub fn to_matrix(&self) -> TextMatrix {
        let triples: Vec<WordCountRow<String, String>> = self
            .rows
            .iter()
            .map(|r| {
                let counts = r
                    .counts
                    .iter()
                    .enumerate()
                    .filter(|(_, &c)| c > 0)
                    .map(|(j, &c)| (self.words[j].clone(), c))
                    .collect();
                (r.id, r.label.clone(), counts)
            })
            .collect();
        TextMatrix::from_word_counts(&triples).expect("valid fixture")
    }

    /// Words that occur in at least one row.
    pub fn used_words(&self) -> Vec<usize> {
        (0..self.words.len())
            .filter(|&j| self.rows.iter().any(|r| r.counts[j] > 0))
            .collect()
    }
}

/// Random matrix with up to `max_rows` rows, `max_words` words and
/// `classes` labels. Counts are small so distance ties are common.
pub fn random_dense(
    rng: &mut ChaCha8Rng,
    max_rows: usize,
    max_words: usize,
    classes: usize,
    density: f64,
) -> Dense {
    let rows = rng.gen_range(classes.max(2)..=max_rows);
    let n = rng.gen_range(1..=max_words);
    let words = (0..n).map(|j| format!("w{j:02}")).collect();
    let mut ids: Vec<u64> = (1..=rows as u64 * 3).collect();
    rand::seq::SliceRandom::shuffle(ids.as_mut_slice(), rng);
    let rows = (0..rows)
        .map(|i| DenseRow {
            id: ids[i],
            // the first rows cover every class
            label: format!(
                "d{}",
                if i < classes {
                    i
                } else {
                    rng.gen_range(0..classes)
                }
            ),
            counts: (0..n)
                .map(|_| {
                    if rng.gen_bool(density) {
                        rng.gen_range(1..=3)
                    } else {
                        0
                    }
                })
                .collect(),
        })
        .collect();
    Dense { words, rows }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

// ---------------------------------------------------------------- CHI

/// Pearson statistic of the 2×2 presence table as Σ (O − E)² / E over the
/// four cells, maximized over labels. Zero when any marginal is zero.
pub fn chi_oracle(dense: &Dense, word: usize) -> f64 {
    let labels: BTreeSet<&str> = dense.rows.iter().map(|r| r.label.as_str()).collect();
    let m = dense.rows.len() as f64;
    let mut best = f64::NEG_INFINITY;
    for label in labels {
        let mut table = [[0.0f64; 2]; 2]; // [has word][own label]
        for r in &dense.rows {
            let has = usize::from(r.counts[word] > 0);
            let own = usize::from(r.label == label);
            table[has][own] += 1.0;
        }
        let row_sums = [table[0][0] + table[0][1], table[1][0] + table[1][1]];
        let col_sums = [table[0][0] + table[1][0], table[0][1] + table[1][1]];
        let stat = if row_sums.contains(&0.0) || col_sums.contains(&0.0) {
            0.0
        } else {
            let mut s = 0.0;
            for i in 0..2 {
                for j in 0..2 {
                    let expected = row_sums[i] * col_sums[j] / m;
                    s += (table[i][j] - expected).powi(2) / expected;
                }
            }
            s
        };
        best = best.max(stat);
    }
    best
}

// ---------------------------------------------------------------- ICF

fn distance(metric: Metric, a: &[u32], b: &[u32]) -> f64 {
    let dot: u64 = a
        .iter()
        .zip(b)
        .map(|(&x, &y)| u64::from(x) * u64::from(y))
        .sum();
    let na: u64 = a.iter().map(|&x| u64::from(x) * u64::from(x)).sum();
    let nb: u64 = b.iter().map(|&x| u64::from(x) * u64::from(x)).sum();
    match metric {
        Metric::Cosine => {
            if na == 0 || nb == 0 {
                1.0
            } else {
                (1.0 - dot as f64 / (na as f64 * nb as f64).sqrt()).max(0.0)
            }
        }
        Metric::Euclidean => ((na + nb - 2 * dot) as f64).sqrt(),
    }
}

/// Literal ICF: drop empty rows, k-NN edit `noise_passes` times, then
/// condense until at most `target` rows remain or nothing is flagged.
/// Returns the surviving report ids, or `None` where the library must fail
/// (too few rows for k-NN, or editing removed everything).
pub fn icf_oracle(
    dense: &Dense,
    target: usize,
    k: usize,
    noise_passes: usize,
    metric: Metric,
) -> Option<BTreeSet<u64>> {
    let rows = &dense.rows;
    let d = |x: usize, y: usize| distance(metric, &rows[x].counts, &rows[y].counts);
    let mut alive: Vec<usize> = (0..rows.len())
        .filter(|&i| rows[i].counts.iter().any(|&c| c > 0))
        .collect();
    if alive.is_empty() {
        return None;
    }

    for _ in 0..noise_passes {
        if alive.len() <= k {
            return None;
        }
        let mut keep = Vec::new();
        for &x in &alive {
            let mut others: Vec<usize> = alive.iter().copied().filter(|&y| y != x).collect();
            others.sort_by(|&a, &b| {
                d(x, a)
                    .partial_cmp(&d(x, b))
                    .unwrap()
                    .then(rows[a].id.cmp(&rows[b].id))
            });
            let mut votes: BTreeMap<&str, usize> = BTreeMap::new();
            for &y in &others[..k] {
                *votes.entry(rows[y].label.as_str()).or_default() += 1;
            }
            let top = votes.values().copied().max().unwrap();
            let winners: Vec<&str> = votes
                .iter()
                .filter(|(_, &v)| v == top)
                .map(|(l, _)| *l)
                .collect();
            if winners == [rows[x].label.as_str()] {
                keep.push(x);
            }
        }
        if keep.is_empty() {
            return None;
        }
        alive = keep;
    }

    while alive.len() > target {
        let mut reachable: BTreeMap<usize, BTreeSet<usize>> = BTreeMap::new();
        for &x in &alive {
            let enemy = alive
                .iter()
                .filter(|&&y| rows[y].label != rows[x].label)
                .map(|&y| d(x, y))
                .fold(f64::INFINITY, f64::min);
            let mut set = BTreeSet::from([x]);
            for &y in &alive {
                if rows[y].label == rows[x].label && d(x, y) < enemy {
                    set.insert(y);
                }
            }
            reachable.insert(x, set);
        }
        let mut coverage: BTreeMap<usize, BTreeSet<usize>> =
            alive.iter().map(|&x| (x, BTreeSet::new())).collect();
        for (&x, set) in &reachable {
            for &y in set {
                coverage.get_mut(&y).unwrap().insert(x);
            }
        }
        let survivors: Vec<usize> = alive
            .iter()
            .copied()
            .filter(|x| reachable[x].len() <= coverage[x].len())
            .collect();
        if survivors.len() == alive.len() {
            break;
        }
        alive = survivors;
    }
    Some(alive.iter().map(|&x| rows[x].id).collect())
}

// ---------------------------------------------------------------- Naive Bayes

pub fn rational(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite")
}

/// `ln(P(d) · Π P(w|d)^count)` with every factor kept as an exact rational.
/// `train` and `query` are word-count maps; out-of-vocabulary query words
/// are ignored. Keys of the result are the developers with training rows.
pub fn nb_oracle(
    train: &[(String, BTreeMap<String, u32>)],
    query: &BTreeMap<String, u32>,
    alpha: f64,
) -> BTreeMap<String, f64> {
    let vocab: BTreeSet<&String> = train.iter().flat_map(|(_, c)| c.keys()).collect();
    let n = BigRational::from_integer(BigInt::from(vocab.len()));
    let alpha = rational(alpha);
    let m = BigRational::from_integer(BigInt::from(train.len()));
    let developers: BTreeSet<&String> = train.iter().map(|(d, _)| d).collect();
    let mut out = BTreeMap::new();
    for dev in developers {
        let docs = train.iter().filter(|(d, _)| d == dev).count();
        let mut product = BigRational::from_integer(BigInt::from(docs)) / &m;
        let mut per_word: BTreeMap<&String, u64> = BTreeMap::new();
        for (_, counts) in train.iter().filter(|(d, _)| d == dev) {
            for (w, &c) in counts {
                *per_word.entry(w).or_default() += u64::from(c);
            }
        }
        let total = BigRational::from_integer(BigInt::from(per_word.values().sum::<u64>()));
        let denom = total + &alpha * &n;
        for (w, &c) in query {
            if !vocab.contains(w) {
                continue;
            }
            let count =
                BigRational::from_integer(BigInt::from(per_word.get(w).copied().unwrap_or(0)));
            let p = (count + &alpha) / &denom;
            for _ in 0..c {
                product *= &p;
            }
        }
        assert!(
            product > BigRational::from_integer(BigInt::from(0)) && product <= BigRational::one()
        );
        out.insert(dev.clone(), product.to_f64().expect("representable").ln());
    }
    out
}

// ---------------------------------------------------------------- drivers

use triage_reduce::chi::{chi_score, score_all};
use triage_reduce::icf::{icf_reduce, IcfParams};
use triage_reduce::neighbors::NeighborQuery;
use triage_reduce::{train, ChiVariant};

/// CHI on `cases` random matrices (≤50 rows, ≤30 words, ≤5 classes) against
/// [`chi_oracle`] at 1e-9 absolute. Matrices without any word are redrawn. Returns the number of words compared.
pub fn check_chi(cases: usize, seed: u64) -> Result<usize, String> {
    let mut rng = rng(seed);
    let mut compared = 0;
    for case in 0..cases {
        let dense = loop {
            let classes = rng.gen_range(1..=5);
            let density = rng.gen_range(0.05..0.6);
            let dense = random_dense(&mut rng, 50, 30, classes, density);
            if !dense.used_words().is_empty() {
                break dense;
            }
        };
        let matrix = dense.to_matrix();
        let all = score_all(&matrix, ChiVariant::Standard);
        for j in dense.used_words() {
            let col = matrix.vocabulary().column(&dense.words[j]).unwrap();
            let expected = chi_oracle(&dense, j);
            let got = chi_score(&matrix, col, ChiVariant::Standard).unwrap().score;
            if (got - expected).abs() > 1e-9 || (all[col as usize].score - expected).abs() > 1e-9 {
                return Err(format!(
                    "case {case}, word {}: {got} vs oracle {expected}",
                    dense.words[j]
                ));
            }
            compared += 1;
        }
    }
    Ok(compared)
}

/// `icf_reduce` on `cases` random 2–4-class matrices (≤100 rows) against
/// [`icf_oracle`]. `target` maps the row count to the requested size.
/// Returns how many cases agreed and how many of those removed rows.
pub fn check_icf(
    cases: usize,
    seed: u64,
    target: impl Fn(usize) -> usize,
) -> Result<(usize, usize), String> {
    let mut rng = rng(seed);
    let mut agreed = 0;
    let mut reduced = 0;
    for case in 0..cases {
        let dense = loop {
            let classes = rng.gen_range(2..=4);
            let density = rng.gen_range(0.1..0.5);
            let dense = random_dense(&mut rng, 100, 12, classes, density);
            if !dense.used_words().is_empty() {
                break dense;
            }
        };
        let metric = if case % 3 == 2 {
            Metric::Euclidean
        } else {
            Metric::Cosine
        };
        let k = [1, 3, 3, 5][case % 4];
        let noise_passes = if case % 5 == 4 { 2 } else { 1 };
        let m_i = target(dense.rows.len()).clamp(1, dense.rows.len());
        let expected = icf_oracle(&dense, m_i, k, noise_passes, metric);
        let params = IcfParams {
            neighbor: NeighborQuery { k_nn: k, metric },
            noise_passes,
        };
        let got = icf_reduce(&dense.to_matrix(), m_i, &params)
            .ok()
            .map(|(m, _)| m.report_ids().into_iter().collect::<BTreeSet<u64>>());
        if got != expected {
            return Err(format!(
                "case {case} (k={k}, {metric:?}, passes={noise_passes}, target {m_i}): {got:?} vs oracle {expected:?}"
            ));
        }
        agreed += 1;
        reduced += usize::from(expected.is_some_and(|ids| ids.len() < dense.rows.len()));
    }
    Ok((agreed, reduced))
}

/// Log-posteriors on `cases` corpora of at most 8 rows against
/// [`nb_oracle`] at 1e-12 relative. Returns the number of values compared.
pub fn check_nb(cases: usize, seed: u64) -> Result<usize, String> {
    let mut rng = rng(seed);
    let words = ["alpha", "beta", "gamma", "delta", "omega", "sigma"];
    let mut compared = 0;
    for case in 0..cases {
        let rows = rng.gen_range(1..=8);
        let mut train_rows: Vec<(String, BTreeMap<String, u32>)> = (0..rows)
            .map(|_| {
                let counts = words
                    .iter()
                    .filter_map(|w| {
                        if rng.gen_bool(0.4) {
                            Some((w.to_string(), rng.gen_range(1..=4)))
                        } else {
                            None
                        }
                    })
                    .collect();
                (format!("dev{}", rng.gen_range(0..3)), counts)
            })
            .collect();
        train_rows[0].1.entry("alpha".into()).or_insert(1);
        let alpha = [1.0, 0.5, 0.25, 2.0][case % 4];
        let triples: Vec<WordCountRow<String, String>> = train_rows
            .iter()
            .enumerate()
            .map(|(i, (d, c))| {
                (
                    i as u64 + 1,
                    d.clone(),
                    c.iter().map(|(w, &n)| (w.clone(), n)).collect(),
                )
            })
            .collect();
        let model = train(&TextMatrix::from_word_counts(&triples).unwrap(), alpha)
            .map_err(|e| e.to_string())?;

        let mut query: BTreeMap<String, u32> = words
            .iter()
            .filter_map(|w| {
                if rng.gen_bool(0.5) {
                    Some((w.to_string(), rng.gen_range(1..=3)))
                } else {
                    None
                }
            })
            .collect();
        query.insert("unseen".into(), 2);
        let tokens: Vec<&str> = query
            .iter()
            .flat_map(|(w, &c)| std::iter::repeat_n(w.as_str(), c as usize))
            .collect();
        let got = model.log_posteriors(&model.vocabulary().vectorize(&tokens));
        let expected = nb_oracle(&train_rows, &query, alpha);
        if expected.len() != model.developers().len() {
            return Err(format!("case {case}: developer sets differ"));
        }
        for (dev, g) in model.developers().iter().zip(&got) {
            let e = expected[dev];
            if (g - e).abs() > 1e-12 * e.abs().max(f64::MIN_POSITIVE) {
                return Err(format!("case {case}, {dev}: {g} vs oracle {e}"));
            }
            compared += 1;
        }
    }
    Ok(compared)
}
