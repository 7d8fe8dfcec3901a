//! Exact nearest-neighbor search over sparse term-frequency rows.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vectorize::{SparseVector, TextMatrix};

pub const DEFAULT_K_NN: usize = 3;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    /// `1 - cos(a, b)`; a zero vector is at distance 1 from everything.
    #[default]
    Cosine,
    Euclidean,
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cosine" => Ok(Metric::Cosine),
            "euclidean" => Ok(Metric::Euclidean),
            _ => Err(Error::Parameter(format!("unknown metric `{s}`"))),
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metric::Cosine => "cosine",
            Metric::Euclidean => "euclidean",
        })
    }
}

impl Metric {
    /// Distance from the exact integer dot product and squared norms.
    #[inline]
    pub fn from_products(self, dot: u64, sq_a: u64, sq_b: u64) -> f64 {
        match self {
            Metric::Cosine => {
                if sq_a == 0 || sq_b == 0 {
                    return 1.0;
                }
                let cos = dot as f64 / (sq_a as f64 * sq_b as f64).sqrt();
                (1.0 - cos).max(0.0)
            }
            Metric::Euclidean => ((sq_a + sq_b - 2 * dot) as f64).sqrt(),
        }
    }

    pub fn distance(self, a: &SparseVector, b: &SparseVector) -> f64 {
        self.from_products(dot(a, b), a.squared_norm(), b.squared_norm())
    }
}

pub fn dot(a: &SparseVector, b: &SparseVector) -> u64 {
    let (a, b) = (a.entries(), b.entries());
    let (mut i, mut j, mut acc) = (0, 0, 0u64);
    while i < a.len() && j < b.len() {
        match a[i].0.cmp(&b[j].0) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                acc += u64::from(a[i].1) * u64::from(b[j].1);
                i += 1;
                j += 1;
            }
        }
    }
    acc
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NeighborQuery {
    pub k_nn: usize,
    pub metric: Metric,
}

impl Default for NeighborQuery {
    fn default() -> Self {
        NeighborQuery {
            k_nn: DEFAULT_K_NN,
            metric: Metric::Cosine,
        }
    }
}

impl NeighborQuery {
    pub fn check(&self, instances: usize) -> Result<()> {
        if self.k_nn == 0 || self.k_nn >= instances {
            Err(Error::Parameter(format!(
                "k_nn = {} needs 1 <= k_nn < {instances} instances",
                self.k_nn
            )))
        } else {
            Ok(())
        }
    }
}

/// The `k_nn` rows closest to `query_row`, nearest first; equal distances are
/// ordered by report id. The query row itself is excluded.
pub fn knn(matrix: &TextMatrix, query_row: usize, q: &NeighborQuery) -> Result<Vec<(usize, f64)>> {
    q.check(matrix.m())?;
    if query_row >= matrix.m() {
        return Err(Error::Lookup {
            kind: "row",
            name: query_row.to_string(),
        });
    }
    let rows = matrix.rows();
    let query = &rows[query_row].vector;
    let mut candidates: Vec<(usize, f64)> = rows
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != query_row)
        .map(|(i, r)| (i, q.metric.distance(query, &r.vector)))
        .collect();
    let by_distance_then_id = |x: &(usize, f64), y: &(usize, f64)| {
        x.1.total_cmp(&y.1)
            .then(rows[x.0].report_id.cmp(&rows[y.0].report_id))
    };
    candidates.sort_by(by_distance_then_id);
    candidates.truncate(q.k_nn);
    Ok(candidates)
}

/// Dense symmetric matrix of pairwise distances between the rows of a matrix.
pub struct DistanceMatrix {
    size: usize,
    values: Vec<f64>,
}

impl DistanceMatrix {
    pub fn compute(matrix: &TextMatrix, metric: Metric) -> Self {
        let size = matrix.m();
        let rows = matrix.rows();
        let norms: Vec<u64> = rows.iter().map(|r| r.vector.squared_norm()).collect();
        let width = matrix.n();
        let mut values = vec![0.0; size * size];
        values
            .par_chunks_mut(size.max(1))
            .enumerate()
            .for_each_init(
                || vec![0u32; width],
                |dense, (i, out)| {
                    for (col, c) in rows[i].vector.iter() {
                        dense[col as usize] = c;
                    }
                    for (j, row) in rows.iter().enumerate() {
                        if i == j {
                            out[j] = 0.0;
                            continue;
                        }
                        let dot: u64 = row
                            .vector
                            .iter()
                            .map(|(col, c)| u64::from(dense[col as usize]) * u64::from(c))
                            .sum();
                        out[j] = metric.from_products(dot, norms[i], norms[j]);
                    }
                    for (col, _) in rows[i].vector.iter() {
                        dense[col as usize] = 0;
                    }
                },
            );
        DistanceMatrix { size, values }
    }

    pub fn len(&self) -> usize {
        self.size
    }

    pub fn is_empty(&self) -> bool {
        self.size == 0
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.size + j]
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.size..(i + 1) * self.size]
    }
}
