//! Iterative Case Filtering.
//!
//! Noise filtering by k-NN editing, followed by repeated condensing passes.
//! The reachable (local) set of an instance holds every instance strictly
//! closer to it than its nearest differently-labeled instance, plus the
//! instance itself; the coverage set is the transpose relation. Each pass
//! removes, in one batch, every instance whose reachable set is larger than
//! its coverage set.

use std::collections::BTreeSet;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::neighbors::{DistanceMatrix, Metric, NeighborQuery};
use crate::vectorize::TextMatrix;
#[cfg(test)]
use crate::vectorize::WordCountRow;

/// Instance selection parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IcfParams {
    pub neighbor: NeighborQuery,
    /// How many times the noise filter runs before condensing.
    pub noise_passes: usize,
}

impl Default for IcfParams {
    fn default() -> Self {
        IcfParams {
            neighbor: NeighborQuery::default(),
            noise_passes: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaseSets {
    /// Indexed by matrix row; members are row indices.
    pub reachable: Vec<BTreeSet<usize>>,
    pub coverage: Vec<BTreeSet<usize>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    /// Row count reached the requested target.
    TargetReached,
    /// A condensing pass flagged nothing.
    Fixpoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IterationRecord {
    /// 0 is the noise filter (empty rows and k-NN editing); condensing passes follow.
    pub iteration: usize,
    pub rows_before: usize,
    pub rows_removed: usize,
    pub rows_after: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IcfLog {
    pub target: usize,
    pub iterations: Vec<IterationRecord>,
    pub stop: StopReason,
}

impl IcfLog {
    pub fn final_size(&self) -> usize {
        self.iterations.last().map_or(0, |r| r.rows_after)
    }

    /// True when the fixpoint left more rows than requested.
    pub fn shortfall(&self) -> bool {
        self.final_size() > self.target
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "iteration,rows_before,rows_removed,rows_after")?;
        for r in &self.iterations {
            writeln!(
                out,
                "{},{},{},{}",
                r.iteration, r.rows_before, r.rows_removed, r.rows_after
            )?;
        }
        Ok(())
    }
}

/// Rows of the current (alive) subset, addressed through the full distance matrix.
struct Working<'a> {
    dist: &'a DistanceMatrix,
    labels: Vec<u32>,
    ids: Vec<u64>,
}

impl Working<'_> {
    /// Alive rows whose k-NN majority (among alive rows) disagrees with their
    /// own label. A tie counts as a disagreement.
    fn misclassified(&self, alive: &[usize], k: usize, n_labels: usize) -> Vec<bool> {
        alive
            .par_iter()
            .map_init(
                || (Vec::with_capacity(alive.len()), vec![0usize; n_labels]),
                |(cands, votes), &x| {
                    cands.clear();
                    let row = self.dist.row(x);
                    cands.extend(
                        alive
                            .iter()
                            .filter(|&&y| y != x)
                            .map(|&y| (row[y], self.ids[y], y)),
                    );
                    let cmp = |a: &(f64, u64, usize), b: &(f64, u64, usize)| {
                        a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
                    };
                    if cands.len() > k {
                        cands.select_nth_unstable_by(k - 1, cmp);
                    }
                    votes.iter_mut().for_each(|v| *v = 0);
                    for &(_, _, y) in &cands[..k] {
                        votes[self.labels[y] as usize] += 1;
                    }
                    let own_label = self.labels[x] as usize;
                    let own = votes[own_label];
                    votes
                        .iter()
                        .enumerate()
                        .any(|(l, &v)| l != own_label && v >= own)
                },
            )
            .collect()
    }

    fn enemy_radius(&self, alive: &[usize]) -> Vec<f64> {
        alive
            .par_iter()
            .map(|&x| {
                let row = self.dist.row(x);
                let label = self.labels[x];
                alive
                    .iter()
                    .filter(|&&y| self.labels[y] != label)
                    .map(|&y| row[y])
                    .fold(f64::INFINITY, f64::min)
            })
            .collect()
    }

    /// Flags every alive row with |reachable| > |coverage|.
    fn condense_flags(&self, alive: &[usize]) -> Vec<bool> {
        let radius = self.enemy_radius(alive);
        let reach: Vec<usize> = alive
            .par_iter()
            .enumerate()
            .map(|(xi, &x)| {
                let row = self.dist.row(x);
                let label = self.labels[x];
                1 + alive
                    .iter()
                    .filter(|&&y| y != x && self.labels[y] == label && row[y] < radius[xi])
                    .count()
            })
            .collect();
        // distances are symmetric, so row y gives d(x, y) for every x
        let cover: Vec<usize> = alive
            .par_iter()
            .map(|&y| {
                let row = self.dist.row(y);
                let label = self.labels[y];
                1 + alive
                    .iter()
                    .zip(&radius)
                    .filter(|&(&x, &r)| x != y && self.labels[x] == label && row[x] < r)
                    .count()
            })
            .collect();
        reach.iter().zip(&cover).map(|(r, c)| r > c).collect()
    }
}

fn non_empty_rows(matrix: &TextMatrix) -> Vec<usize> {
    (0..matrix.m())
        .filter(|&i| !matrix.rows()[i].vector.is_empty())
        .collect()
}

fn working<'a>(matrix: &TextMatrix, dist: &'a DistanceMatrix) -> Working<'a> {
    Working {
        dist,
        labels: matrix.rows().iter().map(|r| r.label).collect(),
        ids: matrix.report_ids(),
    }
}

fn noise_filter(
    w: &Working<'_>,
    alive: Vec<usize>,
    q: &NeighborQuery,
    n_labels: usize,
) -> Result<Vec<usize>> {
    q.check(alive.len())?;
    let wrong = w.misclassified(&alive, q.k_nn, n_labels);
    let kept: Vec<usize> = alive
        .into_iter()
        .zip(wrong)
        .filter(|(_, wrong)| !wrong)
        .map(|(x, _)| x)
        .collect();
    if kept.is_empty() {
        return Err(Error::EmptyCorpus(
            "noise filtering removed every report".into(),
        ));
    }
    Ok(kept)
}

fn alive_matrix(matrix: &TextMatrix, alive: &[usize]) -> TextMatrix {
    let mut keep = vec![false; matrix.m()];
    for &i in alive {
        keep[i] = true;
    }
    matrix.retain_rows(|i, _| keep[i])
}

/// One k-NN editing pass. Empty rows are removed first; every other row is
/// voted on against the full (non-empty) input, then all misclassified rows
/// are removed together.
pub fn wilson_edit(matrix: &TextMatrix, q: &NeighborQuery) -> Result<TextMatrix> {
    let dist = DistanceMatrix::compute(matrix, q.metric);
    let w = working(matrix, &dist);
    let alive = noise_filter(&w, non_empty_rows(matrix), q, matrix.developers().len())?;
    Ok(alive_matrix(matrix, &alive))
}

#[allow(clippy::needless_range_loop)] // x and y index both set vectors
pub fn compute_case_sets(matrix: &TextMatrix, metric: Metric) -> CaseSets {
    let m = matrix.m();
    let dist = DistanceMatrix::compute(matrix, metric);
    let w = working(matrix, &dist);
    let alive: Vec<usize> = (0..m).collect();
    let radius = w.enemy_radius(&alive);
    let mut reachable = vec![BTreeSet::new(); m];
    let mut coverage = vec![BTreeSet::new(); m];
    for x in 0..m {
        for y in 0..m {
            if y == x || (w.labels[y] == w.labels[x] && dist.get(x, y) < radius[x]) {
                reachable[x].insert(y);
                coverage[y].insert(x);
            }
        }
    }
    CaseSets {
        reachable,
        coverage,
    }
}

/// Noise filtering followed by condensing passes until at most `m_i` rows
/// remain or a pass removes nothing. Columns left without any count are pruned.
pub fn icf_reduce(
    matrix: &TextMatrix,
    m_i: usize,
    params: &IcfParams,
) -> Result<(TextMatrix, IcfLog)> {
    if m_i == 0 || m_i > matrix.m() {
        return Err(Error::Parameter(format!(
            "report target {m_i} outside 1..={}",
            matrix.m()
        )));
    }
    let q = &params.neighbor;
    let dist = DistanceMatrix::compute(matrix, q.metric);
    let w = working(matrix, &dist);
    let n_labels = matrix.developers().len();

    let mut alive = non_empty_rows(matrix);
    if alive.is_empty() {
        return Err(Error::EmptyCorpus("every report is empty".into()));
    }
    for _ in 0..params.noise_passes {
        alive = noise_filter(&w, alive, q, n_labels)?;
    }
    let mut iterations = vec![IterationRecord {
        iteration: 0,
        rows_before: matrix.m(),
        rows_removed: matrix.m() - alive.len(),
        rows_after: alive.len(),
    }];

    let stop = loop {
        if alive.len() <= m_i {
            break StopReason::TargetReached;
        }
        let flags = w.condense_flags(&alive);
        let removed = flags.iter().filter(|&&f| f).count();
        if removed == 0 {
            break StopReason::Fixpoint;
        }
        let before = alive.len();
        alive = alive
            .into_iter()
            .zip(flags)
            .filter(|(_, f)| !f)
            .map(|(x, _)| x)
            .collect();
        iterations.push(IterationRecord {
            iteration: iterations.len(),
            rows_before: before,
            rows_removed: removed,
            rows_after: alive.len(),
        });
    };

    let reduced = alive_matrix(matrix, &alive).prune_empty_columns();
    Ok((
        reduced,
        IcfLog {
            target: m_i,
            iterations,
            stop,
        },
    ))
}
