//! Execution trace generation: score every acyclic launch-to-target path by
//! its longest common subsequence with the index sequence and keep the best.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::utg::{enumerate_index_paths, NodePath, PathLimits, Utg};

/// Dynamic-programming table of common-subsequence lengths.
///
/// `get(i, j)` is the LCS length of `x[..i]` and `seq[..j]`; row 0 and
/// column 0 are zero.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LcsTable {
    rows: usize,
    cols: usize,
    com: Vec<u32>,
}

impl LcsTable {
    pub fn build<T: PartialEq>(x: &[T], seq: &[T]) -> Self {
        let (rows, cols) = (x.len() + 1, seq.len() + 1);
        let mut com = vec![0u32; rows * cols];
        for i in 1..rows {
            for j in 1..cols {
                let up = com[(i - 1) * cols + j];
                let left = com[i * cols + j - 1];
                com[i * cols + j] = if x[i - 1] == seq[j - 1] {
                    com[(i - 1) * cols + j - 1] + 1
                } else if up >= left {
                    up
                } else {
                    left
                };
            }
        }
        Self { rows, cols, com }
    }

    pub fn get(&self, i: usize, j: usize) -> u32 {
        self.com[i * self.cols + j]
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn length(&self) -> usize {
        self.com[self.rows * self.cols - 1] as usize
    }

    /// Walks back from the bottom-right corner: diagonal on a match, else up
    /// when that keeps the length, else left.
    pub fn witness<T: PartialEq + Clone>(&self, x: &[T], seq: &[T]) -> Vec<T> {
        let (mut i, mut j) = (x.len(), seq.len());
        let mut out = Vec::with_capacity(self.length());
        while i > 0 && j > 0 {
            if x[i - 1] == seq[j - 1] {
                out.push(x[i - 1].clone());
                i -= 1;
                j -= 1;
            } else if self.get(i - 1, j) >= self.get(i, j - 1) {
                i -= 1;
            } else {
                j -= 1;
            }
        }
        out.reverse();
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lcs<T> {
    pub length: usize,
    pub witness: Vec<T>,
    pub table: LcsTable,
}

pub fn lcs<T: PartialEq + Clone>(x: &[T], seq: &[T]) -> Lcs<T> {
    let table = LcsTable::build(x, seq);
    Lcs {
        length: table.length(),
        witness: table.witness(x, seq),
        table,
    }
}

/// LCS length with a two-row table.
pub fn lcs_len<T: PartialEq>(x: &[T], seq: &[T]) -> usize {
    let mut prev = vec![0u32; seq.len() + 1];
    let mut cur = vec![0u32; seq.len() + 1];
    for xi in x {
        for (j, sj) in seq.iter().enumerate() {
            cur[j + 1] = if xi == sj {
                prev[j] + 1
            } else {
                prev[j + 1].max(cur[j])
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[seq.len()] as usize
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutionTrace {
    pub path: NodePath,
    pub lcs: Vec<String>,
    pub lcs_len: usize,
    /// `lcs_len / |index sequence|`.
    pub covered: f64,
    /// Number of candidate paths that were scored.
    pub candidates: usize,
}

impl ExecutionTrace {
    pub fn report(&self) -> TraceReport {
        TraceReport {
            trace: self.path.nodes.clone(),
            actions: self.path.actions(),
            lcs: self.lcs.clone(),
            covered: self.covered,
        }
    }
}

/// On-disk trace JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceReport {
    pub trace: Vec<String>,
    pub actions: Vec<String>,
    pub lcs: Vec<String>,
    pub covered: f64,
}

/// Picks, among all acyclic paths from the launch node to the last index,
/// the one with the longest LCS against `x`; ties go to the shorter path and
/// then to the lexicographically smaller id sequence.
pub fn generate_trace(x: &[String], g: &Utg, limits: PathLimits) -> Result<ExecutionTrace> {
    let last = x.last().ok_or(Error::NoInput)?;
    let ids: Vec<&str> = g.nodes().iter().map(|n| n.id.as_str()).collect();
    let index_of = |id: &str| ids.iter().position(|&n| n == id);
    let target = index_of(last).ok_or_else(|| Error::UnknownNode(last.clone()))?;
    let launch = index_of(g.launch()).expect("launch validated at load");

    // Ids outside the graph can never match; map them to a sentinel.
    let xs: Vec<usize> = x.iter().map(|id| index_of(id).unwrap_or(usize::MAX)).collect();
    let candidates = enumerate_index_paths(g, launch, target, limits)?;
    if candidates.is_empty() {
        return Err(Error::Unreachable(last.clone()));
    }

    let name = |p: &[usize]| -> Vec<&str> { p.iter().map(|&i| ids[i]).collect() };
    let mut best: Option<(usize, &Vec<usize>)> = None;
    for cand in &candidates {
        let score = lcs_len(&xs, cand);
        let better = match best {
            None => true,
            Some((s, b)) => {
                score > s
                    || (score == s
                        && (cand.len() < b.len() || (cand.len() == b.len() && name(cand) < name(b))))
            }
        };
        if better {
            best = Some((score, cand));
        }
    }
    let (_, winner) = best.expect("candidates is non-empty");

    let winner_ids: Vec<String> = name(winner).into_iter().map(String::from).collect();
    let common = lcs(x, &winner_ids);
    let path = g.to_node_path(winner);
    Ok(ExecutionTrace {
        path,
        covered: common.length as f64 / x.len() as f64,
        lcs_len: common.length,
        lcs: common.witness,
        candidates: candidates.len(),
    })
}

/// `2M / T` with `M` the LCS length and `T` the total length; two empty
/// sequences are identical (1.0).
pub fn sequence_similarity<T: PartialEq>(truth: &[T], predicted: &[T]) -> f64 {
    let total = truth.len() + predicted.len();
    if total == 0 {
        return 1.0;
    }
    2.0 * lcs_len(truth, predicted) as f64 / total as f64
}
