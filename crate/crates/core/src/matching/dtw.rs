//! Dynamic time warping with moves {diagonal, up, left} and no global window.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LocalCost {
    /// `|a - b|`
    #[default]
    Absolute,
    /// `(a - b)^2`
    Squared,
}

impl LocalCost {
    #[inline]
    pub fn eval(self, a: f64, b: f64) -> f64 {
        match self {
            LocalCost::Absolute => (a - b).abs(),
            LocalCost::Squared => (a - b) * (a - b),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DtwAlignment {
    pub cost: f64,
    /// Index pairs `(i, j)` from `(0, 0)` to `(n - 1, m - 1)`.
    pub path: Vec<(usize, usize)>,
}

impl DtwAlignment {
    /// Cost divided by the number of aligned pairs.
    pub fn normalized_cost(&self) -> f64 {
        self.cost / self.path.len() as f64
    }
}

/// Accumulated-cost recurrence shared by every DTW variant here. Keeping a
/// single definition makes the row-wise and full-matrix versions agree to
/// the last bit.
#[inline(always)]
fn step(local: f64, diag: f64, up: f64, left: f64) -> f64 {
    local + diag.min(up).min(left)
}

fn require_non_empty(a: &[f64], b: &[f64]) -> Result<()> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::input("DTW needs two non-empty sequences"));
    }
    Ok(())
}

/// Optimal alignment cost and warping path.
pub fn dtw_distance(a: &[f64], b: &[f64]) -> Result<DtwAlignment> {
    dtw_distance_with(a, b, LocalCost::Absolute)
}

pub fn dtw_distance_with(a: &[f64], b: &[f64], local: LocalCost) -> Result<DtwAlignment> {
    require_non_empty(a, b)?;
    let (n, m) = (a.len(), b.len());
    let w = m + 1;
    let mut d = vec![f64::INFINITY; (n + 1) * w];
    d[0] = 0.0;
    for i in 0..n {
        for j in 0..m {
            d[(i + 1) * w + j + 1] = step(
                local.eval(a[i], b[j]),
                d[i * w + j],
                d[i * w + j + 1],
                d[(i + 1) * w + j],
            );
        }
    }

    // Backtrack, preferring the diagonal on ties.
    let mut path = Vec::with_capacity(n + m);
    let (mut i, mut j) = (n, m);
    while i > 0 && j > 0 {
        path.push((i - 1, j - 1));
        let diag = d[(i - 1) * w + j - 1];
        let up = d[(i - 1) * w + j];
        let left = d[i * w + j - 1];
        if diag <= up && diag <= left {
            i -= 1;
            j -= 1;
        } else if up <= left {
            i -= 1;
        } else {
            j -= 1;
        }
    }
    path.reverse();
    Ok(DtwAlignment {
        cost: d[n * w + m],
        path,
    })
}

/// Reusable scratch rows for cost-only DTW.
#[derive(Debug, Default, Clone)]
pub struct DtwBuffer {
    prev: Vec<f64>,
    cur: Vec<f64>,
}

impl DtwBuffer {
    /// Cost-only DTW in O(len(b)) memory, bit-identical to
    /// [`dtw_distance_with`].
    pub fn cost(&mut self, a: &[f64], b: &[f64], local: LocalCost) -> f64 {
        let m = b.len();
        self.prev.clear();
        self.prev.resize(m + 1, f64::INFINITY);
        self.prev[0] = 0.0;
        self.cur.clear();
        self.cur.resize(m + 1, f64::INFINITY);
        for &ai in a {
            self.cur[0] = f64::INFINITY;
            for j in 0..m {
                self.cur[j + 1] = step(
                    local.eval(ai, b[j]),
                    self.prev[j],
                    self.prev[j + 1],
                    self.cur[j],
                );
            }
            std::mem::swap(&mut self.prev, &mut self.cur);
        }
        self.prev[m]
    }
}

pub fn dtw_cost(a: &[f64], b: &[f64], local: LocalCost) -> Result<f64> {
    require_non_empty(a, b)?;
    Ok(DtwBuffer::default().cost(a, b, local))
}

/// Best match of the whole `query` against any contiguous part of `series`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubsequenceMatch {
    pub cost: f64,
    /// Half-open range in `series`.
    pub start: usize,
    pub end: usize,
}

/// Open-begin, open-end DTW: the query must be consumed entirely, the series
/// may be entered and left anywhere. Ties go to the earliest end.
pub fn subsequence_dtw(
    query: &[f64],
    series: &[f64],
    local: LocalCost,
) -> Result<SubsequenceMatch> {
    require_non_empty(query, series)?;
    let m = series.len();
    // Row 0 is free everywhere; the start column travels with the cost.
    let mut prev: Vec<f64> = vec![0.0; m + 1];
    let mut prev_start: Vec<usize> = (0..=m).collect();
    let mut cur = vec![f64::INFINITY; m + 1];
    let mut cur_start = vec![0usize; m + 1];
    for &q in query {
        cur[0] = f64::INFINITY;
        for j in 0..m {
            let (mut best, mut start) = (prev[j], prev_start[j]);
            if prev[j + 1] < best {
                best = prev[j + 1];
                start = prev_start[j + 1];
            }
            if cur[j] < best {
                best = cur[j];
                start = cur_start[j];
            }
            cur[j + 1] = local.eval(q, series[j]) + best;
            cur_start[j + 1] = start;
        }
        std::mem::swap(&mut prev, &mut cur);
        std::mem::swap(&mut prev_start, &mut cur_start);
    }
    let mut end = 1;
    for j in 2..=m {
        if prev[j] < prev[end] {
            end = j;
        }
    }
    Ok(SubsequenceMatch {
        cost: prev[end],
        start: prev_start[end],
        end,
    })
}
