//! Singular spectrum analysis.
//!
//! The trajectory matrix X (L x K, column j = samples j..j+L) is never formed.
//! Its left singular vectors are the eigenvectors of the lag-covariance matrix
//! X Xᵀ, and each elementary matrix σᵢUᵢVᵢᵀ equals Uᵢ(XᵀUᵢ)ᵀ, so elementary
//! series are built from Uᵢ and Xᵀ Uᵢ directly. When L > K the problem is solved
//! on the transposed embedding, which has the same elementary series.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::series::TimeSeries;

const MAX_DEFAULT_WINDOW: usize = 128;

/// Default embedding window: min(⌊N/2⌋, 128), at least 2.
pub fn default_window_len(n: usize) -> usize {
    (n / 2).clamp(2, MAX_DEFAULT_WINDOW)
}

/// Eigentriples of a series' trajectory matrix and their elementary series.
#[derive(Debug, Clone, PartialEq)]
pub struct SsaDecomposition {
    pub window_len: usize,
    /// Sorted non-increasing.
    pub singular_values: Vec<f64>,
    /// One elementary reconstructed series per singular value, same order.
    pub components: Vec<Vec<f64>>,
    pub original_len: usize,
}

impl SsaDecomposition {
    /// Sum of the elementary series with the given indices.
    pub fn reconstruct(&self, indices: impl IntoIterator<Item = usize>) -> Vec<f64> {
        let mut out = vec![0.0; self.original_len];
        for i in indices {
            for (o, c) in out.iter_mut().zip(&self.components[i]) {
                *o += c;
            }
        }
        out
    }

    /// Fraction of Σσ² carried by the first `r` eigentriples.
    pub fn energy_fraction(&self, r: usize) -> f64 {
        let total: f64 = self.singular_values.iter().map(|s| s * s).sum();
        if total == 0.0 {
            return 1.0;
        }
        self.singular_values
            .iter()
            .take(r)
            .map(|s| s * s)
            .sum::<f64>()
            / total
    }
}

struct Embedding<'a> {
    x: &'a [f64],
    /// Rows of the (possibly transposed) trajectory matrix.
    rows: usize,
    cols: usize,
    /// (σ, left singular vector) sorted by σ descending.
    triples: Vec<(f64, Vec<f64>)>,
}

impl<'a> Embedding<'a> {
    fn new(x: &'a [f64], window_len: usize) -> Result<Self> {
        let n = x.len();
        if n < 3 {
            return Err(Error::param(format!(
                "SSA needs at least 3 samples, got {n}"
            )));
        }
        if !(window_len > 1 && window_len < n) {
            return Err(Error::param(format!(
                "SSA window length must satisfy 1 < L < N = {n}, got {window_len}"
            )));
        }
        let k = n - window_len + 1;
        let rows = window_len.min(k);
        let cols = n - rows + 1;

        let cov = lag_covariance(x, rows, cols);
        let eigen = SymmetricEigen::new(cov);

        let mut triples: Vec<(f64, f64, Vec<f64>)> = (0..rows)
            .map(|i| {
                let u: Vec<f64> = eigen.eigenvectors.column(i).iter().copied().collect();
                let w = project(x, &u, cols);
                let sigma = w.iter().map(|v| v * v).sum::<f64>().sqrt();
                (sigma, eigen.eigenvalues[i], u)
            })
            .collect();
        triples.sort_by(|a, b| b.0.total_cmp(&a.0).then(b.1.total_cmp(&a.1)));

        Ok(Self {
            x,
            rows,
            cols,
            triples: triples.into_iter().map(|(s, _, u)| (s, u)).collect(),
        })
    }

    fn elementary(&self, i: usize) -> Vec<f64> {
        let u = &self.triples[i].1;
        let w = project(self.x, u, self.cols);
        diagonal_average(u, &w)
    }
}

/// C[i][j] = Σ_k x[i+k] x[j+k] over k < cols, via the Hankel shift recurrence.
fn lag_covariance(x: &[f64], rows: usize, cols: usize) -> DMatrix<f64> {
    let mut c = DMatrix::zeros(rows, rows);
    for j in 0..rows {
        c[(0, j)] = (0..cols).map(|k| x[k] * x[j + k]).sum();
    }
    for i in 1..rows {
        for j in i..rows {
            c[(i, j)] = c[(i - 1, j - 1)] - x[i - 1] * x[j - 1] + x[i - 1 + cols] * x[j - 1 + cols];
        }
    }
    for i in 0..rows {
        for j in 0..i {
            c[(i, j)] = c[(j, i)];
        }
    }
    c
}

/// Xᵀu, length `cols`.
fn project(x: &[f64], u: &[f64], cols: usize) -> Vec<f64> {
    (0..cols)
        .map(|k| u.iter().enumerate().map(|(i, ui)| ui * x[i + k]).sum())
        .collect()
}

/// Hankelization of the rank-one matrix u wᵀ: each output sample is the plain
/// mean of its anti-diagonal.
fn diagonal_average(u: &[f64], w: &[f64]) -> Vec<f64> {
    let n = u.len() + w.len() - 1;
    let mut sums = vec![0.0; n];
    for (i, ui) in u.iter().enumerate() {
        for (k, wk) in w.iter().enumerate() {
            sums[i + k] += ui * wk;
        }
    }
    let short = u.len().min(w.len());
    sums.iter()
        .enumerate()
        .map(|(t, s)| {
            let count = (t + 1).min(short).min(n - t);
            s / count as f64
        })
        .collect()
}

/// Full SSA decomposition with window length `window_len`.
pub fn ssa_decompose(s: &TimeSeries, window_len: usize) -> Result<SsaDecomposition> {
    s.require_finite("ssa_decompose")?;
    let emb = Embedding::new(s.samples(), window_len)?;
    let components = (0..emb.rows).map(|i| emb.elementary(i)).collect();
    Ok(SsaDecomposition {
        window_len,
        singular_values: emb.triples.iter().map(|t| t.0).collect(),
        components,
        original_len: s.len(),
    })
}

/// Reconstruction from the `rank` leading eigentriples. `window_len` defaults
/// to [`default_window_len`].
pub fn ssa_denoise(s: &TimeSeries, window_len: Option<usize>, rank: usize) -> Result<TimeSeries> {
    s.require_finite("ssa_denoise")?;
    if rank == 0 {
        return Err(Error::param("SSA rank must be at least 1"));
    }
    let window_len = window_len.unwrap_or_else(|| default_window_len(s.len()));
    let emb = Embedding::new(s.samples(), window_len)?;
    if rank > emb.rows {
        return Err(Error::param(format!(
            "SSA rank {rank} exceeds the {} available eigentriples",
            emb.rows
        )));
    }
    let mut out = vec![0.0; s.len()];
    for i in 0..rank {
        for (o, c) in out.iter_mut().zip(emb.elementary(i)) {
            *o += c;
        }
    }
    Ok(s.with_samples(out))
}
