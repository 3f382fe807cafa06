//! Single-feature LDA scored by stratified cross-validation, and per-channel
//! top-2 selection.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{Column, FeatureId, FeatureMatrix};
use crate::folds::stratified_folds;

pub const MIN_ROWS_PER_CLASS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct LdaOptions {
    pub folds: usize,
    pub seed: u64,
}

impl Default for LdaOptions {
    fn default() -> Self {
        Self { folds: 5, seed: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LdaScore {
    pub feature: FeatureId,
    pub accuracy: f64,
    /// The feature was constant; its accuracy is fixed at 0.5.
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelRanking {
    /// 1-based EMG channel.
    pub channel: usize,
    /// Best first; ties keep feature order.
    pub scores: Vec<LdaScore>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSelection {
    pub rankings: Vec<ChannelRanking>,
    /// Two columns per channel, in channel order.
    pub chosen: Vec<Column>,
}

impl FeatureSelection {
    pub fn apply(&self, m: &FeatureMatrix) -> Result<FeatureMatrix> {
        m.select_columns(&self.chosen)
    }
}

/// Gaussian classifier with a shared variance on one feature.
struct Lda {
    means: Vec<f64>,
    log_priors: Vec<f64>,
    var: f64,
}

impl Lda {
    fn fit(x: &[f64], y: &[usize], classes: usize) -> Self {
        let mut sums = vec![0.0; classes];
        let mut counts = vec![0usize; classes];
        for (&v, &c) in x.iter().zip(y) {
            sums[c] += v;
            counts[c] += 1;
        }
        let means: Vec<f64> = sums
            .iter()
            .zip(&counts)
            .map(|(s, &n)| if n > 0 { s / n as f64 } else { f64::NAN })
            .collect();
        let within: f64 = x.iter().zip(y).map(|(&v, &c)| (v - means[c]).powi(2)).sum();
        let present = counts.iter().filter(|&&n| n > 0).count();
        let dof = (x.len().saturating_sub(present)).max(1) as f64;
        let total_mean = x.iter().sum::<f64>() / x.len() as f64;
        let total_var = x.iter().map(|v| (v - total_mean).powi(2)).sum::<f64>() / x.len() as f64;
        // Zero within-class spread is fine (perfectly separated classes);
        // keep the variance positive so the discriminant stays finite.
        let var = (within / dof).max(1e-12 * total_var).max(f64::MIN_POSITIVE);
        let log_priors = counts
            .iter()
            .map(|&n| {
                if n > 0 {
                    (n as f64 / x.len() as f64).ln()
                } else {
                    f64::NEG_INFINITY
                }
            })
            .collect();
        Self {
            means,
            log_priors,
            var,
        }
    }

    fn predict(&self, v: f64) -> usize {
        let mut best = (f64::NEG_INFINITY, 0);
        for (c, (&m, &lp)) in self.means.iter().zip(&self.log_priors).enumerate() {
            if lp == f64::NEG_INFINITY {
                continue;
            }
            let score = -(v - m).powi(2) / (2.0 * self.var) + lp;
            if score > best.0 {
                best = (score, c);
            }
        }
        best.1
    }
}

fn check_classes(y: &[usize]) -> Result<usize> {
    let classes = y.iter().max().map_or(0, |m| m + 1);
    let mut counts = vec![0usize; classes];
    for &c in y {
        counts[c] += 1;
    }
    let present: Vec<usize> = counts.into_iter().filter(|&n| n > 0).collect();
    if present.len() < 2 {
        return Err(Error::InvalidTrainingSet(
            "LDA needs at least two classes".into(),
        ));
    }
    if present.iter().any(|&n| n < MIN_ROWS_PER_CLASS) {
        return Err(Error::InvalidTrainingSet(format!(
            "LDA needs at least {MIN_ROWS_PER_CLASS} rows per class"
        )));
    }
    Ok(classes)
}

/// Cross-validated accuracy of LDA on a single feature, pooled over all
/// held-out rows. Returns `(accuracy, degenerate)`.
pub fn lda_cv_accuracy(x: &[f64], y: &[usize], options: LdaOptions) -> Result<(f64, bool)> {
    if x.len() != y.len() {
        return Err(Error::input("feature and label lengths differ"));
    }
    let classes = check_classes(y)?;
    if x.iter().all(|&v| v == x[0]) {
        return Ok((0.5, true));
    }
    let folds = stratified_folds(y, options.folds, options.seed)?;
    let mut correct = 0usize;
    for k in 0..options.folds {
        let (mut tx, mut ty) = (Vec::new(), Vec::new());
        for i in (0..x.len()).filter(|&i| folds[i] != k) {
            tx.push(x[i]);
            ty.push(y[i]);
        }
        let model = Lda::fit(&tx, &ty, classes);
        correct += (0..x.len())
            .filter(|&i| folds[i] == k && model.predict(x[i]) == y[i])
            .count();
    }
    Ok((correct as f64 / x.len() as f64, false))
}

/// Ranks the ten features of one channel.
pub fn lda_rank(m: &FeatureMatrix, channel: usize, options: LdaOptions) -> Result<ChannelRanking> {
    let (_, y) = m.label_indices();
    let mut scores = Vec::with_capacity(FeatureId::ALL.len());
    for feature in FeatureId::ALL {
        let col = m.column_index(Column { channel, feature }).ok_or_else(|| {
            Error::input(format!(
                "feature matrix has no column ch{channel}_{}",
                feature.name()
            ))
        })?;
        let x: Vec<f64> = m.rows.iter().map(|r| r[col]).collect();
        let (accuracy, degenerate) = lda_cv_accuracy(&x, &y, options)?;
        scores.push(LdaScore {
            feature,
            accuracy,
            degenerate,
        });
    }
    // Stable sort keeps feature order among equal accuracies.
    scores.sort_by(|a, b| b.accuracy.total_cmp(&a.accuracy));
    Ok(ChannelRanking { channel, scores })
}

/// Ranks every channel present in the matrix, in channel order.
pub fn lda_rank_all(m: &FeatureMatrix, options: LdaOptions) -> Result<Vec<ChannelRanking>> {
    let mut channels: Vec<usize> = m.columns.iter().map(|c| c.channel).collect();
    channels.sort_unstable();
    channels.dedup();
    channels
        .par_iter()
        .map(|&c| lda_rank(m, c, options))
        .collect()
}

/// The two best features of each channel.
pub fn select_top2(rankings: &[ChannelRanking]) -> Result<FeatureSelection> {
    let mut rankings = rankings.to_vec();
    rankings.sort_by_key(|r| r.channel);
    let mut chosen = Vec::with_capacity(2 * rankings.len());
    for r in &rankings {
        if r.scores.len() < 2 {
            return Err(Error::input(format!(
                "channel {} has fewer than 2 ranked features",
                r.channel
            )));
        }
        chosen.extend(r.scores[..2].iter().map(|s| Column {
            channel: r.channel,
            feature: s.feature,
        }));
    }
    Ok(FeatureSelection { rankings, chosen })
}
