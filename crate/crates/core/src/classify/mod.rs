//! Binary RBF-kernel SVM with stratified cross-validation.

mod svm;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::folds::{stratified_folds, stratified_split};

pub use svm::{
    accuracy, median_heuristic_gamma, rbf_kernel, svm_fit, svm_predict, Kernel, KernelKind,
    Prediction, SvmModel, SvmParams,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub mean_accuracy: f64,
    /// Sample standard deviation across folds.
    pub std_accuracy: f64,
    pub per_fold: Vec<f64>,
}

/// Stratified k-fold cross-validation. Folds are fit concurrently.
pub fn cross_validate(
    m: &FeatureMatrix,
    k: usize,
    seed: u64,
    params: &SvmParams,
) -> Result<CvReport> {
    let (classes, y) = m.label_indices();
    for (c, name) in classes.iter().enumerate() {
        let count = y.iter().filter(|&&v| v == c).count();
        if count < k {
            return Err(Error::param(format!(
                "class {name} has {count} rows, fewer than {k} folds"
            )));
        }
    }
    let folds = stratified_folds(&y, k, seed)?;
    let per_fold = (0..k)
        .into_par_iter()
        .map(|f| {
            let train: Vec<usize> = (0..m.len()).filter(|&i| folds[i] != f).collect();
            let test: Vec<usize> = (0..m.len()).filter(|&i| folds[i] == f).collect();
            let (tr, te) = (m.select_rows(&train), m.select_rows(&test));
            let model = svm_fit(&tr.rows, &tr.labels, params)?;
            accuracy(&model, &te.rows, &te.labels)
        })
        .collect::<Result<Vec<f64>>>()?;
    let mean = per_fold.iter().sum::<f64>() / k as f64;
    let var = per_fold.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (k - 1) as f64;
    Ok(CvReport {
        mean_accuracy: mean,
        std_accuracy: var.sqrt(),
        per_fold,
    })
}

/// Stratified `(train, eval)` split of the matrix rows.
pub fn train_eval_split(
    m: &FeatureMatrix,
    train_fraction: f64,
    seed: u64,
) -> Result<(FeatureMatrix, FeatureMatrix)> {
    let (_, y) = m.label_indices();
    let (train, eval) = stratified_split(&y, train_fraction, seed)?;
    Ok((m.select_rows(&train), m.select_rows(&eval)))
}
