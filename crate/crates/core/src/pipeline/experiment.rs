//! Feature selection and classifier validation on a labeled dataset.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::classify::{accuracy, cross_validate, svm_fit, train_eval_split, CvReport, SvmModel};
use crate::error::{Error, Result};
use crate::features::{
    extract_features, lda_rank_all, select_top2, FeatureMatrix, FeatureSelection, LdaOptions,
};
use crate::ingest::MERGED_RATE_HZ;
use crate::matching::LabeledDataset;
use crate::pipeline::config::PipelineConfig;

pub const MODEL_FORMAT: &str = "emg-autolabel/model";
pub const MODEL_VERSION: u32 = 1;

/// Everything a trained classifier needs at prediction time, plus how it
/// was validated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelBundle {
    pub format: String,
    pub version: u32,
    pub config_hash: String,
    /// Features are log-normalized before selection.
    pub selection: FeatureSelection,
    pub model: SvmModel,
    pub cv: CvReport,
    pub train_rows: usize,
    pub train_accuracy: f64,
    pub eval_rows: usize,
    pub eval_accuracy: f64,
}

impl ModelBundle {
    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn read_json(path: impl AsRef<Path>) -> Result<Self> {
        let b: Self = serde_json::from_slice(&std::fs::read(path)?)?;
        if b.format != MODEL_FORMAT || b.version != MODEL_VERSION {
            return Err(Error::Format {
                line: 1,
                message: format!("unsupported model file {} v{}", b.format, b.version),
            });
        }
        Ok(b)
    }

    /// Accuracy on a raw (not yet normalized) feature matrix.
    pub fn score(&self, raw: &FeatureMatrix) -> Result<f64> {
        let m = self.selection.apply(&raw.log_normalize()?)?;
        accuracy(&self.model, &m.rows, &m.labels)
    }
}

/// Feature matrix of a labeled dataset at the merged sample rate.
pub fn featurize(config: &PipelineConfig, dataset: &LabeledDataset) -> Result<FeatureMatrix> {
    extract_features(dataset, MERGED_RATE_HZ, &config.features)
}

/// Log-normalizes, splits off a stratified held-out set, ranks features
/// with LDA on the training part only, keeps the top two per channel, then
/// cross-validates and fits the SVM on the training part and scores it on
/// the held-out part.
pub fn train_model(config: &PipelineConfig, raw: &FeatureMatrix) -> Result<ModelBundle> {
    let c = &config.classifier;
    let m = raw.log_normalize()?;
    let (train, eval) = train_eval_split(&m, c.train_fraction, config.seed)?;
    let lda = LdaOptions {
        folds: c.folds,
        seed: config.seed,
    };
    let selection = select_top2(&lda_rank_all(&train, lda)?)?;
    let train = selection.apply(&train)?;
    let eval = selection.apply(&eval)?;
    let params = c.svm_params();
    let cv = cross_validate(&train, c.folds, config.seed, &params)?;
    let model = svm_fit(&train.rows, &train.labels, &params)?;
    let train_accuracy = accuracy(&model, &train.rows, &train.labels)?;
    let eval_accuracy = accuracy(&model, &eval.rows, &eval.labels)?;
    Ok(ModelBundle {
        format: MODEL_FORMAT.into(),
        version: MODEL_VERSION,
        config_hash: config.hash(),
        selection,
        model,
        cv,
        train_rows: train.len(),
        train_accuracy,
        eval_rows: eval.len(),
        eval_accuracy,
    })
}
