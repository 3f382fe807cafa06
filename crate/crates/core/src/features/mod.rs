//! EMG features per channel and segment, log normalization, and LDA-based
//! feature selection.

mod compute;
mod lda;

use std::io::{Read, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::EMG_CHANNELS;
use crate::matching::LabeledDataset;

pub use compute::{
    compute_all, compute_feature, Epsilon, FeatureParams, Periodogram, MIN_SEGMENT_LEN,
};
pub use lda::{
    lda_cv_accuracy, lda_rank, lda_rank_all, select_top2, ChannelRanking, FeatureSelection,
    LdaOptions, LdaScore, MIN_ROWS_PER_CLASS,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureId {
    /// Median frequency.
    Mdf,
    /// Root mean square.
    Rms,
    /// Zero crossing rate.
    Zcr,
    /// Willison amplitude.
    Wa,
    /// Mean power spectral density.
    Psd,
    /// Slope sign changes.
    Ssc,
    /// Spectral centroid.
    Sc,
    /// Probability mass of the fullest amplitude histogram bin.
    Pdf,
    /// Normalized spectral entropy.
    Se,
    /// Normalized singular-value entropy of the delay embedding.
    Svd,
}

impl FeatureId {
    pub const ALL: [FeatureId; 10] = [
        FeatureId::Mdf,
        FeatureId::Rms,
        FeatureId::Zcr,
        FeatureId::Wa,
        FeatureId::Psd,
        FeatureId::Ssc,
        FeatureId::Sc,
        FeatureId::Pdf,
        FeatureId::Se,
        FeatureId::Svd,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FeatureId::Mdf => "mdf",
            FeatureId::Rms => "rms",
            FeatureId::Zcr => "zcr",
            FeatureId::Wa => "wa",
            FeatureId::Psd => "psd",
            FeatureId::Ssc => "ssc",
            FeatureId::Sc => "sc",
            FeatureId::Pdf => "pdf",
            FeatureId::Se => "se",
            FeatureId::Svd => "svd",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|f| f.name() == name)
    }
}

/// A feature of one EMG channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Column {
    /// 1-based.
    pub channel: usize,
    pub feature: FeatureId,
}

impl Column {
    pub fn name(&self) -> String {
        format!("ch{}_{}", self.channel, self.feature.name())
    }

    pub fn parse(name: &str) -> Option<Self> {
        let (ch, feat) = name.strip_prefix("ch")?.split_once('_')?;
        Some(Self {
            channel: ch.parse().ok()?,
            feature: FeatureId::from_name(feat)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub columns: Vec<Column>,
    pub rows: Vec<Vec<f64>>,
    pub labels: Vec<String>,
}

/// All ten features of every channel of every segment; columns are channel
/// major.
pub fn extract_features(
    dataset: &LabeledDataset,
    sample_rate_hz: f64,
    params: &FeatureParams,
) -> Result<FeatureMatrix> {
    params.validate()?;
    let columns: Vec<Column> = (1..=EMG_CHANNELS)
        .flat_map(|channel| FeatureId::ALL.map(|feature| Column { channel, feature }))
        .collect();
    let rows = dataset
        .segments
        .par_iter()
        .enumerate()
        .map(|(i, seg)| {
            let mut row = Vec::with_capacity(columns.len());
            for (c, x) in seg.emg.iter().enumerate() {
                let v = compute_all(x, sample_rate_hz, params).map_err(|e| {
                    Error::input(format!(
                        "segment {i} ({}) channel {}: {e}",
                        seg.action,
                        c + 1
                    ))
                })?;
                row.extend_from_slice(&v);
            }
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FeatureMatrix {
        columns,
        rows,
        labels: dataset.segments.iter().map(|s| s.action.clone()).collect(),
    })
}

impl FeatureMatrix {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn column_index(&self, col: Column) -> Option<usize> {
        self.columns.iter().position(|&c| c == col)
    }

    /// Sorted distinct labels and each row's index into them.
    pub fn label_indices(&self) -> (Vec<String>, Vec<usize>) {
        let mut classes = self.labels.clone();
        classes.sort();
        classes.dedup();
        let idx = self
            .labels
            .iter()
            .map(|l| classes.binary_search(l).unwrap())
            .collect();
        (classes, idx)
    }

    /// `ln(1 + x)` on every cell. Negative cells are rejected.
    pub fn log_normalize(&self) -> Result<FeatureMatrix> {
        let mut rows = self.rows.clone();
        for (r, row) in rows.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                if !(*v >= 0.0) {
                    return Err(Error::Normalization {
                        row: r,
                        channel: self.columns[j].channel,
                        feature: self.columns[j].feature.name().into(),
                        value: *v,
                    });
                }
                *v = v.ln_1p();
            }
        }
        Ok(FeatureMatrix {
            rows,
            ..self.clone()
        })
    }

    pub fn select_columns(&self, cols: &[Column]) -> Result<FeatureMatrix> {
        let idx = cols
            .iter()
            .map(|&c| {
                self.column_index(c).ok_or_else(|| {
                    Error::input(format!("feature matrix has no column {}", c.name()))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(FeatureMatrix {
            columns: cols.to_vec(),
            rows: self
                .rows
                .iter()
                .map(|r| idx.iter().map(|&j| r[j]).collect())
                .collect(),
            labels: self.labels.clone(),
        })
    }

    pub fn select_rows(&self, rows: &[usize]) -> FeatureMatrix {
        FeatureMatrix {
            columns: self.columns.clone(),
            rows: rows.iter().map(|&i| self.rows[i].clone()).collect(),
            labels: rows.iter().map(|&i| self.labels[i].clone()).collect(),
        }
    }

    /// Header `ch<i>_<feature>,...,label`, one row per segment.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let mut header: Vec<String> = self.columns.iter().map(Column::name).collect();
        header.push("label".into());
        out.write_record(&header).map_err(csv_err)?;
        for (row, label) in self.rows.iter().zip(&self.labels) {
            let mut rec: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            rec.push(label.clone());
            out.write_record(&rec).map_err(csv_err)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn write_csv_path(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_csv(std::io::BufWriter::new(std::fs::File::create(path)?))
    }

    pub fn read_csv<R: Read>(r: R) -> Result<FeatureMatrix> {
        let mut rdr = csv::Reader::from_reader(r);
        let header = rdr.headers().map_err(csv_err)?.clone();
        let n = header.len();
        if n < 2 || &header[n - 1] != "label" {
            return Err(Error::Format {
                line: 1,
                message: "last column must be \"label\"".into(),
            });
        }
        let columns = header
            .iter()
            .take(n - 1)
            .map(|h| {
                Column::parse(h).ok_or_else(|| Error::Format {
                    line: 1,
                    message: format!("unrecognized column {h:?}"),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let mut m = FeatureMatrix {
            columns,
            rows: Vec::new(),
            labels: Vec::new(),
        };
        for (i, rec) in rdr.records().enumerate() {
            let line = i + 2;
            let rec = rec.map_err(|e| Error::Format {
                line,
                message: e.to_string(),
            })?;
            let row = rec
                .iter()
                .take(n - 1)
                .map(|v| {
                    v.parse::<f64>().map_err(|_| Error::Format {
                        line,
                        message: format!("not a number: {v:?}"),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            m.rows.push(row);
            m.labels.push(rec[n - 1].to_string());
        }
        Ok(m)
    }

    pub fn read_csv_path(path: impl AsRef<Path>) -> Result<FeatureMatrix> {
        Self::read_csv(std::fs::File::open(path)?)
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Format {
        line: e.position().map_or(0, |p| p.line() as usize),
        message: e.to_string(),
    }
}
