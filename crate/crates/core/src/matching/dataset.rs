//! Labeled EMG segments and their line-delimited JSON file format.
//!
//! The first line is a header object; every following line is one segment.
//! See `docs/labeled-dataset.md` for the schema.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{MergedRecording, ANGLE_CHANNELS, EMG_CHANNELS};
use crate::matching::extract::Extraction;
use crate::matching::Template;

pub const DATASET_FORMAT: &str = "emg-autolabel/labeled-dataset";
pub const DATASET_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledSegment {
    pub action: String,
    pub start: usize,
    pub end: usize,
    pub dtw_distance: f64,
    /// Five EMG channel slices over `[start, end)`.
    pub emg: [Vec<f64>; EMG_CHANNELS],
    /// Shoulder, elbow and wrist angles over `[start, end)`, one target per
    /// sample.
    pub angles: [Vec<f64>; ANGLE_CHANNELS],
}

impl LabeledSegment {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }

    fn check(&self) -> std::result::Result<(), String> {
        if self.start >= self.end {
            return Err(format!("empty interval [{}, {})", self.start, self.end));
        }
        let n = self.len();
        if self.emg.iter().chain(&self.angles).any(|c| c.len() != n) {
            return Err(format!("slice lengths differ from end - start = {n}"));
        }
        Ok(())
    }
}

/// How one action's segments were obtained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionProvenance {
    pub action: String,
    pub template: Vec<f64>,
    pub expected_count: usize,
    pub max_distance: Option<f64>,
    pub candidates: usize,
    pub discarded: usize,
    pub found: usize,
    pub diagnostic: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LabeledDataset {
    /// Hex SHA-256 of the configuration that produced the dataset.
    pub config_hash: Option<String>,
    pub actions: Vec<ActionProvenance>,
    pub segments: Vec<LabeledSegment>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    format: String,
    version: u32,
    config_hash: Option<String>,
    actions: Vec<ActionProvenance>,
}

/// Copies the recording's channels over each extracted segment.
pub fn label_segments(
    extraction: &Extraction,
    recording: &MergedRecording,
    template: &Template,
) -> Result<LabeledDataset> {
    let mut segments = Vec::with_capacity(extraction.segments.len());
    for s in &extraction.segments {
        if s.start >= s.end || s.end > recording.len() {
            return Err(Error::InternalConsistency(format!(
                "segment [{}, {}) outside recording of {} rows",
                s.start,
                s.end,
                recording.len()
            )));
        }
        segments.push(LabeledSegment {
            action: template.action_name.clone(),
            start: s.start,
            end: s.end,
            dtw_distance: s.dtw_distance,
            emg: std::array::from_fn(|c| recording.emg(c)[s.start..s.end].to_vec()),
            angles: std::array::from_fn(|c| recording.angle(c)[s.start..s.end].to_vec()),
        });
    }
    Ok(LabeledDataset {
        config_hash: None,
        actions: vec![ActionProvenance {
            action: template.action_name.clone(),
            template: template.series.samples().to_vec(),
            expected_count: template.expected_count,
            max_distance: template.max_distance,
            candidates: extraction.candidates,
            discarded: extraction.discarded,
            found: segments.len(),
            diagnostic: extraction.diagnostic.clone(),
        }],
        segments,
    })
}

impl LabeledDataset {
    /// Concatenates per-action datasets in the given order.
    pub fn concat(parts: impl IntoIterator<Item = LabeledDataset>) -> Self {
        let mut out = Self::default();
        for p in parts {
            out.config_hash = out.config_hash.or(p.config_hash);
            out.actions.extend(p.actions);
            out.segments.extend(p.segments);
        }
        out
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        let header = Header {
            format: DATASET_FORMAT.into(),
            version: DATASET_VERSION,
            config_hash: self.config_hash.clone(),
            actions: self.actions.clone(),
        };
        serde_json::to_writer(&mut w, &header)?;
        w.write_all(b"\n")?;
        for s in &self.segments {
            serde_json::to_writer(&mut w, s)?;
            w.write_all(b"\n")?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_jsonl_bytes(&self) -> Result<Vec<u8>> {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf)?;
        Ok(buf)
    }

    pub fn write_jsonl_path(&self, path: impl AsRef<Path>) -> Result<()> {
        let f = std::fs::File::create(path)?;
        self.write_jsonl(std::io::BufWriter::new(f))
    }

    pub fn read_jsonl<R: Read>(reader: R) -> Result<Self> {
        let mut lines = BufReader::new(reader).lines();
        let first = lines.next().transpose()?.ok_or_else(|| Error::Format {
            line: 1,
            message: "missing header line".into(),
        })?;
        let header: Header = serde_json::from_str(&first).map_err(|e| Error::Format {
            line: 1,
            message: e.to_string(),
        })?;
        if header.format != DATASET_FORMAT {
            return Err(Error::Format {
                line: 1,
                message: format!("unknown format {:?}", header.format),
            });
        }
        if header.version != DATASET_VERSION {
            return Err(Error::Format {
                line: 1,
                message: format!("unsupported version {}", header.version),
            });
        }
        let mut segments = Vec::new();
        for (i, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let fmt = |message: String| Error::Format {
                line: i + 2,
                message,
            };
            let s: LabeledSegment = serde_json::from_str(&line).map_err(|e| fmt(e.to_string()))?;
            s.check().map_err(fmt)?;
            segments.push(s);
        }
        Ok(Self {
            config_hash: header.config_hash,
            actions: header.actions,
            segments,
        })
    }

    pub fn read_jsonl_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_jsonl(std::fs::File::open(path)?)
    }
}
