//! End-to-end file-mode pipeline, split into the same three steps the CLI
//! exposes: denoise, segment, label.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dsp::{ssa_denoise, SosFilter};
use crate::error::{Error, Result};
use crate::ingest::{MergedRecording, EMG_CHANNELS, MERGED_RATE_HZ};
use crate::matching::{
    detect_minima_in, extract_segments, label_segments, mdtw_scan_with, DistanceProfile,
    Extraction, LabeledDataset, ScanOptions, Template,
};
use crate::pipeline::config::PipelineConfig;
use crate::series::TimeSeries;

pub const SEGMENTS_FORMAT: &str = "emg-autolabel/segments";
pub const SEGMENTS_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Smooth,
    Scan,
    Minima,
    Extract,
    Label,
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Stage::Smooth => "smooth",
            Stage::Scan => "scan",
            Stage::Minima => "minima",
            Stage::Extract => "extract",
            Stage::Label => "label",
        };
        f.write_str(s)
    }
}

/// An action whose processing stopped; the other actions are unaffected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionFailure {
    pub action: String,
    pub stage: Stage,
    pub message: String,
}

impl std::fmt::Display for ActionFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "action {} failed at {}: {}",
            self.action, self.stage, self.message
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionSegments {
    pub action: String,
    pub template: Vec<f64>,
    pub expected_count: usize,
    pub max_distance: Option<f64>,
    pub extraction: Extraction,
}

impl ActionSegments {
    fn template(&self) -> Result<Template> {
        Template::new(
            self.action.clone(),
            TimeSeries::from_samples(self.template.clone(), MERGED_RATE_HZ)?,
            self.expected_count,
            self.max_distance,
        )
    }
}

/// Output of the segment step, consumed by the label step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentsFile {
    pub format: String,
    pub version: u32,
    pub config_hash: String,
    pub actions: Vec<ActionSegments>,
    pub failures: Vec<ActionFailure>,
}

impl SegmentsFile {
    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn read_json(path: impl AsRef<Path>) -> Result<Self> {
        let f: Self = serde_json::from_reader(std::io::BufReader::new(std::fs::File::open(path)?))?;
        if f.format != SEGMENTS_FORMAT || f.version != SEGMENTS_VERSION {
            return Err(Error::Format {
                line: 1,
                message: format!("unsupported segments file {} v{}", f.format, f.version),
            });
        }
        Ok(f)
    }
}

/// Intermediate results kept for plotting.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionTrace {
    pub action: String,
    pub profile: DistanceProfile,
    pub minima: Vec<usize>,
    /// Minima found by the first level alone.
    pub minima_first_level: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Segmentation {
    pub file: SegmentsFile,
    pub smoothed_elbow: Option<Vec<f64>>,
    pub traces: Vec<ActionTrace>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionReport {
    pub action: String,
    pub expected: usize,
    pub found: usize,
    pub candidates: usize,
    pub discarded: usize,
    pub distances: Vec<f64>,
    pub diagnostic: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineReport {
    pub config_hash: String,
    pub actions: Vec<ActionReport>,
    pub failures: Vec<ActionFailure>,
}

impl PipelineReport {
    pub fn from_segments(file: &SegmentsFile) -> Self {
        Self {
            config_hash: file.config_hash.clone(),
            actions: file
                .actions
                .iter()
                .map(|a| ActionReport {
                    action: a.action.clone(),
                    expected: a.expected_count,
                    found: a.extraction.segments.len(),
                    candidates: a.extraction.candidates,
                    discarded: a.extraction.discarded,
                    distances: a
                        .extraction
                        .segments
                        .iter()
                        .map(|s| s.dtw_distance)
                        .collect(),
                    diagnostic: a.extraction.diagnostic.clone(),
                })
                .collect(),
            failures: file.failures.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOutput {
    pub dataset: LabeledDataset,
    pub segments: SegmentsFile,
    pub report: PipelineReport,
}

/// Band-pass and notch on every EMG channel; angles are untouched.
pub fn preprocess(config: &PipelineConfig, recording: &MergedRecording) -> Result<MergedRecording> {
    let f = &config.filter;
    if !f.enabled {
        return Ok(recording.clone());
    }
    let band = SosFilter::butterworth_bandpass(MERGED_RATE_HZ, f.band_hz.0, f.band_hz.1, f.order)?;
    let notch = f
        .notch_hz
        .map(|hz| SosFilter::notch(MERGED_RATE_HZ, hz, f.notch_q))
        .transpose()?;
    let mut out = recording.clone();
    for c in 0..EMG_CHANNELS {
        let mut x = band.apply(recording.emg(c));
        if let Some(n) = &notch {
            x = n.apply(&x);
        }
        out = out.with_emg(c, x)?;
    }
    Ok(out)
}

fn scan_action(
    config: &PipelineConfig,
    template: &Template,
    elbow: &[f64],
) -> std::result::Result<(ActionTrace, Extraction), (Stage, Error)> {
    let m = &config.mdtw;
    let opts = ScanOptions {
        window_factor: m.window_factor,
        local_cost: m.local_cost,
    };
    let profile =
        mdtw_scan_with(template.series.samples(), elbow, opts).map_err(|e| (Stage::Scan, e))?;
    let minima = detect_minima_in(&profile.distances, m.threshold, m.max_depth)
        .map_err(|e| (Stage::Minima, e))?;
    let minima_first_level =
        detect_minima_in(&profile.distances, m.threshold, 1).map_err(|e| (Stage::Minima, e))?;
    let extraction = extract_segments(&profile, &minima, template, elbow, m.extract_options())
        .map_err(|e| (Stage::Extract, e))?;
    let trace = ActionTrace {
        action: template.action_name.clone(),
        profile,
        minima,
        minima_first_level,
    };
    Ok((trace, extraction))
}

/// Smooths the elbow channel and runs scan, minima and extraction for every
/// action concurrently. Per-action failures are collected, not returned.
pub fn segment_recording(
    config: &PipelineConfig,
    recording: &MergedRecording,
) -> Result<Segmentation> {
    config.validate()?;
    let templates = config.templates()?;
    let mut file = SegmentsFile {
        format: SEGMENTS_FORMAT.into(),
        version: SEGMENTS_VERSION,
        config_hash: config.hash(),
        actions: Vec::new(),
        failures: Vec::new(),
    };
    let smoothed = if recording.is_empty() {
        Err(Error::InsufficientData {
            needed: 3,
            available: 0,
        })
    } else {
        ssa_denoise(
            &recording.elbow_series(),
            config.ssa.window_len,
            config.ssa.rank,
        )
        .map(TimeSeries::into_samples)
    };
    let elbow = match smoothed {
        Ok(e) => e,
        Err(e) => {
            file.failures = templates
                .iter()
                .map(|t| ActionFailure {
                    action: t.action_name.clone(),
                    stage: Stage::Smooth,
                    message: e.to_string(),
                })
                .collect();
            return Ok(Segmentation {
                file,
                smoothed_elbow: None,
                traces: Vec::new(),
            });
        }
    };

    let results: Vec<_> = templates
        .par_iter()
        .map(|t| scan_action(config, t, &elbow))
        .collect();
    let mut traces = Vec::new();
    for (t, r) in templates.iter().zip(results) {
        match r {
            Ok((trace, extraction)) => {
                traces.push(trace);
                file.actions.push(ActionSegments {
                    action: t.action_name.clone(),
                    template: t.series.samples().to_vec(),
                    expected_count: t.expected_count,
                    max_distance: t.max_distance,
                    extraction,
                });
            }
            Err((stage, e)) => file.failures.push(ActionFailure {
                action: t.action_name.clone(),
                stage,
                message: e.to_string(),
            }),
        }
    }
    Ok(Segmentation {
        file,
        smoothed_elbow: Some(elbow),
        traces,
    })
}

/// Cuts the labeled slices out of `recording`, which should be the
/// preprocessed recording the segments were found on.
pub fn label_recording(
    segments: &SegmentsFile,
    recording: &MergedRecording,
) -> Result<LabeledDataset> {
    let parts = segments
        .actions
        .iter()
        .map(|a| label_segments(&a.extraction, recording, &a.template()?))
        .collect::<Result<Vec<_>>>()?;
    let mut ds = LabeledDataset::concat(parts);
    ds.config_hash = Some(segments.config_hash.clone());
    Ok(ds)
}

/// Preprocess, segment and label in one call.
pub fn run_pipeline(
    config: &PipelineConfig,
    recording: &MergedRecording,
) -> Result<PipelineOutput> {
    config.validate()?;
    let clean = preprocess(config, recording)?;
    let seg = segment_recording(config, &clean)?;
    let dataset = label_recording(&seg.file, &clean)?;
    let report = PipelineReport::from_segments(&seg.file);
    Ok(PipelineOutput {
        dataset,
        segments: seg.file,
        report,
    })
}
