//! Template matching on the elbow-angle stream.
//!
//! The template is scanned across the stream with a stride-1 window twice
//! its length ([`mdtw_scan`]). Prominent minima of the resulting distance
//! profile ([`detect_local_minima`]) delimit candidate segments, which are
//! ranked by DTW distance to the template ([`extract_segments`]) and turned
//! into labeled EMG slices ([`label_segments`]).

mod dataset;
mod dtw;
mod extract;
mod minima;
mod scan;

pub use dataset::{
    label_segments, ActionProvenance, LabeledDataset, LabeledSegment, DATASET_FORMAT,
    DATASET_VERSION,
};
pub use dtw::{
    dtw_cost, dtw_distance, dtw_distance_with, subsequence_dtw, DtwAlignment, DtwBuffer, LocalCost,
    SubsequenceMatch,
};
pub use extract::{
    extract_segments, Boundaries, ExtractOptions, Extraction, Segment, SegmentScore,
};
pub use minima::{
    detect_local_minima, detect_minima_in, local_minima, min_max_normalize, prominence,
    prominent_minima, DEFAULT_MAX_DEPTH, DEFAULT_THRESHOLD,
};
pub use scan::{mdtw_scan, mdtw_scan_with, DistanceProfile, ScanOptions, DEFAULT_WINDOW_FACTOR};

use crate::error::{Error, Result};
use crate::series::TimeSeries;

/// One repetition of an action, and how many to look for.
#[derive(Debug, Clone, PartialEq)]
pub struct Template {
    pub action_name: String,
    pub series: TimeSeries,
    pub expected_count: usize,
    /// Candidates scoring above this are discarded.
    pub max_distance: Option<f64>,
}

impl Template {
    pub fn new(
        action_name: impl Into<String>,
        series: TimeSeries,
        expected_count: usize,
        max_distance: Option<f64>,
    ) -> Result<Self> {
        let action_name = action_name.into();
        if series.len() < 2 {
            return Err(Error::param(format!(
                "template for {action_name} needs at least 2 samples"
            )));
        }
        series.require_finite("template")?;
        if expected_count == 0 {
            return Err(Error::param(format!(
                "expected_count for {action_name} must be at least 1"
            )));
        }
        if let Some(d) = max_distance {
            if !(d.is_finite() && d >= 0.0) {
                return Err(Error::param(format!(
                    "max_distance for {action_name} must be non-negative"
                )));
            }
        }
        Ok(Self {
            action_name,
            series,
            expected_count,
            max_distance,
        })
    }

    pub fn len(&self) -> usize {
        self.series.len()
    }

    pub fn is_empty(&self) -> bool {
        self.series.is_empty()
    }
}
