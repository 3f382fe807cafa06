//! Moving DTW: the template against every stride-1 window of the stream.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matching::dtw::{DtwBuffer, LocalCost};
use crate::matching::Template;

pub const DEFAULT_WINDOW_FACTOR: usize = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceProfile {
    pub distances: Vec<f64>,
    /// Stream index of the first sample of each window.
    pub positions: Vec<usize>,
    pub window_len: usize,
    pub template_len: usize,
}

impl DistanceProfile {
    pub fn len(&self) -> usize {
        self.distances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.distances.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScanOptions {
    /// Window width as a multiple of the template length.
    pub window_factor: usize,
    pub local_cost: LocalCost,
}

impl Default for ScanOptions {
    fn default() -> Self {
        Self {
            window_factor: DEFAULT_WINDOW_FACTOR,
            local_cost: LocalCost::Absolute,
        }
    }
}

pub fn mdtw_scan(template: &Template, stream: &[f64]) -> Result<DistanceProfile> {
    mdtw_scan_with(template.series.samples(), stream, ScanOptions::default())
}

/// Windows are independent; they are evaluated in parallel and assembled by
/// index, so the result does not depend on scheduling.
pub fn mdtw_scan_with(
    template: &[f64],
    stream: &[f64],
    options: ScanOptions,
) -> Result<DistanceProfile> {
    if template.len() < 2 {
        return Err(Error::input("template needs at least 2 samples"));
    }
    if options.window_factor == 0 {
        return Err(Error::param("window factor must be at least 1"));
    }
    let w = options.window_factor * template.len();
    if stream.len() < w {
        return Err(Error::InsufficientData {
            needed: w,
            available: stream.len(),
        });
    }
    let count = stream.len() - w + 1;
    let distances: Vec<f64> = (0..count)
        .into_par_iter()
        .map_init(DtwBuffer::default, |buf, p| {
            buf.cost(template, &stream[p..p + w], options.local_cost)
        })
        .collect();
    Ok(DistanceProfile {
        distances,
        positions: (0..count).collect(),
        window_len: w,
        template_len: template.len(),
    })
}
