//! Candidate segments between profile minima, ranked by DTW distance.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matching::dtw::{dtw_distance_with, subsequence_dtw, LocalCost};
use crate::matching::scan::DistanceProfile;
use crate::matching::Template;

/// Which stream indices delimit candidates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundaries {
    /// Only the window positions of detected minima.
    MinimaOnly,
    /// Minima plus the first and one-past-last stream index, so repetitions
    /// before the first or after the last minimum are still candidates.
    #[default]
    WithStreamEnds,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SegmentScore {
    /// Accumulated DTW cost.
    #[default]
    Raw,
    /// Cost per aligned pair.
    PathNormalized,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExtractOptions {
    pub boundaries: Boundaries,
    /// Trim each accepted candidate to its best-matching sub-interval.
    pub refine: bool,
    pub score: SegmentScore,
    pub local_cost: LocalCost,
}

impl Default for ExtractOptions {
    fn default() -> Self {
        Self {
            boundaries: Boundaries::WithStreamEnds,
            refine: true,
            score: SegmentScore::Raw,
            local_cost: LocalCost::Absolute,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    /// Half-open stream interval of the labeled segment.
    pub start: usize,
    pub end: usize,
    /// Score of the candidate interval, used for ranking.
    pub dtw_distance: f64,
    /// Candidate interval between boundaries, before refinement.
    pub candidate_start: usize,
    pub candidate_end: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Extraction {
    /// Ascending by `dtw_distance`, ties by start index.
    pub segments: Vec<Segment>,
    pub candidates: usize,
    /// Candidates rejected by the template's `max_distance`.
    pub discarded: usize,
    /// Set when fewer than `expected_count` segments were returned.
    pub diagnostic: Option<String>,
}

pub fn extract_segments(
    profile: &DistanceProfile,
    minima: &[usize],
    template: &Template,
    stream: &[f64],
    options: ExtractOptions,
) -> Result<Extraction> {
    let mut bounds = Vec::with_capacity(minima.len() + 2);
    if options.boundaries == Boundaries::WithStreamEnds {
        bounds.push(0);
    }
    for &m in minima {
        let p = *profile
            .positions
            .get(m)
            .ok_or_else(|| Error::input(format!("minimum index {m} outside the profile")))?;
        bounds.push(p);
    }
    if options.boundaries == Boundaries::WithStreamEnds {
        bounds.push(stream.len());
    }
    if bounds.windows(2).any(|w| w[0] >= w[1]) || bounds.last().is_some_and(|&b| b > stream.len()) {
        return Err(Error::input(
            "minima must be strictly increasing and inside the stream",
        ));
    }
    if bounds.len() < 2 {
        return Err(Error::InsufficientBoundaries {
            found: bounds.len(),
        });
    }

    let t = template.series.samples();
    let scored: Vec<Segment> = bounds
        .par_windows(2)
        .map(|w| {
            let (a, b) = (w[0], w[1]);
            let part = &stream[a..b];
            let alignment = dtw_distance_with(t, part, options.local_cost)?;
            let score = match options.score {
                SegmentScore::Raw => alignment.cost,
                SegmentScore::PathNormalized => alignment.normalized_cost(),
            };
            let (start, end) = if options.refine {
                let m = subsequence_dtw(t, part, options.local_cost)?;
                (a + m.start, a + m.end)
            } else {
                (a, b)
            };
            Ok(Segment {
                start,
                end,
                dtw_distance: score,
                candidate_start: a,
                candidate_end: b,
            })
        })
        .collect::<Result<_>>()?;

    let candidates = scored.len();
    let mut kept: Vec<Segment> = scored
        .into_iter()
        .filter(|s| {
            template
                .max_distance
                .is_none_or(|max| s.dtw_distance <= max)
        })
        .collect();
    let discarded = candidates - kept.len();
    kept.sort_by(|x, y| {
        x.dtw_distance
            .total_cmp(&y.dtw_distance)
            .then(x.candidate_start.cmp(&y.candidate_start))
    });
    kept.truncate(template.expected_count);

    let diagnostic = if kept.is_empty() {
        Some(format!(
            "no segment survived: {candidates} candidates, {discarded} above max_distance"
        ))
    } else if kept.len() < template.expected_count {
        Some(format!(
            "found {} of {} expected segments ({candidates} candidates, {discarded} above max_distance)",
            kept.len(),
            template.expected_count
        ))
    } else {
        None
    };
    Ok(Extraction {
        segments: kept,
        candidates,
        discarded,
        diagnostic,
    })
}
