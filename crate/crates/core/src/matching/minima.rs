//! Prominent local minima of a distance profile, searched recursively with a
//! halving threshold.

use crate::error::{Error, Result};
use crate::matching::scan::DistanceProfile;

pub const DEFAULT_THRESHOLD: f64 = 0.5;
pub const DEFAULT_MAX_DEPTH: usize = 3;

/// Min-max normalization to [0, 1]. `None` for a constant vector.
pub fn min_max_normalize(values: &[f64]) -> Option<Vec<f64>> {
    let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        return None;
    }
    Some(values.iter().map(|v| (v - lo) / (hi - lo)).collect())
}

/// Interior local minima of `y`. A flat valley floor reports its middle
/// sample (lower middle for even widths); a floor touching either end is not
/// a minimum.
pub fn local_minima(y: &[f64]) -> Vec<usize> {
    let mut out = Vec::new();
    let n = y.len();
    let mut i = 1;
    while i + 1 < n {
        if y[i - 1] > y[i] {
            let mut ahead = i + 1;
            while ahead + 1 < n && y[ahead] == y[i] {
                ahead += 1;
            }
            if y[ahead] > y[i] {
                out.push((i + ahead - 1) / 2);
                i = ahead;
                continue;
            }
        }
        i += 1;
    }
    out
}

/// Depth of the valley at `i`: on each side, walk outward until a strictly
/// lower sample or the end and take the highest value passed; the prominence
/// is the lower of the two barriers minus `y[i]`.
pub fn prominence(y: &[f64], i: usize) -> f64 {
    let v = y[i];
    let mut left = v;
    for &x in y[..i].iter().rev() {
        if x < v {
            break;
        }
        left = left.max(x);
    }
    let mut right = v;
    for &x in &y[i + 1..] {
        if x < v {
            break;
        }
        right = right.max(x);
    }
    left.min(right) - v
}

/// Indices of `y` whose prominence, measured within `y`, reaches `threshold`.
pub fn prominent_minima(y: &[f64], threshold: f64) -> Vec<usize> {
    local_minima(y)
        .into_iter()
        .filter(|&i| prominence(y, i) >= threshold)
        .collect()
}

/// Prominent minima of the normalized profile. Each section between accepted
/// minima, or between a minimum and either end, is searched again with half
/// the threshold, for `max_depth` levels in total. Sections shorter than
/// three points are skipped. A constant profile yields no minima.
pub fn detect_local_minima(
    profile: &DistanceProfile,
    threshold: f64,
    max_depth: usize,
) -> Result<Vec<usize>> {
    detect_minima_in(&profile.distances, threshold, max_depth)
}

pub fn detect_minima_in(values: &[f64], threshold: f64, max_depth: usize) -> Result<Vec<usize>> {
    if values.is_empty() {
        return Err(Error::input("distance profile is empty"));
    }
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(Error::param(format!(
            "threshold must be in (0, 1], got {threshold}"
        )));
    }
    if max_depth == 0 {
        return Err(Error::param("max_depth must be at least 1"));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::input("distance profile contains non-finite values"));
    }
    let Some(y) = min_max_normalize(values) else {
        return Ok(Vec::new());
    };
    let mut found = Vec::new();
    search(&y, 0, y.len(), threshold, 1, max_depth, &mut found);
    found.sort_unstable();
    found.dedup();
    Ok(found)
}

fn search(
    y: &[f64],
    lo: usize,
    hi: usize,
    threshold: f64,
    level: usize,
    max_depth: usize,
    out: &mut Vec<usize>,
) {
    if level > max_depth || hi - lo < 3 {
        return;
    }
    let hits: Vec<usize> = prominent_minima(&y[lo..hi], threshold)
        .into_iter()
        .map(|i| lo + i)
        .collect();
    out.extend_from_slice(&hits);
    // Sections are open intervals between accepted minima.
    let mut start = lo;
    for &m in hits.iter().chain(std::iter::once(&hi)) {
        search(y, start, m, threshold / 2.0, level + 1, max_depth, out);
        start = m + 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn full_valleys() {
        assert_eq!(
            detect_minima_in(&[1.0, 0.0, 1.0, 0.0, 1.0], 0.5, 3).unwrap(),
            vec![1, 3]
        );
    }

    #[test]
    fn monotone_has_none() {
        let v: Vec<f64> = (0..20).map(|i| i as f64).collect();
        assert!(detect_minima_in(&v, 0.5, 3).unwrap().is_empty());
    }

    #[test]
    fn constant_is_empty_not_error() {
        assert!(detect_minima_in(&[2.0; 10], 0.5, 3).unwrap().is_empty());
    }

    #[test]
    fn plateau_middle() {
        assert_eq!(local_minima(&[3.0, 1.0, 1.0, 1.0, 3.0]), vec![2]);
        assert_eq!(local_minima(&[3.0, 1.0, 1.0, 3.0]), vec![1]);
        assert!(local_minima(&[3.0, 1.0, 1.0]).is_empty());
    }

    #[test]
    fn parameter_checks() {
        assert!(detect_minima_in(&[], 0.5, 3).is_err());
        assert!(detect_minima_in(&[1.0, 0.0, 1.0], 0.0, 3).is_err());
        assert!(detect_minima_in(&[1.0, 0.0, 1.0], 1.5, 3).is_err());
        assert!(detect_minima_in(&[1.0, 0.0, 1.0], 0.5, 0).is_err());
    }

    /// One valley of prominence 0.9 and a shallow 0.2 valley in its left
    /// flank.
    fn deep_and_shallow() -> Vec<f64> {
        vec![0.9, 0.8, 0.7, 0.8, 0.9, 1.0, 0.5, 0.0, 0.5, 0.9]
    }

    #[test]
    fn recursion_reaches_shallow_valley() {
        let y = deep_and_shallow();
        assert!((prominence(&y, 7) - 0.9).abs() < 1e-12);
        assert!((prominence(&y, 2) - 0.2).abs() < 1e-12);
        assert_eq!(detect_minima_in(&y, 0.5, 1).unwrap(), vec![7]);
        assert_eq!(detect_minima_in(&y, 0.5, 2).unwrap(), vec![7]);
        assert_eq!(detect_minima_in(&y, 0.5, 3).unwrap(), vec![2, 7]);
    }

    /// Direct definition: lowest barrier reached before a lower point, on
    /// either side, scanning the whole vector.
    fn oracle_prominence(y: &[f64], i: usize) -> f64 {
        let side = |range: Box<dyn Iterator<Item = usize>>| {
            let mut barrier = y[i];
            for k in range {
                if y[k] < y[i] {
                    break;
                }
                barrier = f64::max(barrier, y[k]);
            }
            barrier
        };
        let l = side(Box::new((0..i).rev()));
        let r = side(Box::new(i + 1..y.len()));
        l.min(r) - y[i]
    }

    proptest! {
        #[test]
        fn output_contract(v in prop::collection::vec(0.0f64..100.0, 1..200), depth in 1usize..5) {
            let th = 0.5;
            let found = detect_minima_in(&v, th, depth).unwrap();
            prop_assert!(found.windows(2).all(|w| w[0] < w[1]));
            if let Some(y) = min_max_normalize(&v) {
                let floor = th / 2f64.powi(depth as i32 - 1);
                for &i in &found {
                    prop_assert!(i > 0 && i + 1 < v.len());
                    prop_assert!(oracle_prominence(&y, i) >= floor - 1e-12);
                }
            }
        }

        #[test]
        fn deeper_never_loses(v in prop::collection::vec(0.0f64..100.0, 3..200)) {
            let d1 = detect_minima_in(&v, 0.5, 1).unwrap();
            let d3 = detect_minima_in(&v, 0.5, 3).unwrap();
            prop_assert!(d1.iter().all(|i| d3.contains(i)));
        }
    }
}
