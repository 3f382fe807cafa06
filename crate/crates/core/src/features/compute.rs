//! The ten per-channel features.

use std::cell::OnceCell;
use std::sync::Arc;

use nalgebra::DMatrix;
use rustfft::{num_complex::Complex64, Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureId;

pub const MIN_SEGMENT_LEN: usize = 16;

/// Threshold used by the Willison amplitude and slope sign change counts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Epsilon {
    /// Multiple of the segment's standard deviation.
    Relative(f64),
    /// Fixed amplitude.
    Absolute(f64),
}

impl Epsilon {
    fn resolve(self, std: f64) -> f64 {
        match self {
            Epsilon::Relative(k) => k * std,
            Epsilon::Absolute(e) => e,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureParams {
    pub wa_epsilon: Epsilon,
    pub ssc_epsilon: Epsilon,
    pub histogram_bins: usize,
    pub svd_order: usize,
}

impl Default for FeatureParams {
    fn default() -> Self {
        Self {
            wa_epsilon: Epsilon::Relative(0.1),
            ssc_epsilon: Epsilon::Relative(0.1),
            histogram_bins: 32,
            svd_order: 10,
        }
    }
}

impl FeatureParams {
    pub fn validate(&self) -> Result<()> {
        for (name, e) in [
            ("wa_epsilon", self.wa_epsilon),
            ("ssc_epsilon", self.ssc_epsilon),
        ] {
            let v = match e {
                Epsilon::Relative(v) | Epsilon::Absolute(v) => v,
            };
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::param(format!(
                    "{name} must be finite and non-negative"
                )));
            }
        }
        if self.histogram_bins < 2 {
            return Err(Error::param("histogram_bins must be at least 2"));
        }
        if !(2..MIN_SEGMENT_LEN).contains(&self.svd_order) {
            return Err(Error::param(format!(
                "svd_order must be in [2, {MIN_SEGMENT_LEN})"
            )));
        }
        Ok(())
    }
}

/// One-sided Hann-windowed periodogram.
#[derive(Debug, Clone)]
pub struct Periodogram {
    pub freqs: Vec<f64>,
    pub power: Vec<f64>,
}

impl Periodogram {
    pub fn new(x: &[f64], sample_rate_hz: f64) -> Self {
        let mut planner = FftPlanner::new();
        Self::with_plan(x, sample_rate_hz, planner.plan_fft_forward(x.len()))
    }

    fn with_plan(x: &[f64], fs: f64, fft: Arc<dyn Fft<f64>>) -> Self {
        let n = x.len();
        let window: Vec<f64> = (0..n)
            .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos())
            .collect();
        let mut buf: Vec<Complex64> = x
            .iter()
            .zip(&window)
            .map(|(v, w)| Complex64::new(v * w, 0.0))
            .collect();
        fft.process(&mut buf);
        let scale = 1.0 / (fs * window.iter().map(|w| w * w).sum::<f64>());
        let bins = n / 2 + 1;
        let power = (0..bins)
            .map(|k| {
                let p = buf[k].norm_sqr() * scale;
                // Fold negative frequencies, except DC and Nyquist.
                if k == 0 || (n % 2 == 0 && k == n / 2) {
                    p
                } else {
                    2.0 * p
                }
            })
            .collect();
        let freqs = (0..bins).map(|k| k as f64 * fs / n as f64).collect();
        Self { freqs, power }
    }

    fn total(&self) -> f64 {
        self.power.iter().sum()
    }
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

fn std_dev(x: &[f64]) -> f64 {
    let m = mean(x);
    (x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / x.len() as f64).sqrt()
}

fn entropy(p: impl Iterator<Item = f64>) -> f64 {
    -p.filter(|&v| v > 0.0).map(|v| v * v.ln()).sum::<f64>()
}

/// Computes a feature of one channel of one segment.
pub fn compute_feature(
    x: &[f64],
    sample_rate_hz: f64,
    id: FeatureId,
    params: &FeatureParams,
) -> Result<f64> {
    check_segment(x)?;
    Ok(feature(x, sample_rate_hz, id, params, &OnceCell::new()))
}

/// All ten features in [`FeatureId::ALL`] order, sharing one periodogram.
pub fn compute_all(x: &[f64], sample_rate_hz: f64, params: &FeatureParams) -> Result<[f64; 10]> {
    check_segment(x)?;
    let cache = OnceCell::new();
    Ok(FeatureId::ALL.map(|id| feature(x, sample_rate_hz, id, params, &cache)))
}

fn check_segment(x: &[f64]) -> Result<()> {
    if x.len() < MIN_SEGMENT_LEN {
        return Err(Error::input(format!(
            "segment of {} samples is shorter than {MIN_SEGMENT_LEN}",
            x.len()
        )));
    }
    if let Some(i) = x.iter().position(|v| !v.is_finite()) {
        return Err(Error::input(format!("non-finite sample at index {i}")));
    }
    Ok(())
}

fn feature(
    x: &[f64],
    sample_rate_hz: f64,
    id: FeatureId,
    params: &FeatureParams,
    cache: &OnceCell<Periodogram>,
) -> f64 {
    let spectral = || cache.get_or_init(|| Periodogram::new(x, sample_rate_hz));
    match id {
        FeatureId::Mdf => median_frequency(spectral()),
        FeatureId::Rms => (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt(),
        FeatureId::Zcr => {
            x.windows(2).filter(|w| w[0] * w[1] < 0.0).count() as f64 / (x.len() - 1) as f64
        }
        FeatureId::Wa => {
            let eps = params.wa_epsilon.resolve(std_dev(x));
            x.windows(2).filter(|w| (w[1] - w[0]).abs() > eps).count() as f64
        }
        FeatureId::Psd => mean(&spectral().power),
        FeatureId::Ssc => {
            // The product has squared units, so compare against eps^2.
            let eps = params.ssc_epsilon.resolve(std_dev(x));
            x.windows(3)
                .filter(|w| (w[1] - w[0]) * (w[1] - w[2]) > eps * eps)
                .count() as f64
        }
        FeatureId::Sc => {
            let p = spectral();
            let total = p.total();
            if total > 0.0 {
                p.freqs
                    .iter()
                    .zip(&p.power)
                    .map(|(f, q)| f * q)
                    .sum::<f64>()
                    / total
            } else {
                0.0
            }
        }
        FeatureId::Pdf => histogram_mode_mass(x, params.histogram_bins),
        FeatureId::Se => {
            let p = spectral();
            let total = p.total();
            if total > 0.0 {
                entropy(p.power.iter().map(|q| q / total)) / (p.power.len() as f64).ln()
            } else {
                0.0
            }
        }
        FeatureId::Svd => svd_entropy(x, params.svd_order),
    }
}

fn median_frequency(p: &Periodogram) -> f64 {
    let half = 0.5 * p.total();
    if half <= 0.0 {
        return 0.0;
    }
    let mut acc = 0.0;
    for (f, q) in p.freqs.iter().zip(&p.power) {
        acc += q;
        if acc >= half {
            return *f;
        }
    }
    *p.freqs.last().unwrap()
}

fn histogram_mode_mass(x: &[f64], bins: usize) -> f64 {
    let lo = x.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        return 1.0;
    }
    let mut counts = vec![0usize; bins];
    for v in x {
        let b = (((v - lo) / (hi - lo)) * bins as f64) as usize;
        counts[b.min(bins - 1)] += 1;
    }
    *counts.iter().max().unwrap() as f64 / x.len() as f64
}

fn svd_entropy(x: &[f64], order: usize) -> f64 {
    let rows = x.len() - order + 1;
    let m = DMatrix::from_fn(rows, order, |i, j| x[i + j]);
    let s = m.singular_values();
    let total: f64 = s.iter().sum();
    if total <= 0.0 {
        return 0.0;
    }
    entropy(s.iter().map(|v| v / total)) / (order as f64).ln()
}
