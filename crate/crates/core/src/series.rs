use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniformly sampled scalar channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    samples: Vec<f64>,
    sample_rate_hz: f64,
    t0: f64,
}

impl TimeSeries {
    pub fn new(samples: Vec<f64>, sample_rate_hz: f64, t0: f64) -> Result<Self> {
        if !(sample_rate_hz > 0.0 && sample_rate_hz.is_finite()) {
            return Err(Error::param(format!(
                "sample rate must be positive and finite, got {sample_rate_hz}"
            )));
        }
        if !t0.is_finite() {
            return Err(Error::param("start timestamp must be finite"));
        }
        Ok(Self {
            samples,
            sample_rate_hz,
            t0,
        })
    }

    /// Series starting at t = 0.
    pub fn from_samples(samples: Vec<f64>, sample_rate_hz: f64) -> Result<Self> {
        Self::new(samples, sample_rate_hz, 0.0)
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Timestamp of sample `index`.
    pub fn time_at(&self, index: usize) -> f64 {
        self.t0 + index as f64 / self.sample_rate_hz
    }

    /// New series with the same rate and start time.
    pub fn with_samples(&self, samples: Vec<f64>) -> Self {
        Self {
            samples,
            sample_rate_hz: self.sample_rate_hz,
            t0: self.t0,
        }
    }

    /// Sub-series `[start, end)`, keeping absolute timing.
    pub fn slice(&self, start: usize, end: usize) -> Result<Self> {
        if start > end || end > self.samples.len() {
            return Err(Error::param(format!(
                "slice [{start}, {end}) outside series of length {}",
                self.samples.len()
            )));
        }
        Ok(Self {
            samples: self.samples[start..end].to_vec(),
            sample_rate_hz: self.sample_rate_hz,
            t0: self.time_at(start),
        })
    }

    pub(crate) fn require_non_empty(&self, what: &str) -> Result<()> {
        if self.samples.is_empty() {
            return Err(Error::input(format!("{what}: series is empty")));
        }
        Ok(())
    }

    pub(crate) fn require_finite(&self, what: &str) -> Result<()> {
        if let Some(i) = self.samples.iter().position(|x| !x.is_finite()) {
            return Err(Error::input(format!(
                "{what}: non-finite sample at index {i}"
            )));
        }
        Ok(())
    }
}
