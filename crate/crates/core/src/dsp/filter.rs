use std::f64::consts::PI;

use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::series::TimeSeries;

pub const DEFAULT_BAND_HZ: (f64, f64) = (1.0, 120.0);
pub const DEFAULT_BANDPASS_ORDER: usize = 2;
pub const DEFAULT_NOTCH_HZ: f64 = 60.0;
pub const DEFAULT_NOTCH_Q: f64 = 30.0;

/// Second-order section, normalized so that a0 = 1.
///
/// y[n] = b0 x[n] + b1 x[n-1] + b2 x[n-2] - a1 y[n-1] - a2 y[n-2]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b0: f64,
    pub b1: f64,
    pub b2: f64,
    pub a1: f64,
    pub a2: f64,
}

impl Biquad {
    /// Complex frequency response at normalized angular frequency `omega` (rad/sample).
    pub fn response(&self, omega: f64) -> Complex64 {
        let z1 = Complex64::from_polar(1.0, -omega);
        let z2 = z1 * z1;
        let num = self.b0 + z1 * self.b1 + z2 * self.b2;
        let den = 1.0 + z1 * self.a1 + z2 * self.a2;
        num / den
    }

    fn scaled(self, gain: f64) -> Self {
        Self {
            b0: self.b0 * gain,
            b1: self.b1 * gain,
            b2: self.b2 * gain,
            ..self
        }
    }
}

/// Transposed direct form II state of one section.
#[derive(Debug, Clone, Copy, Default)]
pub struct BiquadState {
    s1: f64,
    s2: f64,
}

impl BiquadState {
    #[inline]
    fn step(&mut self, c: &Biquad, x: f64) -> f64 {
        let y = c.b0 * x + self.s1;
        self.s1 = c.b1 * x - c.a1 * y + self.s2;
        self.s2 = c.b2 * x - c.a2 * y;
        y
    }
}

/// Cascade of second-order sections applied causally.
#[derive(Debug, Clone, PartialEq)]
pub struct SosFilter {
    sections: Vec<Biquad>,
}

impl SosFilter {
    pub fn new(sections: Vec<Biquad>) -> Self {
        Self { sections }
    }

    pub fn sections(&self) -> &[Biquad] {
        &self.sections
    }

    /// Digital Butterworth band-pass built from an analog prototype of the
    /// given order via the band-pass transform and the bilinear transform.
    /// The result has `order` biquads (filter order 2 * `order`).
    pub fn butterworth_bandpass(
        sample_rate_hz: f64,
        low_hz: f64,
        high_hz: f64,
        order: usize,
    ) -> Result<Self> {
        let nyquist = sample_rate_hz / 2.0;
        if !(sample_rate_hz > 0.0) {
            return Err(Error::param("sample rate must be positive"));
        }
        if !(low_hz > 0.0 && low_hz < high_hz && high_hz < nyquist) {
            return Err(Error::param(format!(
                "band edges must satisfy 0 < low < high < Nyquist ({nyquist} Hz), got [{low_hz}, {high_hz}]"
            )));
        }
        if order == 0 {
            return Err(Error::param("filter order must be at least 1"));
        }

        let fs2 = 2.0 * sample_rate_hz;
        let wl = fs2 * (PI * low_hz / sample_rate_hz).tan();
        let wh = fs2 * (PI * high_hz / sample_rate_hz).tan();
        let w0 = (wl * wh).sqrt();
        let bw = wh - wl;
        let center = 2.0 * (w0 / fs2).atan();

        let bilinear = |s: Complex64| (fs2 + s) / (fs2 - s);
        // Both band-pass poles generated by one low-pass prototype pole.
        let bandpass_roots = |p: Complex64| {
            let pb = p * bw;
            let disc = (pb * pb - 4.0 * w0 * w0).sqrt();
            ((pb + disc) / 2.0, (pb - disc) / 2.0)
        };
        let conjugate_section = |z: Complex64| Biquad {
            b0: 1.0,
            b1: 0.0,
            b2: -1.0,
            a1: -2.0 * z.re,
            a2: z.norm_sqr(),
        };

        let mut sections = Vec::with_capacity(order);
        for k in 0..order {
            let theta = PI / 2.0 + PI * (2 * k + 1) as f64 / (2 * order) as f64;
            let p = Complex64::from_polar(1.0, theta);
            if p.im > 1e-12 {
                // The conjugate prototype pole yields the conjugate z-plane poles.
                let (s1, s2) = bandpass_roots(p);
                sections.push(conjugate_section(bilinear(s1)));
                sections.push(conjugate_section(bilinear(s2)));
            } else if p.im.abs() <= 1e-12 {
                let (s1, s2) = bandpass_roots(Complex64::new(-1.0, 0.0));
                let (z1, z2) = (bilinear(s1), bilinear(s2));
                sections.push(Biquad {
                    b0: 1.0,
                    b1: 0.0,
                    b2: -1.0,
                    a1: -(z1 + z2).re,
                    a2: (z1 * z2).re,
                });
            }
        }

        let sections = sections
            .into_iter()
            .map(|s| s.scaled(1.0 / s.response(center).norm()))
            .collect();
        Ok(Self { sections })
    }

    /// Second-order IIR notch (zeros on the unit circle at `f0_hz`).
    pub fn notch(sample_rate_hz: f64, f0_hz: f64, q: f64) -> Result<Self> {
        let nyquist = sample_rate_hz / 2.0;
        if !(f0_hz > 0.0 && f0_hz < nyquist) {
            return Err(Error::param(format!(
                "notch frequency must satisfy 0 < f0 < Nyquist ({nyquist} Hz), got {f0_hz}"
            )));
        }
        if !(q > 0.0 && q.is_finite()) {
            return Err(Error::param(format!("notch Q must be positive, got {q}")));
        }
        let w0 = 2.0 * PI * f0_hz / sample_rate_hz;
        let alpha = w0.sin() / (2.0 * q);
        let a0 = 1.0 + alpha;
        let cos = w0.cos();
        Ok(Self {
            sections: vec![Biquad {
                b0: 1.0 / a0,
                b1: -2.0 * cos / a0,
                b2: 1.0 / a0,
                a1: -2.0 * cos / a0,
                a2: (1.0 - alpha) / a0,
            }],
        })
    }

    /// |H| at `freq_hz`.
    pub fn magnitude_at(&self, freq_hz: f64, sample_rate_hz: f64) -> f64 {
        let omega = 2.0 * PI * freq_hz / sample_rate_hz;
        self.sections
            .iter()
            .map(|s| s.response(omega))
            .fold(Complex64::new(1.0, 0.0), |acc, h| acc * h)
            .norm()
    }

    /// Filters `x` from a zero initial state. Output length equals input length.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut state = self.stream();
        x.iter().map(|&v| state.process(v)).collect()
    }

    /// Fresh incremental state for sample-by-sample filtering.
    pub fn stream(&self) -> SosState {
        SosState {
            filter: self.clone(),
            states: vec![BiquadState::default(); self.sections.len()],
        }
    }
}

/// Running state of an [`SosFilter`]; feeding samples one at a time gives the
/// same output as [`SosFilter::apply`] on the whole signal.
#[derive(Debug, Clone)]
pub struct SosState {
    filter: SosFilter,
    states: Vec<BiquadState>,
}

impl SosState {
    #[inline]
    pub fn process(&mut self, x: f64) -> f64 {
        self.filter
            .sections
            .iter()
            .zip(self.states.iter_mut())
            .fold(x, |v, (c, st)| st.step(c, v))
    }
}

fn check_input(s: &TimeSeries, what: &str) -> Result<()> {
    s.require_non_empty(what)?;
    s.require_finite(what)
}

/// Butterworth band-pass, applied forward only.
pub fn bandpass_filter(
    s: &TimeSeries,
    low_hz: f64,
    high_hz: f64,
    order: usize,
) -> Result<TimeSeries> {
    let filter = SosFilter::butterworth_bandpass(s.sample_rate_hz(), low_hz, high_hz, order)?;
    check_input(s, "bandpass_filter")?;
    Ok(s.with_samples(filter.apply(s.samples())))
}

/// Power-line notch, applied forward only.
pub fn notch_filter(s: &TimeSeries, f0_hz: f64, q: f64) -> Result<TimeSeries> {
    let filter = SosFilter::notch(s.sample_rate_hz(), f0_hz, q)?;
    check_input(s, "notch_filter")?;
    Ok(s.with_samples(filter.apply(s.samples())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn analog_butterworth_bandpass_gain(f: f64, fs: f64, low: f64, high: f64, order: i32) -> f64 {
        // Digital frequency mapped through the bilinear transform onto the
        // analog band-pass, then onto the low-pass prototype.
        let fs2 = 2.0 * fs;
        let w = fs2 * (PI * f / fs).tan();
        let wl = fs2 * (PI * low / fs).tan();
        let wh = fs2 * (PI * high / fs).tan();
        let omega = (w * w - wl * wh).abs() / (w * (wh - wl));
        1.0 / (1.0 + omega.powi(2 * order)).sqrt()
    }

    #[test]
    fn bandpass_matches_analog_magnitude() {
        for order in 1..=4 {
            let f = SosFilter::butterworth_bandpass(256.0, 1.0, 120.0, order).unwrap();
            assert_eq!(f.sections().len(), order);
            for &freq in &[0.3, 1.0, 5.0, 10.9, 60.0, 120.0, 125.0] {
                let expected =
                    analog_butterworth_bandpass_gain(freq, 256.0, 1.0, 120.0, order as i32);
                assert_abs_diff_eq!(f.magnitude_at(freq, 256.0), expected, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn bandpass_edges_are_half_power() {
        let f = SosFilter::butterworth_bandpass(256.0, 1.0, 120.0, 2).unwrap();
        let half = std::f64::consts::FRAC_1_SQRT_2;
        assert_abs_diff_eq!(f.magnitude_at(1.0, 256.0), half, epsilon = 1e-9);
        assert_abs_diff_eq!(f.magnitude_at(120.0, 256.0), half, epsilon = 1e-9);
    }

    #[test]
    fn rejects_bad_band() {
        assert!(SosFilter::butterworth_bandpass(256.0, 0.0, 120.0, 2).is_err());
        assert!(SosFilter::butterworth_bandpass(256.0, 10.0, 5.0, 2).is_err());
        assert!(SosFilter::butterworth_bandpass(256.0, 1.0, 128.0, 2).is_err());
        assert!(SosFilter::butterworth_bandpass(256.0, 1.0, 120.0, 0).is_err());
        assert!(SosFilter::notch(256.0, 128.0, 30.0).is_err());
        assert!(SosFilter::notch(256.0, 60.0, 0.0).is_err());
    }

    #[test]
    fn rejects_non_finite_input() {
        let s = TimeSeries::from_samples(vec![0.0, f64::NAN, 1.0], 256.0).unwrap();
        assert!(matches!(
            bandpass_filter(&s, 1.0, 120.0, 2),
            Err(Error::InvalidInput(_))
        ));
        assert!(matches!(
            notch_filter(&s, 60.0, 30.0),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn notch_zero_at_center() {
        let f = SosFilter::notch(256.0, 60.0, 30.0).unwrap();
        assert!(f.magnitude_at(60.0, 256.0) < 1e-12);
        assert!(f.magnitude_at(10.0, 256.0) > 0.99);
    }

    #[test]
    fn zero_series_stays_zero() {
        let s = TimeSeries::from_samples(vec![0.0; 512], 256.0).unwrap();
        let out = notch_filter(&s, 60.0, 30.0).unwrap();
        assert!(out.samples().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn dc_is_removed() {
        let s = TimeSeries::from_samples(vec![1.0; 1024], 256.0).unwrap();
        let out = bandpass_filter(&s, 1.0, 120.0, 2).unwrap();
        assert_eq!(out.len(), 1024);
        let tail = &out.samples()[768..];
        assert!(
            tail.iter().all(|v| v.abs() < 0.05),
            "steady value {:?}",
            tail.last()
        );
    }

    #[test]
    fn streaming_matches_batch() {
        let f = SosFilter::butterworth_bandpass(256.0, 1.0, 120.0, 3).unwrap();
        let x: Vec<f64> = (0..300)
            .map(|i| ((i * 37 % 101) as f64 - 50.0) / 7.0)
            .collect();
        let batch = f.apply(&x);
        let mut st = f.stream();
        let streamed: Vec<f64> = x.iter().map(|&v| st.process(v)).collect();
        assert_eq!(batch, streamed);
    }
}
