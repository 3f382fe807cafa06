//! Seeded synthetic recordings with known repetition boundaries.
//!
//! Each action occupies one contiguous block of repetitions. A repetition is
//! a raised-cosine excursion of the joint angles away from the action's rest
//! posture, accompanied by a band-limited EMG burst whose spectrum and
//! per-channel weighting depend on the action. Every channel also carries a
//! broadband noise floor and a 1.2 Hz pulse artifact.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dsp::SosFilter;
use crate::error::{Error, Result};
use crate::ingest::recording::{MergedRecording, MergedRow, EMG_CHANNELS, MERGED_RATE_HZ};
use crate::series::TimeSeries;

const HEARTBEAT_HZ: f64 = 1.2;
const HEARTBEAT_WIDTH_S: f64 = 0.02;

/// Shape of one action: rest posture, excursion per repetition and EMG
/// signature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionProfile {
    pub name: String,
    /// Shoulder, elbow, wrist angle at rest, degrees.
    pub rest_deg: [f64; 3],
    /// Signed peak excursion from rest during a repetition, degrees.
    pub excursion_deg: [f64; 3],
    pub emg_band_hz: (f64, f64),
    pub channel_weights: [f64; EMG_CHANNELS],
}

impl ActionProfile {
    /// The built-in actions, in order.
    pub fn builtins() -> Vec<ActionProfile> {
        vec![
            ActionProfile {
                name: "elevated_bicep_curl".into(),
                rest_deg: [87.0, 160.0, 170.0],
                excursion_deg: [3.0, -100.0, -10.0],
                emg_band_hz: (20.0, 50.0),
                channel_weights: [1.0, 0.8, 0.3, 0.2, 0.5],
            },
            ActionProfile {
                name: "lateral_arm_raise".into(),
                rest_deg: [15.0, 170.0, 175.0],
                excursion_deg: [80.0, -45.0, -5.0],
                emg_band_hz: (70.0, 110.0),
                channel_weights: [0.3, 0.5, 1.0, 0.8, 0.4],
            },
        ]
    }

    /// Angle of `joint` at sample `i` of a repetition lasting `len` samples
    /// with relative amplitude `gain`.
    fn angle(&self, joint: usize, i: usize, len: usize, gain: f64) -> f64 {
        let phase = 2.0 * std::f64::consts::PI * i as f64 / (len - 1) as f64;
        self.rest_deg[joint] + gain * self.excursion_deg[joint] * 0.5 * (1.0 - phase.cos())
    }

    /// Elbow trace of one nominal repetition, the matching template.
    pub fn template(&self, len: usize) -> Result<TimeSeries> {
        if len < 2 {
            return Err(Error::param("template length must be at least 2"));
        }
        TimeSeries::from_samples(
            (0..len).map(|i| self.angle(1, i, len, 1.0)).collect(),
            MERGED_RATE_HZ,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub actions: Vec<ActionProfile>,
    /// Repetitions per action.
    pub repetitions: usize,
    /// Nominal repetition length in samples.
    pub template_len: usize,
    /// Relative half-range of the repetition length jitter.
    pub duration_jitter: f64,
    /// Relative half-range of the repetition amplitude jitter.
    pub amplitude_jitter: f64,
    /// Gap between repetitions, as multiples of `template_len`.
    pub gap_range: (f64, f64),
    /// Rest before the first and after the last block, and between blocks,
    /// as multiples of `template_len`.
    pub rest_factor: f64,
    pub angle_noise_deg: f64,
    /// Standard deviation of the EMG noise floor, microvolts.
    pub emg_noise_uv: f64,
    /// Peak EMG burst amplitude, microvolts.
    pub emg_burst_uv: f64,
    /// Peak of the periodic pulse artifact, microvolts.
    pub heartbeat_uv: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            actions: ActionProfile::builtins()[..1].to_vec(),
            repetitions: 8,
            template_len: 128,
            duration_jitter: 0.2,
            amplitude_jitter: 0.1,
            gap_range: (0.5, 1.5),
            rest_factor: 1.5,
            angle_noise_deg: 3.0,
            emg_noise_uv: 2.0,
            emg_burst_uv: 40.0,
            heartbeat_uv: 8.0,
            seed: 0,
        }
    }
}

impl SynthConfig {
    /// Default configuration using the first `count` built-in actions.
    pub fn with_builtin_actions(count: usize) -> Result<Self> {
        let builtins = ActionProfile::builtins();
        if count == 0 || count > builtins.len() {
            return Err(Error::param(format!(
                "action count must be between 1 and {}, got {count}",
                builtins.len()
            )));
        }
        Ok(Self {
            actions: builtins[..count].to_vec(),
            ..Self::default()
        })
    }

    pub fn validate(&self) -> Result<()> {
        let nonneg = |name: &str, v: f64| {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(Error::param(format!(
                    "{name} must be finite and non-negative, got {v}"
                )))
            }
        };
        if self.actions.is_empty() {
            return Err(Error::param("at least one action is required"));
        }
        if self.repetitions == 0 {
            return Err(Error::param("repetitions must be at least 1"));
        }
        if self.template_len < 16 {
            return Err(Error::param("template_len must be at least 16 samples"));
        }
        for (name, v) in [
            ("duration_jitter", self.duration_jitter),
            ("amplitude_jitter", self.amplitude_jitter),
        ] {
            nonneg(name, v)?;
            if v >= 0.5 {
                return Err(Error::param(format!("{name} must be below 0.5, got {v}")));
            }
        }
        nonneg("gap_range.0", self.gap_range.0)?;
        nonneg("gap_range.1", self.gap_range.1)?;
        if self.gap_range.0 > self.gap_range.1 {
            return Err(Error::param("gap_range must be ordered"));
        }
        nonneg("rest_factor", self.rest_factor)?;
        nonneg("angle_noise_deg", self.angle_noise_deg)?;
        nonneg("emg_noise_uv", self.emg_noise_uv)?;
        nonneg("emg_burst_uv", self.emg_burst_uv)?;
        nonneg("heartbeat_uv", self.heartbeat_uv)?;
        for a in &self.actions {
            let (lo, hi) = a.emg_band_hz;
            if !(lo > 0.0 && lo < hi && hi < MERGED_RATE_HZ / 2.0) {
                return Err(Error::param(format!(
                    "invalid EMG band for action {}",
                    a.name
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticGroundTruth {
    pub action_name: String,
    /// Half-open `[start, end)` sample intervals, sorted and disjoint.
    pub occurrences: Vec<(usize, usize)>,
    pub template: TimeSeries,
}

/// One line of a ground-truth file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroundTruthEntry {
    pub action: String,
    pub start: usize,
    pub end: usize,
}

struct Repetition {
    action: usize,
    start: usize,
    len: usize,
    gain: f64,
}

pub fn generate_synthetic(
    config: &SynthConfig,
) -> Result<(MergedRecording, Vec<SyntheticGroundTruth>)> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let n = config.template_len;
    let scaled = |f: f64| (f * n as f64).round() as usize;
    let rest = scaled(config.rest_factor);

    // Layout first, so the noise draws do not shift repetition boundaries.
    let mut reps = Vec::new();
    let mut block_ends = Vec::new();
    let mut pos = rest;
    for action in 0..config.actions.len() {
        if action > 0 {
            pos += rest;
        }
        for k in 0..config.repetitions {
            if k > 0 {
                let g: f64 = rng.random_range(config.gap_range.0..=config.gap_range.1);
                pos += scaled(g);
            }
            let d: f64 = rng.random_range(-config.duration_jitter..=config.duration_jitter);
            let len = scaled(1.0 + d).max(2);
            let a: f64 = rng.random_range(-config.amplitude_jitter..=config.amplitude_jitter);
            reps.push(Repetition {
                action,
                start: pos,
                len,
                gain: 1.0 + a,
            });
            pos += len;
        }
        block_ends.push(pos);
    }
    let total = pos + rest;

    let angles = render_angles(config, &reps, &block_ends, rest, total, &mut rng);
    let emg = render_emg(config, &reps, total, &mut rng)?;

    let mut recording = MergedRecording::default();
    for i in 0..total {
        recording.push_unchecked(MergedRow {
            t: i as f64 / MERGED_RATE_HZ,
            emg: std::array::from_fn(|c| emg[c][i]),
            angles: std::array::from_fn(|j| angles[j][i]),
        });
    }

    let truth = config
        .actions
        .iter()
        .enumerate()
        .map(|(a, profile)| {
            Ok(SyntheticGroundTruth {
                action_name: profile.name.clone(),
                occurrences: reps
                    .iter()
                    .filter(|r| r.action == a)
                    .map(|r| (r.start, r.start + r.len))
                    .collect(),
                template: profile.template(n)?,
            })
        })
        .collect::<Result<_>>()?;
    Ok((recording, truth))
}

fn render_angles(
    config: &SynthConfig,
    reps: &[Repetition],
    block_ends: &[usize],
    rest: usize,
    total: usize,
    rng: &mut ChaCha8Rng,
) -> [Vec<f64>; 3] {
    let profiles = &config.actions;
    std::array::from_fn(|joint| {
        // Rest posture of the active block, blended across the rest interval
        // between consecutive blocks.
        let mut trace = vec![profiles[0].rest_deg[joint]; total];
        for (b, &end) in block_ends.iter().enumerate() {
            let Some(next) = profiles.get(b + 1) else {
                break;
            };
            let from = profiles[b].rest_deg[joint];
            let to = next.rest_deg[joint];
            for (k, v) in trace[end..].iter_mut().enumerate() {
                *v = if k >= rest {
                    to
                } else {
                    let w = 0.5 * (1.0 - (std::f64::consts::PI * k as f64 / rest as f64).cos());
                    from + w * (to - from)
                };
            }
        }
        for r in reps {
            let p = &profiles[r.action];
            for i in 0..r.len {
                trace[r.start + i] = p.angle(joint, i, r.len, r.gain);
            }
        }
        trace
    })
    .map(|mut trace: Vec<f64>| {
        if config.angle_noise_deg > 0.0 {
            for v in &mut trace {
                let z: f64 = StandardNormal.sample(rng);
                // An angle between two segments cannot leave [0, 180].
                *v = (*v + config.angle_noise_deg * z).clamp(0.0, 180.0);
            }
        }
        trace
    })
}

fn render_emg(
    config: &SynthConfig,
    reps: &[Repetition],
    total: usize,
    rng: &mut ChaCha8Rng,
) -> Result<[Vec<f64>; EMG_CHANNELS]> {
    let mut out: [Vec<f64>; EMG_CHANNELS] = std::array::from_fn(|_| vec![0.0; total]);
    let white = |rng: &mut ChaCha8Rng| -> Vec<f64> {
        (0..total).map(|_| StandardNormal.sample(rng)).collect()
    };

    for (c, ch) in out.iter_mut().enumerate() {
        for (v, z) in ch.iter_mut().zip(white(rng)) {
            *v = config.emg_noise_uv * z;
        }
        // Same artifact on every channel, weaker on the distal ones.
        let scale = config.heartbeat_uv * (1.0 - 0.1 * c as f64);
        for (i, v) in ch.iter_mut().enumerate() {
            let t = i as f64 / MERGED_RATE_HZ;
            let phase = (t * HEARTBEAT_HZ).fract() / HEARTBEAT_HZ - 0.5 / HEARTBEAT_HZ;
            *v += scale * (-0.5 * (phase / HEARTBEAT_WIDTH_S).powi(2)).exp();
        }
    }

    for (a, profile) in config.actions.iter().enumerate() {
        let (lo, hi) = profile.emg_band_hz;
        let filter = SosFilter::butterworth_bandpass(MERGED_RATE_HZ, lo, hi, 4)?;
        let mut envelope = vec![0.0; total];
        for r in reps.iter().filter(|r| r.action == a) {
            for i in 0..r.len {
                let s = (std::f64::consts::PI * i as f64 / (r.len - 1) as f64).sin();
                envelope[r.start + i] = r.gain * s;
            }
        }
        for (c, ch) in out.iter_mut().enumerate() {
            let band = filter.apply(&white(rng));
            let rms = (band.iter().map(|x| x * x).sum::<f64>() / total as f64).sqrt();
            let gain =
                config.emg_burst_uv * profile.channel_weights[c] / rms.max(f64::MIN_POSITIVE);
            for ((v, b), e) in ch.iter_mut().zip(&band).zip(&envelope) {
                *v += gain * e * b;
            }
        }
    }
    Ok(out)
}

pub fn write_ground_truth<W: Write>(mut w: W, truth: &[SyntheticGroundTruth]) -> Result<()> {
    for gt in truth {
        for &(start, end) in &gt.occurrences {
            writeln!(w, "{},{start},{end}", gt.action_name)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_ground_truth_path(
    path: impl AsRef<Path>,
    truth: &[SyntheticGroundTruth],
) -> Result<()> {
    let f = std::fs::File::create(path)?;
    write_ground_truth(std::io::BufWriter::new(f), truth)
}

pub fn read_ground_truth<R: Read>(reader: R) -> Result<Vec<GroundTruthEntry>> {
    let mut out = Vec::new();
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fmt = |message: String| Error::Format {
            line: i + 1,
            message,
        };
        let fields: Vec<&str> = line.split(',').collect();
        let [action, start, end] = fields[..] else {
            return Err(fmt(format!("expected 3 fields, got {}", fields.len())));
        };
        let index = |s: &str| {
            s.trim()
                .parse::<usize>()
                .map_err(|_| fmt(format!("not a sample index: {s:?}")))
        };
        let (start, end) = (index(start)?, index(end)?);
        if start >= end {
            return Err(fmt(format!("empty interval [{start}, {end})")));
        }
        out.push(GroundTruthEntry {
            action: action.to_string(),
            start,
            end,
        });
    }
    Ok(out)
}

pub fn read_ground_truth_path(path: impl AsRef<Path>) -> Result<Vec<GroundTruthEntry>> {
    read_ground_truth(std::fs::File::open(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn planted_occurrences() {
        let cfg = SynthConfig {
            seed: 7,
            ..Default::default()
        };
        let (rec, gt) = generate_synthetic(&cfg).unwrap();
        assert_eq!(gt.len(), 1);
        let occ = &gt[0].occurrences;
        assert_eq!(occ.len(), 8);
        for w in occ.windows(2) {
            assert!(w[0].1 <= w[1].0);
        }
        for &(s, e) in occ {
            assert!(s < e && e <= rec.len());
            let len = (e - s) as f64 / 128.0;
            assert!((0.8..=1.2).contains(&len));
        }
    }

    #[test]
    fn deterministic() {
        let cfg = SynthConfig::with_builtin_actions(2).unwrap();
        let a = generate_synthetic(&cfg).unwrap();
        let b = generate_synthetic(&cfg).unwrap();
        assert_eq!(a, b);
        let other = generate_synthetic(&SynthConfig { seed: 1, ..cfg }).unwrap();
        assert_ne!(a.0, other.0);
    }

    #[test]
    fn noiseless_elbow_equals_template() {
        let cfg = SynthConfig {
            angle_noise_deg: 0.0,
            duration_jitter: 0.0,
            amplitude_jitter: 0.0,
            ..SynthConfig::with_builtin_actions(2).unwrap()
        };
        let (rec, gt) = generate_synthetic(&cfg).unwrap();
        for g in &gt {
            for &(s, e) in &g.occurrences {
                assert_eq!(&rec.elbow()[s..e], g.template.samples());
            }
        }
    }

    #[test]
    fn emg_burst_tracks_repetitions() {
        let (rec, gt) = generate_synthetic(&SynthConfig::default()).unwrap();
        let rms = |x: &[f64]| (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt();
        let (s, e) = gt[0].occurrences[0];
        let mid = (s + e) / 2;
        let active = rms(&rec.emg(0)[mid - 16..mid + 16]);
        let idle = rms(&rec.emg(0)[..s]);
        assert!(active > 3.0 * idle, "active {active} idle {idle}");
    }

    #[test]
    fn rejects_bad_config() {
        for cfg in [
            SynthConfig {
                repetitions: 0,
                ..Default::default()
            },
            SynthConfig {
                template_len: 4,
                ..Default::default()
            },
            SynthConfig {
                angle_noise_deg: -1.0,
                ..Default::default()
            },
            SynthConfig {
                gap_range: (2.0, 1.0),
                ..Default::default()
            },
        ] {
            assert!(matches!(
                generate_synthetic(&cfg),
                Err(Error::InvalidParameter(_))
            ));
        }
        assert!(SynthConfig::with_builtin_actions(3).is_err());
    }

    #[test]
    fn ground_truth_round_trip() {
        let (_, gt) = generate_synthetic(&SynthConfig::with_builtin_actions(2).unwrap()).unwrap();
        let mut buf = Vec::new();
        write_ground_truth(&mut buf, &gt).unwrap();
        let back = read_ground_truth(buf.as_slice()).unwrap();
        assert_eq!(back.len(), 16);
        let expected: Vec<_> = gt
            .iter()
            .flat_map(|g| {
                g.occurrences
                    .iter()
                    .map(|&(start, end)| (g.action_name.clone(), start, end))
            })
            .collect();
        let got: Vec<_> = back
            .into_iter()
            .map(|e| (e.action, e.start, e.end))
            .collect();
        assert_eq!(got, expected);
        assert!(matches!(
            read_ground_truth("a,1\n".as_bytes()),
            Err(Error::Format { line: 1, .. })
        ));
        assert!(read_ground_truth("a,5,5\n".as_bytes()).is_err());
    }
}
