//! Aligns the 256 Hz EMG stream with the slower angle stream.
//!
//! Every EMG sample becomes one output row; the angle columns are taken from
//! the angle frames at the sample's timestamp. A row is only emitted once its
//! angles can no longer change, i.e. after an angle frame later than the row
//! has arrived or the angle stream has ended. Batch merging is the streaming
//! merger fed everything at once, so both paths produce identical rows.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::ingest::recording::{MergedRecording, MergedRow, EMG_CHANNELS, MERGED_RATE_HZ};
use crate::kinematics::AngleFrame;
use crate::series::TimeSeries;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Alignment {
    /// Latest angle frame at or before the sample time.
    #[default]
    Hold,
    /// Linear interpolation between the surrounding frames.
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MergeOptions {
    pub alignment: Alignment,
    /// Added to angle timestamps to bring them onto the EMG clock.
    pub clock_offset_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MergeOutput {
    pub recording: MergedRecording,
    /// EMG samples before the first angle frame.
    pub dropped: usize,
}

/// Incremental single-writer merger.
#[derive(Debug, Clone)]
pub struct StreamMerger {
    options: MergeOptions,
    emg_t0: f64,
    next_emg_index: u64,
    pending: VecDeque<(f64, [f64; EMG_CHANNELS])>,
    /// Angle frames shifted onto the EMG clock. The front is the newest
    /// frame at or before the oldest pending sample; older ones are pruned.
    frames: VecDeque<AngleFrame>,
    angles_closed: bool,
    dropped: usize,
    out: MergedRecording,
    drained: usize,
}

impl StreamMerger {
    pub fn new(emg_t0: f64, options: MergeOptions) -> Self {
        Self {
            options,
            emg_t0,
            next_emg_index: 0,
            pending: VecDeque::new(),
            frames: VecDeque::new(),
            angles_closed: false,
            dropped: 0,
            out: MergedRecording::default(),
            drained: 0,
        }
    }

    pub fn push_emg(&mut self, sample: [f64; EMG_CHANNELS]) {
        let t = self.emg_t0 + self.next_emg_index as f64 / MERGED_RATE_HZ;
        self.next_emg_index += 1;
        self.pending.push_back((t, sample));
        self.flush();
    }

    pub fn push_angle(&mut self, frame: AngleFrame) -> Result<()> {
        let shifted = AngleFrame {
            t: frame.t + self.options.clock_offset_s,
            ..frame
        };
        if let Some(&last) = self.frames.back() {
            if shifted.t <= last.t {
                return Err(Error::Data {
                    row: 0,
                    message: format!(
                        "angle frame at t = {} is not after previous frame at t = {}",
                        shifted.t, last.t
                    ),
                });
            }
        }
        self.frames.push_back(shifted);
        self.flush();
        Ok(())
    }

    /// No more angle frames will arrive; all buffered rows become final.
    pub fn close_angles(&mut self) {
        self.angles_closed = true;
        self.flush();
    }

    fn flush(&mut self) {
        while let Some(&(t, emg)) = self.pending.front() {
            let Some(latest) = self.frames.back() else {
                if self.angles_closed {
                    self.dropped += self.pending.len();
                    self.pending.clear();
                }
                return;
            };
            if latest.t <= t && !self.angles_closed {
                // A later frame may still arrive for this sample.
                return;
            }
            self.pending.pop_front();
            while self.frames.len() >= 2 && self.frames[1].t <= t {
                self.frames.pop_front();
            }
            match self.angles_at(t) {
                Some(angles) => self.out.push_unchecked(MergedRow { t, emg, angles }),
                None => self.dropped += 1,
            }
        }
    }

    /// Angles for time `t` once the frame queue has been pruned up to `t`.
    /// `None` if `t` precedes the first frame.
    fn angles_at(&self, t: f64) -> Option<[f64; 3]> {
        let first = self.frames.front().filter(|f| f.t <= t)?;
        let Some(next) = self.frames.get(1) else {
            return Some(first.angles());
        };
        Some(match self.options.alignment {
            Alignment::Hold => first.angles(),
            Alignment::Linear => {
                let w = (t - first.t) / (next.t - first.t);
                let (a, b) = (first.angles(), next.angles());
                std::array::from_fn(|c| a[c] + w * (b[c] - a[c]))
            }
        })
    }

    /// Rows finalized since the previous call.
    pub fn drain_ready(&mut self) -> Vec<MergedRow> {
        let rows: Vec<MergedRow> = (self.drained..self.out.len())
            .map(|i| self.out.row(i))
            .collect();
        self.drained = self.out.len();
        rows
    }

    pub fn dropped(&self) -> usize {
        self.dropped
    }

    pub fn recording(&self) -> &MergedRecording {
        &self.out
    }

    pub fn finish(mut self) -> MergeOutput {
        self.close_angles();
        MergeOutput {
            recording: self.out,
            dropped: self.dropped,
        }
    }
}

/// Merges five equal-length 256 Hz EMG channels with a time-sorted angle
/// frame sequence.
pub fn merge_streams(
    emg: &[TimeSeries],
    angles: &[AngleFrame],
    options: MergeOptions,
) -> Result<MergeOutput> {
    if emg.len() != EMG_CHANNELS {
        return Err(Error::input(format!(
            "expected {EMG_CHANNELS} EMG channels, got {}",
            emg.len()
        )));
    }
    if angles.is_empty() {
        return Err(Error::Unmergeable("angle sequence is empty".into()));
    }
    let n = emg[0].len();
    for (c, s) in emg.iter().enumerate() {
        if s.len() != n || s.sample_rate_hz() != emg[0].sample_rate_hz() || s.t0() != emg[0].t0() {
            return Err(Error::input(format!(
                "EMG channel {} differs in length, rate or start time from channel 1",
                c + 1
            )));
        }
    }
    if emg[0].sample_rate_hz() != MERGED_RATE_HZ {
        return Err(Error::input(format!(
            "EMG must be sampled at {MERGED_RATE_HZ} Hz, got {}",
            emg[0].sample_rate_hz()
        )));
    }

    let mut merger = StreamMerger::new(emg[0].t0(), options);
    for (i, f) in angles.iter().enumerate() {
        merger.push_angle(*f).map_err(|e| match e {
            Error::Data { message, .. } => Error::Data { row: i, message },
            other => other,
        })?;
    }
    for i in 0..n {
        merger.push_emg(std::array::from_fn(|c| emg[c].samples()[i]));
    }
    Ok(merger.finish())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn emg(n: usize) -> Vec<TimeSeries> {
        (0..EMG_CHANNELS)
            .map(|c| {
                TimeSeries::from_samples(
                    (0..n).map(|i| (i * 7 + c) as f64 * 0.001 - 0.3).collect(),
                    MERGED_RATE_HZ,
                )
                .unwrap()
            })
            .collect()
    }

    fn frame(t: f64, elbow: f64) -> AngleFrame {
        AngleFrame {
            t,
            shoulder_deg: 10.0,
            elbow_deg: elbow,
            wrist_deg: 170.0,
        }
    }

    #[test]
    fn hold_semantics() {
        let out = merge_streams(
            &emg(256),
            &[frame(0.0, 90.0), frame(0.5, 120.0)],
            MergeOptions::default(),
        )
        .unwrap();
        assert_eq!(out.dropped, 0);
        let rec = out.recording;
        assert_eq!(rec.len(), 256);
        assert!(rec.elbow()[..128].iter().all(|&v| v == 90.0));
        assert!(rec.elbow()[128..].iter().all(|&v| v == 120.0));
    }

    #[test]
    fn drops_prefix_before_first_frame() {
        let e = emg(256);
        let out = merge_streams(&e, &[frame(0.25, 90.0)], MergeOptions::default()).unwrap();
        assert_eq!(out.dropped, 64);
        assert_eq!(out.recording.len(), 192);
        assert_eq!(out.recording.timestamps()[0], 0.25);
        // EMG values pass through untouched.
        for c in 0..EMG_CHANNELS {
            assert_eq!(out.recording.emg(c), &e[c].samples()[64..]);
        }
    }

    #[test]
    fn linear_interpolation() {
        let opts = MergeOptions {
            alignment: Alignment::Linear,
            ..Default::default()
        };
        let out = merge_streams(&emg(256), &[frame(0.0, 90.0), frame(0.5, 120.0)], opts).unwrap();
        assert_eq!(out.recording.elbow()[64], 105.0);
        assert_eq!(out.recording.elbow()[200], 120.0);
    }

    #[test]
    fn clock_offset_shifts_angles() {
        let opts = MergeOptions {
            clock_offset_s: 0.25,
            ..Default::default()
        };
        let out = merge_streams(&emg(256), &[frame(0.0, 90.0)], opts).unwrap();
        assert_eq!(out.dropped, 64);
    }

    #[test]
    fn errors() {
        assert!(matches!(
            merge_streams(&emg(10), &[], MergeOptions::default()),
            Err(Error::Unmergeable(_))
        ));
        assert!(matches!(
            merge_streams(
                &emg(10),
                &[frame(1.0, 90.0), frame(0.5, 90.0)],
                MergeOptions::default()
            ),
            Err(Error::Data { row: 1, .. })
        ));
        let mut short = emg(10);
        short[2] = TimeSeries::from_samples(vec![0.0; 9], MERGED_RATE_HZ).unwrap();
        assert!(merge_streams(&short, &[frame(0.0, 1.0)], MergeOptions::default()).is_err());
    }

    #[test]
    fn streaming_interleaving_matches_batch() {
        let e = emg(600);
        let frames: Vec<AngleFrame> = (0..70)
            .map(|k| frame(0.1 + k as f64 / 30.0, 60.0 + k as f64))
            .collect();
        for alignment in [Alignment::Hold, Alignment::Linear] {
            let opts = MergeOptions {
                alignment,
                clock_offset_s: 0.0,
            };
            let batch = merge_streams(&e, &frames, opts).unwrap();

            let mut m = StreamMerger::new(0.0, opts);
            let mut live_rows = Vec::new();
            let mut fi = 0;
            for i in 0..600 {
                m.push_emg(std::array::from_fn(|c| e[c].samples()[i]));
                // Angles arrive in bursts, lagging behind the EMG.
                if i % 25 == 24 {
                    while fi < frames.len() && frames[fi].t < i as f64 / 256.0 - 0.05 {
                        m.push_angle(frames[fi]).unwrap();
                        fi += 1;
                    }
                    live_rows.extend(m.drain_ready());
                }
            }
            for f in &frames[fi..] {
                m.push_angle(*f).unwrap();
            }
            m.close_angles();
            live_rows.extend(m.drain_ready());
            assert_eq!(
                MergedRecording::from_rows(&live_rows).unwrap(),
                batch.recording
            );
            assert_eq!(m.dropped(), batch.dropped);
        }
    }
}
