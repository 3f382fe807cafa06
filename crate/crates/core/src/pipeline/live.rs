//! Near-real-time mode.
//!
//! A datagram listener and an EMG reader each run on their own thread and
//! feed one merger over a single ordered channel. While streaming, the elbow
//! angle is smoothed over a trailing context and each distance-profile entry
//! is computed once, as soon as its window has arrived. Every quarter of a
//! scan window `W` of new rows, minima and extraction are re-run on the
//! profile so far, and segments ending at least `W/2` rows before the last
//! smoothed row are reported once; a repetition is reported no later than
//! `W` rows after it ends. These reports are provisional. The authoritative
//! result is the file-mode pipeline on the complete merged recording,
//! produced when the streams end.

use std::io::BufRead;
use std::net::UdpSocket;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc;
use std::sync::Arc;
use std::time::{Duration, Instant};

use crate::dsp::ssa_denoise;
use crate::error::{Error, Result};
use crate::ingest::{
    Alignment, MergeOptions, MergedRecording, PacketStats, StreamMerger, EMG_CHANNELS,
    MERGED_RATE_HZ,
};
use crate::kinematics::AngleFrame;
use crate::matching::{
    detect_minima_in, extract_segments, mdtw_scan_with, DistanceProfile, ScanOptions, Template,
};
use crate::pipeline::config::PipelineConfig;
use crate::pipeline::run::{run_pipeline, PipelineOutput};
use crate::series::TimeSeries;

/// A segment considered closed while streaming.
#[derive(Debug, Clone, PartialEq)]
pub struct LiveEvent {
    pub action: String,
    pub start: usize,
    pub end: usize,
    pub t_start: f64,
    pub t_end: f64,
    pub dtw_distance: f64,
    /// Merged rows available when the segment was reported.
    pub rows_seen: usize,
}

/// Incremental scan state of one action.
struct ActionScan {
    template: Template,
    window: usize,
    distances: Vec<f64>,
}

/// Single-writer state of a live run.
pub struct LiveSession {
    config: PipelineConfig,
    options: MergeOptions,
    merger: Option<StreamMerger>,
    /// Angle frames that arrived before the first EMG sample.
    early_angles: Vec<AngleFrame>,
    window: usize,
    stride: usize,
    last_run: usize,
    /// Smoothed elbow angle, frozen once computed.
    smoothed: Vec<f64>,
    scans: Vec<ActionScan>,
    /// Reported `(action, start, end)` spans.
    emitted: Vec<(String, usize, usize)>,
    rejected_angles: usize,
}

impl LiveSession {
    pub fn new(config: PipelineConfig) -> Result<Self> {
        config.validate()?;
        let window = config.max_window_len()?;
        let scans = config
            .templates()?
            .into_iter()
            .map(|template| ActionScan {
                window: config.mdtw.window_factor * template.len(),
                template,
                distances: Vec::new(),
            })
            .collect();
        let options = MergeOptions {
            alignment: if config.live.interpolate {
                Alignment::Linear
            } else {
                Alignment::Hold
            },
            clock_offset_s: config.live.clock_offset_s,
        };
        Ok(Self {
            config,
            options,
            merger: None,
            early_angles: Vec::new(),
            window,
            stride: (window / 4).max(1),
            last_run: 0,
            smoothed: Vec::new(),
            scans,
            emitted: Vec::new(),
            rejected_angles: 0,
        })
    }

    pub fn push_emg(&mut self, t: f64, sample: [f64; EMG_CHANNELS]) {
        let merger = self
            .merger
            .get_or_insert_with(|| StreamMerger::new(t, self.options));
        if !self.early_angles.is_empty() {
            for f in std::mem::take(&mut self.early_angles) {
                if merger.push_angle(f).is_err() {
                    self.rejected_angles += 1;
                }
            }
        }
        merger.push_emg(sample);
    }

    /// Out-of-order frames are counted and skipped.
    pub fn push_angle(&mut self, frame: AngleFrame) {
        match &mut self.merger {
            Some(m) => {
                if m.push_angle(frame).is_err() {
                    self.rejected_angles += 1;
                }
            }
            None => {
                if self.early_angles.last().is_some_and(|l| l.t >= frame.t) {
                    self.rejected_angles += 1;
                } else {
                    self.early_angles.push(frame);
                }
            }
        }
    }

    pub fn rows(&self) -> usize {
        self.merger.as_ref().map_or(0, |m| m.recording().len())
    }

    pub fn rejected_angles(&self) -> usize {
        self.rejected_angles
    }

    /// Extends the smoothed angle and distance profiles once enough new rows
    /// are available and returns newly closed segments. Problems in this
    /// provisional pass (a stream still too short to smooth, say) only delay
    /// reports; the final pass surfaces them.
    pub fn poll(&mut self) -> Result<Vec<LiveEvent>> {
        let Some(merger) = &self.merger else {
            return Ok(Vec::new());
        };
        let rec = merger.recording();
        let n = rec.len();
        if n < self.last_run + self.stride || n < self.window {
            return Ok(Vec::new());
        }
        self.last_run = n;

        // Rows within a stride of the newest still lack right-hand context.
        let frozen = n - self.stride;
        if frozen > self.smoothed.len() {
            let from = frozen
                .saturating_sub(4 * self.window)
                .min(self.smoothed.len());
            let Ok(context) =
                TimeSeries::from_samples(rec.elbow()[from..].to_vec(), MERGED_RATE_HZ).and_then(
                    |s| ssa_denoise(&s, self.config.ssa.window_len, self.config.ssa.rank),
                )
            else {
                return Ok(Vec::new());
            };
            let have = self.smoothed.len();
            self.smoothed
                .extend_from_slice(&context.samples()[have - from..frozen - from]);
        }

        let m = &self.config.mdtw;
        let mut events = Vec::new();
        for scan in &mut self.scans {
            let next = scan.distances.len();
            if frozen >= next + scan.window {
                let opts = ScanOptions {
                    window_factor: m.window_factor,
                    local_cost: m.local_cost,
                };
                if let Ok(p) =
                    mdtw_scan_with(scan.template.series.samples(), &self.smoothed[next..], opts)
                {
                    scan.distances.extend(p.distances);
                }
            }
            let Ok(minima) = detect_minima_in(&scan.distances, m.threshold, m.max_depth) else {
                continue;
            };
            let profile = DistanceProfile {
                distances: scan.distances.clone(),
                positions: (0..scan.distances.len()).collect(),
                window_len: scan.window,
                template_len: scan.template.len(),
            };
            let Ok(extraction) = extract_segments(
                &profile,
                &minima,
                &scan.template,
                &self.smoothed,
                m.extract_options(),
            ) else {
                continue;
            };
            let action = &scan.template.action_name;
            for s in &extraction.segments {
                // The span before the first minimum is only trustworthy once
                // the whole stream is known.
                if s.candidate_start == 0 || s.end + scan.window / 2 > frozen {
                    continue;
                }
                let seen = self
                    .emitted
                    .iter()
                    .any(|(act, a0, a1)| act == action && overlaps(*a0, *a1, s.start, s.end));
                if !seen {
                    self.emitted.push((action.clone(), s.start, s.end));
                    events.push(LiveEvent {
                        action: action.clone(),
                        start: s.start,
                        end: s.end,
                        t_start: rec.timestamps()[s.start],
                        t_end: rec.timestamps()[s.end - 1] + 1.0 / MERGED_RATE_HZ,
                        dtw_distance: s.dtw_distance,
                        rows_seen: n,
                    });
                }
            }
        }
        events.sort_by_key(|e| (e.start, e.action.clone()));
        Ok(events)
    }

    /// Closes the angle stream and runs the file-mode pipeline on the
    /// complete merged recording.
    pub fn finish(self) -> Result<(MergedRecording, usize, PipelineOutput)> {
        let merger = self
            .merger
            .ok_or_else(|| Error::Unmergeable("no EMG samples were received".into()))?;
        let merged = merger.finish();
        if merged.recording.is_empty() {
            return Err(Error::Unmergeable(
                "no angle frame precedes any EMG sample".into(),
            ));
        }
        let output = run_pipeline(&self.config, &merged.recording)?;
        Ok((merged.recording, merged.dropped, output))
    }
}

/// Whether two spans share more than half of the shorter one. Re-running on
/// a longer stream can move a boundary by a sample or two; such a span is
/// the same repetition.
fn overlaps(a0: usize, a1: usize, b0: usize, b1: usize) -> bool {
    let common = a1.min(b1).saturating_sub(a0.max(b0));
    2 * common > (a1 - a0).min(b1 - b0)
}

#[derive(Debug)]
pub struct LiveOutcome {
    pub recording: MergedRecording,
    pub output: PipelineOutput,
    pub packets: PacketStats,
    /// EMG samples before the first angle frame.
    pub dropped_emg: usize,
    /// Angle frames not later than their predecessor.
    pub rejected_angles: usize,
}

enum Msg {
    Emg(f64, [f64; EMG_CHANNELS]),
    EmgDone,
    Angle(AngleFrame),
    AngleDone,
    Failed(Error),
}

/// Parses `t,ch1,...,ch5` lines (header first) and forwards them.
fn read_emg<R: BufRead>(reader: R, tx: &mpsc::Sender<Msg>) -> Result<()> {
    let mut lines = reader.lines();
    let header = lines.next().transpose()?.unwrap_or_default();
    let cols: Vec<&str> = header.trim().split(',').collect();
    if cols != ["t", "ch1", "ch2", "ch3", "ch4", "ch5"] {
        return Err(Error::Format {
            line: 1,
            message: "EMG header must be t,ch1,ch2,ch3,ch4,ch5".into(),
        });
    }
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let vals: Vec<f64> = line
            .trim()
            .split(',')
            .map(|v| v.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::Format {
                line: i + 2,
                message: format!("not numeric: {line:?}"),
            })?;
        if vals.len() != 1 + EMG_CHANNELS {
            return Err(Error::Format {
                line: i + 2,
                message: format!("expected 6 fields, got {}", vals.len()),
            });
        }
        if tx
            .send(Msg::Emg(vals[0], std::array::from_fn(|c| vals[c + 1])))
            .is_err()
        {
            break;
        }
    }
    Ok(())
}

/// Runs a live session: EMG rows from `emg` (CSV with header
/// `t,ch1,...,ch5`), angle datagrams on `socket`. A datagram reading `end`
/// closes the angle stream; otherwise it closes once the EMG stream has
/// ended and no datagram arrived for the configured idle timeout.
pub fn run_live<R, F>(
    config: PipelineConfig,
    emg: R,
    socket: UdpSocket,
    mut on_event: F,
) -> Result<LiveOutcome>
where
    R: BufRead + Send + 'static,
    F: FnMut(&LiveEvent),
{
    let idle = Duration::from_millis(config.live.idle_timeout_ms);
    let mut session = LiveSession::new(config)?;
    let (tx, rx) = mpsc::channel::<Msg>();
    let stop = Arc::new(AtomicBool::new(false));

    let emg_tx = tx.clone();
    let emg_thread = std::thread::spawn(move || {
        let msg = match read_emg(emg, &emg_tx) {
            Ok(()) => Msg::EmgDone,
            Err(e) => Msg::Failed(e),
        };
        let _ = emg_tx.send(msg);
    });

    socket.set_read_timeout(Some(Duration::from_millis(20)))?;
    let udp_stop = stop.clone();
    let udp_thread = std::thread::spawn(move || -> PacketStats {
        let mut stats = PacketStats::default();
        let mut buf = [0u8; 512];
        while !udp_stop.load(Ordering::Relaxed) {
            match socket.recv(&mut buf) {
                Ok(len) => {
                    let payload = &buf[..len];
                    if payload.trim_ascii() == b"end" {
                        let _ = tx.send(Msg::AngleDone);
                        break;
                    }
                    if let Some(frame) = stats.accept(payload) {
                        if tx.send(Msg::Angle(frame)).is_err() {
                            break;
                        }
                    }
                }
                Err(e)
                    if matches!(
                        e.kind(),
                        std::io::ErrorKind::WouldBlock | std::io::ErrorKind::TimedOut
                    ) => {}
                Err(e) => {
                    let _ = tx.send(Msg::Failed(e.into()));
                    break;
                }
            }
        }
        stats
    });

    let mut emg_done = false;
    let mut angles_done = false;
    let mut last_angle = Instant::now();
    let mut failure = None;
    while !(emg_done && angles_done) {
        match rx.recv_timeout(Duration::from_millis(10)) {
            Ok(Msg::Emg(t, s)) => {
                session.push_emg(t, s);
                for e in session.poll()? {
                    on_event(&e);
                }
            }
            Ok(Msg::Angle(f)) => {
                last_angle = Instant::now();
                session.push_angle(f);
                for e in session.poll()? {
                    on_event(&e);
                }
            }
            Ok(Msg::EmgDone) => emg_done = true,
            Ok(Msg::AngleDone) => angles_done = true,
            Ok(Msg::Failed(e)) => {
                failure = Some(e);
                break;
            }
            Err(mpsc::RecvTimeoutError::Timeout) => {
                if emg_done && last_angle.elapsed() >= idle {
                    angles_done = true;
                }
            }
            Err(mpsc::RecvTimeoutError::Disconnected) => break,
        }
    }
    stop.store(true, Ordering::Relaxed);
    drop(rx);
    let packets = udp_thread.join().unwrap_or_default();
    let _ = emg_thread.join();
    if let Some(e) = failure {
        return Err(e);
    }
    let rejected_angles = session.rejected_angles();
    let (recording, dropped_emg, output) = session.finish()?;
    Ok(LiveOutcome {
        recording,
        output,
        packets,
        dropped_emg,
        rejected_angles,
    })
}
