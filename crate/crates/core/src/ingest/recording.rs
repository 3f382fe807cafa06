use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::series::TimeSeries;

pub const EMG_CHANNELS: usize = 5;
pub const ANGLE_CHANNELS: usize = 3;
pub const MERGED_RATE_HZ: f64 = 256.0;
/// Index of the elbow angle within the angle channels.
pub const ELBOW_CHANNEL: usize = 1;

/// Column names of the recording CSV, in file order.
pub const CHANNEL_NAMES: [&str; 9] = [
    "t", "ch1", "ch2", "ch3", "ch4", "ch5", "shoulder", "elbow", "wrist",
];

const SPACING_TOLERANCE_S: f64 = 1e-6;

/// One row of a merged recording.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MergedRow {
    pub t: f64,
    pub emg: [f64; EMG_CHANNELS],
    pub angles: [f64; ANGLE_CHANNELS],
}

/// Five EMG channels and three joint angles on a common 256 Hz time base,
/// stored column-wise.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MergedRecording {
    t: Vec<f64>,
    emg: [Vec<f64>; EMG_CHANNELS],
    angles: [Vec<f64>; ANGLE_CHANNELS],
}

impl MergedRecording {
    pub fn from_rows(rows: &[MergedRow]) -> Result<Self> {
        let mut rec = Self::default();
        for (i, r) in rows.iter().enumerate() {
            rec.push_checked(i, *r)?;
        }
        Ok(rec)
    }

    pub(crate) fn push_checked(&mut self, row_index: usize, row: MergedRow) -> Result<()> {
        if let Some(&prev) = self.t.last() {
            if row.t <= prev {
                return Err(Error::Data {
                    row: row_index,
                    message: format!("timestamp {} does not increase (previous {prev})", row.t),
                });
            }
            let spacing = row.t - prev;
            if (spacing - 1.0 / MERGED_RATE_HZ).abs() > SPACING_TOLERANCE_S {
                return Err(Error::Data {
                    row: row_index,
                    message: format!(
                        "sample spacing {spacing} s does not match {MERGED_RATE_HZ} Hz"
                    ),
                });
            }
        }
        self.push_unchecked(row);
        Ok(())
    }

    pub(crate) fn push_unchecked(&mut self, row: MergedRow) {
        self.t.push(row.t);
        for (col, v) in self.emg.iter_mut().zip(row.emg) {
            col.push(v);
        }
        for (col, v) in self.angles.iter_mut().zip(row.angles) {
            col.push(v);
        }
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn sample_rate_hz(&self) -> f64 {
        MERGED_RATE_HZ
    }

    pub fn timestamps(&self) -> &[f64] {
        &self.t
    }

    pub fn emg(&self, channel: usize) -> &[f64] {
        &self.emg[channel]
    }

    pub fn angle(&self, channel: usize) -> &[f64] {
        &self.angles[channel]
    }

    pub fn elbow(&self) -> &[f64] {
        &self.angles[ELBOW_CHANNEL]
    }

    pub fn row(&self, i: usize) -> MergedRow {
        MergedRow {
            t: self.t[i],
            emg: std::array::from_fn(|c| self.emg[c][i]),
            angles: std::array::from_fn(|c| self.angles[c][i]),
        }
    }

    pub fn rows(&self) -> impl Iterator<Item = MergedRow> + '_ {
        (0..self.len()).map(|i| self.row(i))
    }

    fn series(&self, samples: &[f64]) -> TimeSeries {
        let t0 = self.t.first().copied().unwrap_or(0.0);
        TimeSeries::new(samples.to_vec(), MERGED_RATE_HZ, t0).expect("constant rate is valid")
    }

    pub fn emg_series(&self, channel: usize) -> TimeSeries {
        self.series(&self.emg[channel])
    }

    pub fn angle_series(&self, channel: usize) -> TimeSeries {
        self.series(&self.angles[channel])
    }

    pub fn elbow_series(&self) -> TimeSeries {
        self.angle_series(ELBOW_CHANNEL)
    }

    /// Copy with one angle channel replaced.
    pub fn with_angle(&self, channel: usize, samples: Vec<f64>) -> Result<Self> {
        if samples.len() != self.len() {
            return Err(Error::param(format!(
                "replacement channel has {} samples, recording has {}",
                samples.len(),
                self.len()
            )));
        }
        let mut out = self.clone();
        out.angles[channel] = samples;
        Ok(out)
    }

    /// Copy with one EMG channel replaced.
    pub fn with_emg(&self, channel: usize, samples: Vec<f64>) -> Result<Self> {
        if samples.len() != self.len() {
            return Err(Error::param(format!(
                "replacement channel has {} samples, recording has {}",
                samples.len(),
                self.len()
            )));
        }
        let mut out = self.clone();
        out.emg[channel] = samples;
        Ok(out)
    }

    /// Rows `[start, end)`.
    pub fn slice(&self, start: usize, end: usize) -> Result<Self> {
        if start > end || end > self.len() {
            return Err(Error::param(format!(
                "slice [{start}, {end}) outside recording of {} rows",
                self.len()
            )));
        }
        Ok(Self {
            t: self.t[start..end].to_vec(),
            emg: std::array::from_fn(|c| self.emg[c][start..end].to_vec()),
            angles: std::array::from_fn(|c| self.angles[c][start..end].to_vec()),
        })
    }

    /// Parses the recording CSV (`t,ch1,...,ch5,shoulder,elbow,wrist`).
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let mut records = rdr.records();

        let header = match records.next() {
            Some(r) => r.map_err(|e| csv_error(e, 1))?,
            None => {
                return Err(Error::Format {
                    line: 1,
                    message: "empty file, expected header".into(),
                })
            }
        };
        let mut columns = [0usize; 9];
        for (slot, name) in columns.iter_mut().zip(CHANNEL_NAMES) {
            *slot = header
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::Format {
                    line: 1,
                    message: format!("header is missing column \"{name}\""),
                })?;
        }

        let mut rec = Self::default();
        for (row_index, record) in records.enumerate() {
            let line = row_index + 2;
            let record = record.map_err(|e| csv_error(e, line))?;
            let line = record.position().map_or(line, |p| p.line() as usize);
            let mut values = [0.0; 9];
            for ((v, &col), name) in values.iter_mut().zip(&columns).zip(CHANNEL_NAMES) {
                let field = record.get(col).ok_or_else(|| Error::Format {
                    line,
                    message: format!("missing field \"{name}\""),
                })?;
                *v = field
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::Format {
                        line,
                        message: format!("field \"{name}\" is not a finite number: {field:?}"),
                    })?;
            }
            rec.push_checked(
                row_index,
                MergedRow {
                    t: values[0],
                    emg: std::array::from_fn(|c| values[1 + c]),
                    angles: std::array::from_fn(|c| values[6 + c]),
                },
            )?;
        }
        Ok(rec)
    }

    pub fn read_csv_path(path: impl AsRef<Path>) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::read_csv(std::io::BufReader::new(file))
    }

    /// Writes the recording CSV. Values use shortest round-trip formatting,
    /// so reading the file back is lossless.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{}", CHANNEL_NAMES.join(","))?;
        for r in self.rows() {
            write!(w, "{}", r.t)?;
            for v in r.emg.iter().chain(&r.angles) {
                write!(w, ",{v}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    pub fn write_csv_path(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = std::fs::File::create(path)?;
        let mut w = std::io::BufWriter::new(file);
        self.write_csv(&mut w)?;
        w.flush()?;
        Ok(())
    }
}

fn csv_error(e: csv::Error, line: usize) -> Error {
    let line = e.position().map_or(line, |p| p.line() as usize);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Format {
            line,
            message: format!("{other:?}"),
        },
    }
}
