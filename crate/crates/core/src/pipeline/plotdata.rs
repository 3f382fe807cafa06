//! CSV exports of intermediate results for external plotting.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::Result;
use crate::ingest::{MergedRecording, EMG_CHANNELS};
use crate::matching::min_max_normalize;
use crate::pipeline::config::PipelineConfig;
use crate::pipeline::run::{preprocess, segment_recording};

pub const PLOTDATA_FORMAT: &str = "emg-autolabel/plotdata";
pub const PLOTDATA_VERSION: u32 = 1;

#[derive(Serialize)]
struct Manifest<'a> {
    format: &'a str,
    version: u32,
    config_hash: String,
    files: Vec<String>,
}

fn writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    Ok(csv::Writer::from_path(path).map_err(std::io::Error::from)?)
}

fn flush(mut w: csv::Writer<fs::File>) -> Result<()> {
    w.flush()?;
    Ok(())
}

fn field(v: f64) -> String {
    format!("{v}")
}

/// Runs preprocessing and segmentation on `raw` and writes one CSV per
/// intermediate plus a `manifest.json` into `out_dir`. Returns the paths
/// written, manifest last.
pub fn write_plotdata(
    config: &PipelineConfig,
    raw: &MergedRecording,
    out_dir: &Path,
) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir)?;
    let clean = preprocess(config, raw)?;
    let seg = segment_recording(config, &clean)?;
    let t = raw.timestamps();
    let csv_err = |e: csv::Error| crate::error::Error::Io(std::io::Error::from(e));
    let mut files = Vec::new();

    let path = out_dir.join("angle.csv");
    let mut w = writer(&path)?;
    w.write_record(["index", "t", "elbow_raw", "elbow_ssa"])
        .map_err(csv_err)?;
    let elbow = raw.elbow();
    let smooth = seg.smoothed_elbow.as_deref().unwrap_or(elbow);
    for i in 0..raw.len() {
        w.write_record([
            i.to_string(),
            field(t[i]),
            field(elbow[i]),
            field(smooth[i]),
        ])
        .map_err(csv_err)?;
    }
    flush(w)?;
    files.push(path);

    let path = out_dir.join("emg.csv");
    let mut w = writer(&path)?;
    let mut header = vec!["t".to_string()];
    header.extend((1..=EMG_CHANNELS).map(|c| format!("ch{c}_raw")));
    header.extend((1..=EMG_CHANNELS).map(|c| format!("ch{c}_filtered")));
    w.write_record(&header).map_err(csv_err)?;
    for i in 0..raw.len() {
        let mut rec = vec![field(t[i])];
        rec.extend((0..EMG_CHANNELS).map(|c| field(raw.emg(c)[i])));
        rec.extend((0..EMG_CHANNELS).map(|c| field(clean.emg(c)[i])));
        w.write_record(&rec).map_err(csv_err)?;
    }
    flush(w)?;
    files.push(path);

    for trace in &seg.traces {
        let path = out_dir.join(format!("distance_{}.csv", trace.action));
        let mut w = writer(&path)?;
        w.write_record([
            "position",
            "distance",
            "normalized",
            "minimum_depth1",
            "minimum",
        ])
        .map_err(csv_err)?;
        let d = &trace.profile.distances;
        let norm = min_max_normalize(d).unwrap_or_else(|| vec![0.0; d.len()]);
        for (k, (&pos, &v)) in trace.profile.positions.iter().zip(d).enumerate() {
            let first = trace.minima_first_level.contains(&k);
            let any = trace.minima.contains(&k);
            w.write_record([
                pos.to_string(),
                field(v),
                field(norm[k]),
                u8::from(first).to_string(),
                u8::from(any).to_string(),
            ])
            .map_err(csv_err)?;
        }
        flush(w)?;
        files.push(path);
    }

    let path = out_dir.join("segments.csv");
    let mut w = writer(&path)?;
    w.write_record([
        "action",
        "rank",
        "start",
        "end",
        "t_start",
        "t_end",
        "dtw_distance",
    ])
    .map_err(csv_err)?;
    let dt = 1.0 / raw.sample_rate_hz();
    for a in &seg.file.actions {
        for (rank, s) in a.extraction.segments.iter().enumerate() {
            w.write_record([
                a.action.clone(),
                (rank + 1).to_string(),
                s.start.to_string(),
                s.end.to_string(),
                field(t[s.start]),
                field(t[s.end - 1] + dt),
                field(s.dtw_distance),
            ])
            .map_err(csv_err)?;
        }
    }
    flush(w)?;
    files.push(path);

    let path = out_dir.join("manifest.json");
    let manifest = Manifest {
        format: PLOTDATA_FORMAT,
        version: PLOTDATA_VERSION,
        config_hash: seg.file.config_hash.clone(),
        files: files
            .iter()
            .filter_map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
            .collect(),
    };
    fs::write(&path, serde_json::to_vec_pretty(&manifest)?)?;
    files.push(path);
    Ok(files)
}
