//! `autolabel`: command-line front end for the EMG auto-labeling pipeline.
//!
//! Exit codes: 0 success, 1 data or processing error, 2 usage error. On
//! failure the last line on standard error is a JSON object with `error`
//! (a stable kind), `message` and `exit_code`.

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::net::UdpSocket;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use emg_autolabel::features::FeatureMatrix;
use emg_autolabel::ingest::{
    generate_synthetic, write_ground_truth_path, MergedRecording, SynthConfig,
};
use emg_autolabel::matching::LabeledDataset;
use emg_autolabel::pipeline::{
    featurize, label_recording, preprocess, run_live, segment_recording, train_model,
    write_plotdata, ModelBundle, PipelineConfig, PipelineReport, SegmentsFile,
};

#[derive(Parser)]
#[command(
    name = "autolabel",
    version,
    about = "Automatic labeling of EMG recordings by joint-angle template matching"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic recording and its ground truth.
    Synth(SynthArgs),
    /// Band-pass and notch filter the EMG channels of a recording.
    Denoise(DenoiseArgs),
    /// Find action repetitions in a recording.
    Segment(SegmentArgs),
    /// Cut a recording into a labeled dataset using a segments file.
    Label(LabelArgs),
    /// Compute the feature matrix of a labeled dataset.
    Featurize(FeaturizeArgs),
    /// Select features, cross-validate and fit the classifier.
    Train(TrainArgs),
    /// Run the classification experiment, or score a trained model.
    Evaluate(EvaluateArgs),
    /// Merge a live EMG stream with angle datagrams and report segments as they close.
    Listen(ListenArgs),
    /// Write the intermediate series behind each plot as CSV.
    Plotdata(PlotdataArgs),
    /// Print the effective configuration.
    Config(ConfigArgs),
}

/// Config file plus flags that override individual values.
#[derive(Args, Clone, Default)]
struct ConfigOpts {
    /// Pipeline config (JSON). Without it the built-in actions are used.
    #[arg(long, short = 'c')]
    config: Option<PathBuf>,
    /// Number of built-in actions when no config file is given.
    #[arg(long, default_value_t = 1)]
    actions: usize,
    /// Expected repetitions for every action.
    #[arg(long)]
    expected: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Minimum normalized prominence of a distance minimum.
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long)]
    max_depth: Option<usize>,
    /// Scan window length as a multiple of the template length.
    #[arg(long)]
    window_factor: Option<usize>,
    /// SVM box constraint.
    #[arg(long = "svm-c")]
    svm_c: Option<f64>,
    /// RBF width; defaults to the median heuristic.
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    folds: Option<usize>,
}

impl ConfigOpts {
    fn resolve(&self) -> Result<PipelineConfig> {
        let mut cfg = match &self.config {
            Some(p) => PipelineConfig::load(p)?,
            None => {
                PipelineConfig::for_builtin_actions(self.actions, self.expected.unwrap_or(8), 128)?
            }
        };
        if let Some(k) = self.expected {
            cfg.actions.iter_mut().for_each(|a| a.expected_count = k);
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(t) = self.threshold {
            cfg.mdtw.threshold = t;
        }
        if let Some(d) = self.max_depth {
            cfg.mdtw.max_depth = d;
        }
        if let Some(w) = self.window_factor {
            cfg.mdtw.window_factor = w;
        }
        if let Some(c) = self.svm_c {
            cfg.classifier.c = c;
        }
        if self.gamma.is_some() {
            cfg.classifier.gamma = self.gamma;
        }
        if let Some(k) = self.folds {
            cfg.classifier.folds = k;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 8)]
    reps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of built-in actions to plant.
    #[arg(long, default_value_t = 1)]
    actions: usize,
    #[arg(long, default_value_t = 128)]
    template_len: usize,
    /// Relative duration jitter of each repetition.
    #[arg(long)]
    duration_jitter: Option<f64>,
    /// Standard deviation of angle noise in degrees.
    #[arg(long)]
    angle_noise: Option<f64>,
    #[arg(long)]
    out: PathBuf,
    /// Ground-truth file; defaults to the output path with extension `truth.csv`.
    #[arg(long)]
    truth: Option<PathBuf>,
}

#[derive(Args)]
struct DenoiseArgs {
    #[command(flatten)]
    cfg: ConfigOpts,
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SegmentArgs {
    #[command(flatten)]
    cfg: ConfigOpts,
    #[arg(long = "in")]
    input: PathBuf,
    /// The input was already produced by `denoise`.
    #[arg(long)]
    denoised: bool,
    /// Segments file.
    #[arg(long)]
    out: PathBuf,
    /// Also label the recording and write the dataset here.
    #[arg(long)]
    dataset: Option<PathBuf>,
}

#[derive(Args)]
struct LabelArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    denoised: bool,
    #[arg(long)]
    segments: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Only needed to denoise a raw input.
    #[command(flatten)]
    cfg: ConfigOpts,
}

#[derive(Args)]
struct FeaturizeArgs {
    #[command(flatten)]
    cfg: ConfigOpts,
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

/// A labeled dataset or an already computed feature matrix.
#[derive(Args)]
#[group(required = true, multiple = false)]
struct FeatureInput {
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long)]
    features: Option<PathBuf>,
}

impl FeatureInput {
    fn load(&self, cfg: &PipelineConfig) -> Result<FeatureMatrix> {
        match (&self.dataset, &self.features) {
            (Some(d), _) => {
                let ds = LabeledDataset::read_jsonl_path(d)
                    .with_context(|| format!("reading {}", d.display()))?;
                Ok(featurize(cfg, &ds)?)
            }
            (None, Some(f)) => Ok(FeatureMatrix::read_csv_path(f)
                .with_context(|| format!("reading {}", f.display()))?),
            (None, None) => unreachable!("clap enforces one input"),
        }
    }
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    cfg: ConfigOpts,
    #[command(flatten)]
    input: FeatureInput,
    /// Model bundle.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    #[command(flatten)]
    cfg: ConfigOpts,
    #[command(flatten)]
    input: FeatureInput,
    /// Score this trained model instead of running the full experiment.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Write the report here as well as to standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ListenArgs {
    #[command(flatten)]
    cfg: ConfigOpts,
    /// EMG stream as CSV `t,ch1,...,ch5`; `-` reads standard input.
    #[arg(long)]
    emg: PathBuf,
    /// UDP address for angle datagrams; overrides the config.
    #[arg(long)]
    bind: Option<String>,
    /// Segments file of the final file-mode pass.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Merged recording received.
    #[arg(long)]
    recording: Option<PathBuf>,
}

#[derive(Args)]
struct PlotdataArgs {
    #[command(flatten)]
    cfg: ConfigOpts,
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct ConfigArgs {
    #[command(flatten)]
    cfg: ConfigOpts,
}

/// Some actions failed; their outputs were still written.
#[derive(Debug)]
struct PartialFailure(String);

impl std::fmt::Display for PartialFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for PartialFailure {}

fn read_recording(path: &Path) -> Result<MergedRecording> {
    MergedRecording::read_csv_path(path).with_context(|| format!("reading {}", path.display()))
}

fn print_json(value: &serde_json::Value) -> Result<()> {
    let mut out = std::io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

fn check_failures(report: &PipelineReport) -> Result<()> {
    if let Some(f) = report.failures.first() {
        return Err(PartialFailure(format!(
            "{} of {} actions failed; first: {f}",
            report.failures.len(),
            report.actions.len() + report.failures.len()
        ))
        .into());
    }
    Ok(())
}

fn synth(a: SynthArgs) -> Result<()> {
    let mut cfg = SynthConfig {
        repetitions: a.reps,
        seed: a.seed,
        template_len: a.template_len,
        ..SynthConfig::with_builtin_actions(a.actions)?
    };
    if let Some(j) = a.duration_jitter {
        cfg.duration_jitter = j;
    }
    if let Some(n) = a.angle_noise {
        cfg.angle_noise_deg = n;
    }
    let (rec, truth) = generate_synthetic(&cfg)?;
    rec.write_csv_path(&a.out)?;
    let truth_path = a.truth.unwrap_or_else(|| a.out.with_extension("truth.csv"));
    write_ground_truth_path(&truth_path, &truth)?;
    Ok(())
}

fn denoise(a: DenoiseArgs) -> Result<()> {
    let cfg = a.cfg.resolve()?;
    let rec = read_recording(&a.input)?;
    preprocess(&cfg, &rec)?.write_csv_path(&a.out)?;
    Ok(())
}

fn segment(a: SegmentArgs) -> Result<()> {
    let cfg = a.cfg.resolve()?;
    let rec = read_recording(&a.input)?;
    let clean = if a.denoised {
        rec
    } else {
        preprocess(&cfg, &rec)?
    };
    let seg = segment_recording(&cfg, &clean)?;
    seg.file.write_json(&a.out)?;
    if let Some(p) = &a.dataset {
        label_recording(&seg.file, &clean)?.write_jsonl_path(p)?;
    }
    let report = PipelineReport::from_segments(&seg.file);
    print_json(&serde_json::to_value(&report)?)?;
    check_failures(&report)
}

fn label(a: LabelArgs) -> Result<()> {
    let segments = SegmentsFile::read_json(&a.segments)
        .with_context(|| format!("reading {}", a.segments.display()))?;
    let rec = read_recording(&a.input)?;
    let clean = if a.denoised {
        rec
    } else {
        preprocess(&a.cfg.resolve()?, &rec)?
    };
    label_recording(&segments, &clean)?.write_jsonl_path(&a.out)?;
    Ok(())
}

fn featurize_cmd(a: FeaturizeArgs) -> Result<()> {
    let cfg = a.cfg.resolve()?;
    let ds = LabeledDataset::read_jsonl_path(&a.dataset)
        .with_context(|| format!("reading {}", a.dataset.display()))?;
    featurize(&cfg, &ds)?.write_csv_path(&a.out)?;
    Ok(())
}

fn train(a: TrainArgs) -> Result<()> {
    let cfg = a.cfg.resolve()?;
    let bundle = train_model(&cfg, &a.input.load(&cfg)?)?;
    bundle.write_json(&a.out)?;
    print_json(&summary(&bundle))
}

fn summary(b: &ModelBundle) -> serde_json::Value {
    serde_json::json!({
        "config_hash": b.config_hash,
        "features": b.selection.chosen.iter().map(|c| c.name()).collect::<Vec<_>>(),
        "cv_mean_accuracy": b.cv.mean_accuracy,
        "cv_std_accuracy": b.cv.std_accuracy,
        "cv_per_fold": b.cv.per_fold,
        "train_rows": b.train_rows,
        "train_accuracy": b.train_accuracy,
        "eval_rows": b.eval_rows,
        "eval_accuracy": b.eval_accuracy,
        "support_vectors": b.model.support_vectors.len(),
    })
}

fn evaluate(a: EvaluateArgs) -> Result<()> {
    let cfg = a.cfg.resolve()?;
    let m = a.input.load(&cfg)?;
    let report = match &a.model {
        Some(p) => {
            let bundle =
                ModelBundle::read_json(p).with_context(|| format!("reading {}", p.display()))?;
            serde_json::json!({ "rows": m.len(), "accuracy": bundle.score(&m)? })
        }
        None => summary(&train_model(&cfg, &m)?),
    };
    if let Some(p) = &a.out {
        std::fs::write(p, serde_json::to_string_pretty(&report)? + "\n")?;
    }
    print_json(&report)
}

fn listen(a: ListenArgs) -> Result<()> {
    let mut cfg = a.cfg.resolve()?;
    if let Some(b) = a.bind {
        cfg.live.bind = b;
    }
    let socket =
        UdpSocket::bind(&cfg.live.bind).with_context(|| format!("binding {}", cfg.live.bind))?;
    eprintln!("listening on {}", socket.local_addr()?);
    let emg: Box<dyn BufRead + Send> = if a.emg.as_os_str() == "-" {
        Box::new(BufReader::new(std::io::stdin()))
    } else {
        Box::new(BufReader::new(
            File::open(&a.emg).with_context(|| format!("opening {}", a.emg.display()))?,
        ))
    };
    let mut stdout = std::io::stdout();
    let outcome = run_live(cfg, emg, socket, |e| {
        let line = serde_json::json!({
            "event": "segment",
            "action": e.action,
            "start": e.start,
            "end": e.end,
            "t_start": e.t_start,
            "t_end": e.t_end,
            "dtw_distance": e.dtw_distance,
        });
        let _ = writeln!(stdout, "{line}");
        let _ = stdout.flush();
    })?;
    if let Some(p) = &a.out {
        outcome.output.segments.write_json(p)?;
    }
    if let Some(p) = &a.dataset {
        outcome.output.dataset.write_jsonl_path(p)?;
    }
    if let Some(p) = &a.recording {
        outcome.recording.write_csv_path(p)?;
    }
    let done = serde_json::json!({
        "event": "done",
        "rows": outcome.recording.len(),
        "packets_received": outcome.packets.received,
        "packets_dropped": outcome.packets.dropped,
        "packets_clamped": outcome.packets.clamped,
        "emg_dropped": outcome.dropped_emg,
        "angles_rejected": outcome.rejected_angles,
        "report": outcome.output.report,
    });
    println!("{done}");
    check_failures(&outcome.output.report)
}

fn plotdata(a: PlotdataArgs) -> Result<()> {
    let cfg = a.cfg.resolve()?;
    let rec = read_recording(&a.input)?;
    for p in write_plotdata(&cfg, &rec, &a.out_dir)? {
        println!("{}", p.display());
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth(a) => synth(a),
        Command::Denoise(a) => denoise(a),
        Command::Segment(a) => segment(a),
        Command::Label(a) => label(a),
        Command::Featurize(a) => featurize_cmd(a),
        Command::Train(a) => train(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Listen(a) => listen(a),
        Command::Plotdata(a) => plotdata(a),
        Command::Config(a) => {
            println!("{}", a.cfg.resolve()?.to_json_pretty());
            Ok(())
        }
    }
}

/// Error kind and exit code for a failure.
fn classify(err: &anyhow::Error) -> (&'static str, u8) {
    if err.downcast_ref::<PartialFailure>().is_some() {
        return ("partial_failure", 1);
    }
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<emg_autolabel::Error>() {
            return (e.kind(), if e.is_usage() { 2 } else { 1 });
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return ("io", 1);
        }
    }
    ("error", 1)
}

fn report_error(kind: &str, message: &str, code: u8) -> ExitCode {
    let line = serde_json::json!({ "error": kind, "message": message, "exit_code": code });
    eprintln!("{line}");
    ExitCode::from(code)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            if code == 0 {
                return ExitCode::SUCCESS;
            }
            let message = e.kind().to_string();
            return report_error("usage", &message, 2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let (kind, code) = classify(&err);
            report_error(kind, &format!("{err:#}"), code)
        }
    }
}
