use std::io::{BufRead, BufReader};
use std::net::UdpSocket;
use std::path::Path;
use std::process::{Command, Output, Stdio};
use std::time::Duration;

fn autolabel(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_autolabel"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = autolabel(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn error_line(out: &Output) -> serde_json::Value {
    let stderr = String::from_utf8_lossy(&out.stderr);
    let last = stderr.lines().last().expect("stderr is not empty");
    serde_json::from_str(last).expect("last stderr line is JSON")
}

fn read(dir: &Path, name: &str) -> Vec<u8> {
    std::fs::read(dir.join(name)).unwrap()
}

#[test]
fn synth_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(
        d,
        &["synth", "--reps", "8", "--seed", "7", "--out", "a.csv"],
    );
    ok(
        d,
        &["synth", "--reps", "8", "--seed", "7", "--out", "b.csv"],
    );
    ok(
        d,
        &["synth", "--reps", "8", "--seed", "8", "--out", "c.csv"],
    );
    assert_eq!(read(d, "a.csv"), read(d, "b.csv"));
    assert_eq!(read(d, "a.truth.csv"), read(d, "b.truth.csv"));
    assert_ne!(read(d, "a.csv"), read(d, "c.csv"));
    let truth = String::from_utf8(read(d, "a.truth.csv")).unwrap();
    assert_eq!(truth.lines().count(), 8);
}

#[test]
fn unknown_flag_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = autolabel(dir.path(), &["segment", "--no-such-flag"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_line(&out)["error"], "usage");
}

#[test]
fn help_exits_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let out = autolabel(dir.path(), &["--help"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    for cmd in [
        "synth",
        "denoise",
        "segment",
        "label",
        "featurize",
        "train",
        "evaluate",
        "listen",
        "plotdata",
    ] {
        assert!(text.contains(cmd), "{cmd} missing from help");
    }
}

#[test]
fn invalid_config_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["synth", "--out", "rec.csv"]);
    let out = autolabel(
        d,
        &[
            "segment",
            "--in",
            "rec.csv",
            "--out",
            "s.json",
            "--threshold",
            "1.5",
        ],
    );
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_line(&out)["error"], "config");

    std::fs::write(d.join("c.json"), r#"{"actions":[{"name":"a","template":{"builtin":{"name":"elevated_bicep_curl","len":128}},"expected_count":0}]}"#).unwrap();
    let out = autolabel(
        d,
        &[
            "segment", "--config", "c.json", "--in", "rec.csv", "--out", "s.json",
        ],
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(!d.join("s.json").exists());
}

#[test]
fn missing_input_is_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = autolabel(
        dir.path(),
        &["denoise", "--in", "absent.csv", "--out", "x.csv"],
    );
    assert_eq!(out.status.code(), Some(1));
    let line = error_line(&out);
    assert_eq!(line["error"], "io");
    assert_eq!(line["exit_code"], 1);
}

#[test]
fn short_recording_reports_failed_action() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["synth", "--reps", "1", "--out", "rec.csv"]);
    std::fs::write(
        d.join("c.json"),
        r#"{"actions":[{"name":"elevated_bicep_curl","template":{"builtin":{"name":"elevated_bicep_curl","len":1000}},"expected_count":1}]}"#,
    )
    .unwrap();
    let out = autolabel(
        d,
        &[
            "segment", "--config", "c.json", "--in", "rec.csv", "--out", "s.json",
        ],
    );
    assert_eq!(out.status.code(), Some(1));
    let line = error_line(&out);
    assert_eq!(line["error"], "partial_failure");
    assert!(line["message"]
        .as_str()
        .unwrap()
        .contains("elevated_bicep_curl"));
    // The segments file is still written, recording the failure.
    let segs: serde_json::Value = serde_json::from_slice(&read(d, "s.json")).unwrap();
    assert_eq!(segs["failures"][0]["stage"], "scan");
}

#[test]
fn stepwise_matches_one_shot() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["synth", "--seed", "4", "--out", "rec.csv"]);
    ok(
        d,
        &[
            "segment",
            "--in",
            "rec.csv",
            "--out",
            "one.json",
            "--dataset",
            "one.jsonl",
        ],
    );
    ok(d, &["denoise", "--in", "rec.csv", "--out", "clean.csv"]);
    ok(
        d,
        &[
            "segment",
            "--in",
            "clean.csv",
            "--denoised",
            "--out",
            "step.json",
        ],
    );
    ok(
        d,
        &[
            "label",
            "--in",
            "clean.csv",
            "--denoised",
            "--segments",
            "step.json",
            "--out",
            "step.jsonl",
        ],
    );
    assert_eq!(read(d, "one.json"), read(d, "step.json"));
    assert_eq!(read(d, "one.jsonl"), read(d, "step.jsonl"));
    // Labeling a raw input denoises it first.
    ok(
        d,
        &[
            "label",
            "--in",
            "rec.csv",
            "--segments",
            "step.json",
            "--out",
            "raw.jsonl",
        ],
    );
    assert_eq!(read(d, "one.jsonl"), read(d, "raw.jsonl"));
}

#[test]
fn segment_then_evaluate() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = ok(
        d,
        &[
            "config",
            "--actions",
            "2",
            "--expected",
            "20",
            "--seed",
            "3",
        ],
    );
    std::fs::write(d.join("c.json"), &cfg.stdout).unwrap();
    ok(
        d,
        &[
            "synth",
            "--actions",
            "2",
            "--reps",
            "20",
            "--seed",
            "5",
            "--out",
            "rec.csv",
        ],
    );
    ok(
        d,
        &[
            "segment",
            "--config",
            "c.json",
            "--in",
            "rec.csv",
            "--out",
            "s.json",
            "--dataset",
            "d.jsonl",
        ],
    );
    let eval = ok(
        d,
        &[
            "evaluate",
            "--config",
            "c.json",
            "--dataset",
            "d.jsonl",
            "--out",
            "r1.json",
        ],
    );
    let report: serde_json::Value = serde_json::from_slice(&eval.stdout).unwrap();
    assert_eq!(report["train_rows"], 32);
    assert_eq!(report["eval_rows"], 8);
    assert!(report["eval_accuracy"].as_f64().unwrap() >= 0.8);
    ok(
        d,
        &[
            "evaluate",
            "--config",
            "c.json",
            "--dataset",
            "d.jsonl",
            "--out",
            "r2.json",
        ],
    );
    assert_eq!(read(d, "r1.json"), read(d, "r2.json"));

    ok(
        d,
        &[
            "featurize",
            "--config",
            "c.json",
            "--dataset",
            "d.jsonl",
            "--out",
            "f.csv",
        ],
    );
    ok(
        d,
        &[
            "train",
            "--config",
            "c.json",
            "--features",
            "f.csv",
            "--out",
            "m.json",
        ],
    );
    let scored = ok(d, &["evaluate", "--features", "f.csv", "--model", "m.json"]);
    let scored: serde_json::Value = serde_json::from_slice(&scored.stdout).unwrap();
    assert_eq!(scored["rows"], 40);
    assert!(scored["accuracy"].as_f64().unwrap() >= 0.8);
}

#[test]
fn plotdata_writes_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["synth", "--out", "rec.csv"]);
    ok(d, &["plotdata", "--in", "rec.csv", "--out-dir", "plots"]);
    let manifest: serde_json::Value =
        serde_json::from_slice(&read(d, "plots/manifest.json")).unwrap();
    assert_eq!(manifest["format"], "emg-autolabel/plotdata");
    assert_eq!(manifest["version"], 1);
    for f in manifest["files"].as_array().unwrap() {
        assert!(d.join("plots").join(f.as_str().unwrap()).exists());
    }
}

#[test]
fn listen_replay_matches_file_mode() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["synth", "--seed", "9", "--out", "rec.csv"]);
    ok(
        d,
        &[
            "segment",
            "--in",
            "rec.csv",
            "--out",
            "file.json",
            "--dataset",
            "file.jsonl",
        ],
    );

    // Split the recording into an EMG stream file and angle datagrams.
    let text = String::from_utf8(read(d, "rec.csv")).unwrap();
    let mut emg = String::from("t,ch1,ch2,ch3,ch4,ch5\n");
    let mut packets = Vec::new();
    for line in text.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        emg.push_str(&f[..6].join(","));
        emg.push('\n');
        packets.push(format!("{},{},{},{}\n", f[0], f[6], f[7], f[8]));
    }
    std::fs::write(d.join("emg.csv"), emg).unwrap();

    let mut child = Command::new(env!("CARGO_BIN_EXE_autolabel"))
        .current_dir(d)
        .args([
            "listen",
            "--emg",
            "emg.csv",
            "--bind",
            "127.0.0.1:0",
            "--out",
            "live.json",
            "--dataset",
            "live.jsonl",
        ])
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    let mut stderr = BufReader::new(child.stderr.take().unwrap());
    let mut first = String::new();
    stderr.read_line(&mut first).unwrap();
    let addr = first
        .trim()
        .strip_prefix("listening on ")
        .expect("listen announces its address")
        .to_owned();

    let sender = UdpSocket::bind("127.0.0.1:0").unwrap();
    for (i, p) in packets.iter().enumerate() {
        sender.send_to(p.as_bytes(), &addr).unwrap();
        if i % 50 == 49 {
            std::thread::sleep(Duration::from_millis(1));
        }
    }
    sender.send_to(b"end", &addr).unwrap();

    let out = child.wait_with_output().unwrap();
    assert!(out.status.success());
    assert_eq!(read(d, "live.json"), read(d, "file.json"));
    assert_eq!(read(d, "live.jsonl"), read(d, "file.jsonl"));

    let stdout = String::from_utf8(out.stdout).unwrap();
    let events: Vec<serde_json::Value> = stdout
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    let done = events.last().unwrap();
    assert_eq!(done["event"], "done");
    assert_eq!(done["packets_received"], packets.len());
    assert_eq!(done["packets_dropped"], 0);
    assert!(events.iter().filter(|e| e["event"] == "segment").count() >= 4);
}

#[test]
fn example_config_is_complete_and_current() {
    let example = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../config/example.json");
    let dir = tempfile::tempdir().unwrap();
    let printed = ok(
        dir.path(),
        &["config", "--config", example.to_str().unwrap()],
    );
    let defaults = ok(dir.path(), &["config", "--actions", "2"]);
    assert_eq!(printed.stdout, defaults.stdout);
    assert_eq!(printed.stdout, std::fs::read(example).unwrap());
}
