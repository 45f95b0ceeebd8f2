//! End-to-end checks of the binary: exit codes, artifact layout, and
//! byte-level reproducibility across reruns and worker counts.

use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_cramerlab"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn summary(dir: &Path) -> serde_json::Value {
    let text = std::fs::read_to_string(dir.join("summary.json")).expect("summary exists");
    serde_json::from_str(&text).expect("summary parses")
}

#[test]
fn malformed_config_exits_2_without_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, "{\"sede\": 7}").unwrap();
    let out_dir = dir.path().join("out");
    let out = run(&[
        "beta",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out_dir.exists(), "no artifacts on config error");
    let msg = String::from_utf8_lossy(&out.stderr);
    assert!(msg.contains("sede"), "mentions the bad key: {msg}");
}

#[test]
fn unknown_suite_and_bad_flags_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let out = run(&[
        "verify",
        "--suite",
        "nope",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out_dir.exists());

    // clap itself rejects unknown subcommands with a usage error
    let out = run(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(2));

    let out = run(&[
        "simulate",
        "--model",
        "cube",
        "--n",
        "3",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2), "count or rho is required");

    let out = bin()
        .args(["beta", "--n", "4", "--out", out_dir.to_str().unwrap()])
        .env("CRAMERLAB_WORKERS", "many")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2), "bad env worker count");
}

#[test]
fn verify_log_moments_emits_98_passing_checks() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "verify",
        "--suite",
        "log-moments",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let s = summary(dir.path());
    assert_eq!(s["subcommand"], "verify");
    assert_eq!(s["results"]["checks"], 98);
    assert_eq!(s["results"]["passed"], 98);
    assert_eq!(s["results"]["failed"], 0);
    let csv = std::fs::read_to_string(dir.path().join("data.csv")).unwrap();
    let rows = csv
        .lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with("name,"))
        .count();
    assert_eq!(rows, 98);
    assert!(csv.starts_with("# version="));
    assert!(dir.path().join("run.json").exists());
}

#[test]
fn points_dimension_mismatch_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let pts = dir.path().join("pts.csv");
    std::fs::write(&pts, "0.1,0.2\n0.0,0.3\n").unwrap();
    let out = run(&[
        "depth",
        "--points",
        pts.to_str().unwrap(),
        "--model",
        "cube",
        "--n",
        "3",
        "--out",
        dir.path().join("out").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let msg = String::from_utf8_lossy(&out.stderr);
    assert!(msg.contains("dimension"), "explains the mismatch: {msg}");
}

#[test]
fn seed_flag_overrides_config_and_is_echoed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, "{\"seed\": 1, \"dimensions\": [4]}").unwrap();
    let out_dir = dir.path().join("out");
    let out = run(&[
        "moments",
        "--config",
        cfg.to_str().unwrap(),
        "--seed",
        "9",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let s = summary(&out_dir);
    assert_eq!(s["seed"], 9);
    let run_doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("run.json")).unwrap()).unwrap();
    assert_eq!(run_doc["config"]["seed"], 9);
    assert_eq!(run_doc["config"]["model"]["family"], "gaussian");
    assert!(run_doc["wall_clock_seconds"].as_f64().unwrap() >= 0.0);
}

#[test]
fn rerun_and_worker_count_leave_artifacts_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let args = |out: &Path, workers: &str| {
        vec![
            "threshold".to_string(),
            "--model".into(),
            "gaussian".into(),
            "--n".into(),
            "4".into(),
            "--grid".into(),
            "0.6,0.9,1.2".into(),
            "--trials".into(),
            "8".into(),
            "--test-points".into(),
            "256".into(),
            "--seed".into(),
            "5".into(),
            "--workers".into(),
            workers.into(),
            "--out".into(),
            out.display().to_string(),
        ]
    };
    let d1 = dir.path().join("w1");
    let d2 = dir.path().join("w1-rerun");
    let d4 = dir.path().join("w4");
    for (d, w) in [(&d1, "1"), (&d2, "1"), (&d4, "4")] {
        let out = bin().args(args(d, w)).output().unwrap();
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    }
    for name in ["data.csv", "summary.json"] {
        let a = std::fs::read(d1.join(name)).unwrap();
        let b = std::fs::read(d2.join(name)).unwrap();
        let c = std::fs::read(d4.join(name)).unwrap();
        assert_eq!(a, b, "{name} differs across reruns");
        assert_eq!(a, c, "{name} differs across worker counts");
    }
}
