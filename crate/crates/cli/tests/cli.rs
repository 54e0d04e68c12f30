use std::path::PathBuf;
use std::process::{Command, Output};

fn sccmtl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sccmtl")).args(args).output().unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn toy_manifest() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/toy/manifest.json")
}

#[test]
fn oracle_check_passes() {
    let out = sccmtl(&["oracle", "check", "--instances", "10"]);
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    assert!(!stdout(&out).contains("FAIL"));
}

#[test]
fn thm41_writes_both_reports() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("thm41.json");
    let out = sccmtl(&["theory", "thm41", "--trials", "20000", "--out", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    let reports: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    let reports = reports.as_array().unwrap();
    assert_eq!(reports.len(), 2);
    assert_eq!(reports[1]["mismatch_omega"].as_f64(), Some(0.0));
}

#[test]
fn bench_real_on_the_toy_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("real.json");
    let out = sccmtl(&[
        "bench",
        "real",
        "--manifest",
        toy_manifest().to_str().unwrap(),
        "--split",
        "1.0",
        "--lambda",
        "fixed:0",
        "--methods",
        "glsls",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let result: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    let rmse = result["rows"][0]["rmse"]["mean"].as_f64().unwrap();
    let expected = ((1.0_f64 / 6.0).sqrt() + (27.0_f64 / 44.0).sqrt()) / 2.0;
    assert!((rmse - expected).abs() < 1e-8, "{rmse}");
}

#[test]
fn bench_synth_small_run() {
    let out = sccmtl(&[
        "bench", "synth", "--m", "3", "--d", "10", "--n", "15", "--k", "2,3", "--runs", "1", "--methods", "scc,gl",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout(&out).contains("k=2"), "{}", stdout(&out));
}

#[test]
fn invalid_lambda_mode_exits_with_one() {
    let out = sccmtl(&["bench", "synth", "--runs", "1", "--lambda", "sometimes"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));
}

#[test]
fn support_larger_than_dimension_exits_with_one() {
    let out = sccmtl(&["bench", "synth", "--d", "8", "--k", "9", "--runs", "1"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn missing_manifest_exits_with_one() {
    let out = sccmtl(&["bench", "real", "--manifest", "/nonexistent/manifest.json"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("/nonexistent/manifest.json"));
}
