//! End-to-end runs of the `dynheat` binary: exit codes, outputs on disk.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn dynheat(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dynheat")).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

#[test]
fn lemma22_feasible_tolerance_exits_zero() {
    let out = dynheat(&["verify", "lemma22", "0.5", "0.5", "0", "1", "1"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("PASS"));
    assert_eq!(text.lines().filter(|l| l.starts_with("t=")).count(), 64);
}

#[test]
fn lemma22_search_failure_exits_one() {
    let out = dynheat(&["verify", "lemma22", "0.5", "0.5", "0", "1", "0.01"]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stdout).contains("FAIL"));
}

#[test]
fn lemma22_bad_exponent_exits_two() {
    assert_eq!(code(&dynheat(&["verify", "lemma22", "1.2", "0.5", "0", "1", "1"])), 2);
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(code(&dynheat(&["--bogus"])), 2);
    assert_eq!(code(&dynheat(&["verify", "lemma22", "0.5"])), 2);
}

#[test]
fn unknown_config_key_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    let text = std::fs::read_to_string(config("small.toml")).unwrap() + "\nunexpected = 1\n";
    std::fs::write(&path, text).unwrap();
    let out = dynheat(&["solve", path.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("unexpected"));
}

#[test]
fn missing_config_exits_two() {
    assert_eq!(code(&dynheat(&["solve", "/nonexistent/config.toml"])), 2);
}

#[test]
fn quadrature_check_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let out = dynheat(&["quad", "check", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stdout));
    let entries: Vec<_> = std::fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert!(entries.iter().any(|n| n.to_string_lossy().ends_with(".csv")));
    assert!(entries.iter().any(|n| n.to_string_lossy().ends_with(".summary.json")));
}

#[test]
fn solve_dumps_fields_and_report_aggregates() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let out = dynheat(&["solve", config("small.toml").to_str().unwrap(), "--out", d]);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(code(&out) <= 1, "{stdout}{}", String::from_utf8_lossy(&out.stderr));
    for field in ["v", "w", "u"] {
        let header = dir.path().join(format!("small-{field}.json"));
        let text = std::fs::read_to_string(&header).unwrap_or_else(|_| panic!("missing {}", header.display()));
        let json: serde_json::Value = serde_json::from_str(&text).unwrap();
        let shape: Vec<u64> = json["shape"].as_array().unwrap().iter().map(|v| v.as_u64().unwrap()).collect();
        let data = dir.path().join(json["data_file"].as_str().unwrap());
        let bytes = std::fs::metadata(&data).unwrap().len();
        let times = json["times"].as_array().unwrap().len() as u64;
        assert_eq!(bytes, 8 * times * shape.iter().product::<u64>());
    }
    assert!(dir.path().join("small-solve.csv").exists());
    assert!(dir.path().join("small-solve.summary.json").exists());

    let agg = dynheat(&["report", "--dir", d]);
    assert!(code(&agg) <= 1);
    assert!(dir.path().join("aggregate.csv").exists());
    assert!(dir.path().join("aggregate.summary.json").exists());
}
