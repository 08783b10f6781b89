//! End-to-end runs of the `sobtrace` binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const TWO_POINT: &str = r#"{"n": 1, "p": 2, "grid": 128, "box": {"center": [0.5], "half_side": 5},
    "points": {"inline": [[0], [1]]}, "data": {"values": [0, 1]}}"#;

fn sobtrace(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sobtrace"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("config.json");
    fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_owned()
}

#[test]
fn extend_succeeds_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), TWO_POINT);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        let run = sobtrace(&["--config", &config, "extend"], out);
        assert_eq!(
            run.status.code(),
            Some(0),
            "{}",
            String::from_utf8_lossy(&run.stderr)
        );
    }
    for file in ["extension.csv", "sharp.csv", "weight.csv", "summary.json"] {
        assert_eq!(
            fs::read(a.join(file)).unwrap(),
            fs::read(b.join(file)).unwrap(),
            "{file}"
        );
    }
    let summary: serde_json::Value =
        serde_json::from_slice(&fs::read(a.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["error_on_set"], 0.0);
    assert_eq!(summary["provenance"]["seed"], 42);
}

#[test]
fn bad_config_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), &TWO_POINT.replace(r#""p": 2"#, r#""p": 0.5"#));
    let run = sobtrace(&["--config", &config, "extend"], dir.path());
    assert_eq!(run.status.code(), Some(2));
    let run = sobtrace(&["extend"], dir.path());
    assert_eq!(run.status.code(), Some(2));
}

#[test]
fn injected_negative_weight_fails_the_suite() {
    let dir = tempfile::tempdir().unwrap();
    let run = sobtrace(
        &["suite", "--inject-negative-weight", "--chains", "5"],
        dir.path(),
    );
    assert_eq!(run.status.code(), Some(1));
    let csv = fs::read_to_string(dir.path().join("suite.csv")).unwrap();
    assert!(csv
        .lines()
        .any(|l| l.starts_with("weight-nonnegative") && l.ends_with("FAIL")));
}

#[test]
fn whitney_and_dd1d_write_their_tables() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), TWO_POINT);
    let run = sobtrace(&["--config", &config, "whitney"], dir.path());
    assert_eq!(run.status.code(), Some(0));
    assert!(dir.path().join("whitney.csv").exists());
    let run = sobtrace(&["--config", &config, "dd1d"], dir.path());
    assert_eq!(run.status.code(), Some(0));
    assert!(dir.path().join("divided_differences.csv").exists());
}
