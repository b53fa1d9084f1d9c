//! End-to-end runs of the binary on a tiny config.

use std::path::Path;
use std::process::Command;

use bearing_transfer::bench::TransferReport;

const CONFIG: &str = r#"{
  "conditions": [
    {"id": "L0", "load_hp": 0.0, "speed_rpm": 1797.0},
    {"id": "L1", "load_hp": 1.0, "speed_rpm": 1772.0}
  ],
  "fault_sizes": [0.007],
  "window_len": 512,
  "hop": 256,
  "samples_per_class": 12,
  "adaptation": {"k": 6, "lambda": 0.1, "iterations": 2, "pca_dim": 12},
  "export_models": true
}"#;

fn cli(dir: &Path, args: &[&str]) -> String {
    let out = Command::new(env!("CARGO_BIN_EXE_bearing-transfer"))
        .current_dir(dir)
        .args(["--config", "config.json"])
        .args(args)
        .output()
        .unwrap();
    let stdout = String::from_utf8_lossy(&out.stdout).into_owned();
    assert!(out.status.success(), "{args:?}: {}{stdout}", String::from_utf8_lossy(&out.stderr));
    stdout
}

#[test]
fn synth_run_report_sweep_roc() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("config.json"), CONFIG).unwrap();

    cli(d, &["--out", "corpus", "synth"]);
    assert!(d.join("corpus/manifest.json").is_file());

    let summary = cli(d, &["--out", "run", "--jobs", "1", "run"]);
    assert!(summary.contains("datf: mean off-diagonal accuracy"), "{summary}");
    let report = TransferReport::load(&d.join("run/report.json")).unwrap();
    assert_eq!(report.tests.len(), 4 * 4);
    for name in ["accuracy.csv", "confusion.csv", "history.csv", "projections.csv"] {
        assert!(d.join("run").join(name).is_file(), "{name}");
    }
    assert_eq!(std::fs::read_dir(d.join("run/models")).unwrap().count(), 4);

    cli(d, &["--out", "again", "report", "--input", "run/report.json"]);
    assert_eq!(
        std::fs::read(d.join("run/report.json")).unwrap(),
        std::fs::read(d.join("again/report.json")).unwrap()
    );

    let sweep = cli(d, &["--out", "sweep", "sweep", "--lambdas", "0.1,0.5"]);
    assert!(sweep.contains("lambda 0.5"), "{sweep}");
    assert_eq!(TransferReport::load(&d.join("sweep/report.json")).unwrap().sweep.len(), 2 * 4);

    let roc = cli(d, &["--out", "roc", "roc", "--iterations", "0,2"]);
    assert!(roc.contains("iteration 2: mean AUC"), "{roc}");
}

#[test]
fn bad_config_fails_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("config.json"), r#"{"lambdas": [1.5]}"#).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_bearing-transfer"))
        .current_dir(dir.path())
        .args(["--config", "config.json", "run"])
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
}
