use std::fs;
use std::process::Command;

fn staris(args: &[&str]) -> std::process::Output {
    let out = Command::new(env!("CARGO_BIN_EXE_staris")).args(args).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    out
}

#[test]
fn simulate_writes_metrics_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("scenario.toml");
    fs::write(&cfg, "[scenario]\nperiods = 4\n\n[sensing]\nangle_std_deg = 0.01\n").unwrap();
    let out = dir.path().join("run");
    let args = ["simulate", "--config", cfg.to_str().unwrap(), "--seed", "9", "--out", out.to_str().unwrap(), "--dump-intensity"];
    staris(&args);
    let metrics = fs::read_to_string(out.join("metrics.csv")).unwrap();
    assert_eq!(metrics.lines().count(), 1 + 4);
    let summary = fs::read_to_string(out.join("summary.txt")).unwrap();
    assert!(summary.contains("seed = 9"));
    assert!(summary.contains("angle_std_deg = 0.01"));
    assert!(out.join("intensity_4.txt").exists());

    let first = fs::read(out.join("metrics.csv")).unwrap();
    staris(&args);
    assert_eq!(first, fs::read(out.join("metrics.csv")).unwrap());
}

#[test]
fn sweep_writes_one_block_per_value() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    staris(&["sweep", "--param", "angle_rmse", "--values", "0.1,0.01,0.001", "--trials", "2", "--periods", "3", "--out", out]);
    let csv = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 3 * 3);
}

#[test]
fn overhead_reports_full_scan() {
    let out = staris(&["overhead", "--periods", "3", "--tracked"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("full scan: L_B = 8, L_U = 8, total = 16"));
    assert!(text.contains("k =   1: 16 sequences (full scan)"));
}

#[test]
fn bad_config_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "[sensing]\np_detect = 1.5\n").unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_staris")).args(["overhead", "--config", cfg.to_str().unwrap()]).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("sensing.p_detect"));
}
