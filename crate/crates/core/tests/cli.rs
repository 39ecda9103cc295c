use std::path::Path;
use std::process::{Command, Output};

fn cuqdyn(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cuqdyn"))
        .args(args)
        .current_dir(cwd)
        .output()
        .unwrap()
}

#[test]
fn help_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(cuqdyn(&["--help"], dir.path()).status.code(), Some(0));
    assert_eq!(cuqdyn(&["region", "--help"], dir.path()).status.code(), Some(0));
}

#[test]
fn config_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let cases: &[&[&str]] = &[
        &["simulate", "--model", "brusselator"],
        &["region", "--alpha", "1.5"],
        &["region", "--method", "bootstrap"],
        &["region", "--transform", "sqrt"],
        &["region", "--model", "lotka_volterra", "--method", "jackknife_plus"],
        &["paper-grid", "--suite", "everything"],
        &["fit", "--no-such-flag"],
    ];
    for args in cases {
        let out = cuqdyn(args, dir.path());
        assert_eq!(out.status.code(), Some(1), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    }
    std::fs::write(dir.path().join("bad.toml"), "model = \"logistic\"\nwidgets = 3\n").unwrap();
    let out = cuqdyn(&["coverage", "--config", "bad.toml"], dir.path());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn runtime_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("occupied"), "").unwrap();
    let out = cuqdyn(
        &["region", "--n-points", "5", "--n-starts", "2", "--out", "occupied/inner"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn simulate_fit_region_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    let out = cuqdyn(
        &["simulate", "--model", "logistic", "--n-points", "10", "--noise", "0.1", "--seed", "4", "--out", "d.csv"],
        p,
    );
    assert!(out.status.success());
    let text = std::fs::read_to_string(p.join("d.csv")).unwrap();
    assert_eq!(text.lines().count(), 12);

    let out = cuqdyn(&["fit", "--data", "d.csv", "--n-starts", "5", "--out", "fit.json"], p);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let fit: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(p.join("fit.json")).unwrap()).unwrap();
    let theta = fit["full_fit"]["theta_hat"].as_array().unwrap();
    let r = theta[0].as_f64().unwrap();
    let k = theta[1].as_f64().unwrap();
    assert!((0.05..0.2).contains(&r) && (80.0..125.0).contains(&k), "{r} {k}");

    let out = cuqdyn(
        &["region", "--data", "d.csv", "--n-starts", "5", "--level", "0.9", "--method", "cuqdyn2", "--out", "reg"],
        p,
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let table = std::fs::read_to_string(p.join("reg/region_cuqdyn2_y1.csv")).unwrap();
    let mut lines = table.lines();
    assert_eq!(lines.next(), Some("t,y,x_nom,lpb,upb"));
    assert_eq!(lines.count(), 11);
    let meta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(p.join("reg/region_cuqdyn2.json")).unwrap()).unwrap();
    assert_eq!(meta["alpha"].as_f64(), Some(0.05));
    assert_eq!(meta["n_cal"].as_u64(), Some(10));
    assert!(p.join("reg/data.csv").exists());
}

#[test]
fn coverage_writes_reproducible_report() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    std::fs::write(
        p.join("exp.toml"),
        "model = \"logistic\"\nn_points = 8\nnoise_pct = 0.05\nn_replicates = 3\nalphas = [0.1]\nn_starts = 4\nmaster_seed = 9\n",
    )
    .unwrap();
    for out in ["a", "b"] {
        let o = cuqdyn(&["coverage", "--config", "exp.toml", "--out", out], p);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let a = std::fs::read(p.join("a/report.json")).unwrap();
    assert_eq!(a, std::fs::read(p.join("b/report.json")).unwrap());
    let report: serde_json::Value = serde_json::from_slice(&a).unwrap();
    assert_eq!(report["schema_version"].as_u64(), Some(1));
    assert_eq!(report["n_replicates"].as_u64(), Some(3));
    assert!(p.join("a/run_log.json").exists());
}
