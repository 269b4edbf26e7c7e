//! End-to-end runs of the `l2div` binary: exit codes, file outputs,
//! determinism of the simulation command.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_l2div"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn l2div")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn write_xy(dir: &Path) -> String {
    let mut csv = String::from("x,y\n");
    let n = 24;
    for i in 0..n {
        let x = (i as f64 + 0.5) / n as f64;
        let y = (6.0 * x).sin() + 0.1 * (i as f64 * 0.7).cos();
        csv.push_str(&format!("{x},{y}\n"));
    }
    let path = dir.join("data.csv");
    fs::write(&path, csv).unwrap();
    path.display().to_string()
}

#[test]
fn fit_penalty_then_constraint_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_xy(dir.path());

    let out = run(&["fit", "--data", &data, "--kind", "smoothing", "--lambda", "0.01"]);
    assert_eq!(code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["indexing"], "lambda");
    let rho = report["rho_induced"].as_f64().unwrap();
    assert!(rho > 0.0);
    let div = report["div"].as_f64().unwrap();
    assert!(div > 2.0 && div <= 24.0);

    let out = run(&[
        "fit", "--data", &data, "--kind", "smoothing", "--rho", &rho.to_string(),
    ]);
    assert_eq!(code(&out), 0);
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["active"], true);
    let lambda_star = report["lambda_star"].as_f64().unwrap();
    assert!((lambda_star - 0.01).abs() < 1e-6 * 0.01);
}

#[test]
fn conflicting_tuning_flags_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_xy(dir.path());
    let out = run(&[
        "fit", "--data", &data, "--kind", "smoothing", "--lambda", "1", "--rho", "1",
    ]);
    assert_eq!(code(&out), 2);
}

#[test]
fn missing_and_malformed_data_exit_3() {
    let out = run(&["fit", "--data", "/nonexistent.csv", "--kind", "smoothing", "--lambda", "1"]);
    assert_eq!(code(&out), 3);
    let err: serde_json::Value =
        serde_json::from_str(String::from_utf8_lossy(&out.stderr).trim()).unwrap();
    assert!(err["error"].is_string());

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.csv");
    fs::write(&path, "x,y\n0.1,oops\n").unwrap();
    let out = run(&[
        "fit", "--data", path.to_str().unwrap(), "--kind", "smoothing", "--lambda", "1",
    ]);
    assert_eq!(code(&out), 3);
    let msg = String::from_utf8_lossy(&out.stderr).to_string();
    assert!(msg.contains("line 2"), "stderr: {msg}");
}

#[test]
fn negative_lambda_is_numeric_error() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_xy(dir.path());
    let out = run(&["fit", "--data", &data, "--kind", "smoothing", "--lambda=-1"]);
    assert_eq!(code(&out), 4);
}

#[test]
fn select_writes_table_and_choice() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_xy(dir.path());
    let outdir = dir.path().join("sel");
    let out = run(&[
        "select", "--data", &data, "--kind", "smoothing",
        "--grid", "log10nl:-5:0.5:-1", "--indexing", "lambda",
        "--out", outdir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let table = fs::read_to_string(outdir.join("criteria.csv")).unwrap();
    assert!(table.starts_with("theta,rss,div,aic,gcv\n"));
    assert_eq!(table.lines().count(), 10); // header + 9 grid points
    let chosen: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(outdir.join("chosen.json")).unwrap()).unwrap();
    assert!(chosen["chosen_theta"].as_f64().unwrap() > 0.0);
}

#[test]
fn select_rho_indexing_from_lambda_grid() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_xy(dir.path());
    let outdir = dir.path().join("sel-rho");
    let out = run(&[
        "select", "--data", &data, "--kind", "smoothing",
        "--grid", "log10nl:-4:0.5:-1", "--indexing", "rho", "--criterion", "aic",
        "--out", outdir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let table = fs::read_to_string(outdir.join("criteria.csv")).unwrap();
    // theta column is now rho, increasing
    let thetas: Vec<f64> = table
        .lines()
        .skip(1)
        .map(|l| l.split(',').next().unwrap().parse().unwrap())
        .collect();
    assert!(thetas.windows(2).all(|w| w[1] > w[0]));
}

#[test]
fn simulate_is_deterministic_across_jobs_and_seeded() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"n": 40, "replicates": 4, "grid_log10_nlambda": [-4.0, 0.25, -1.0]}"#)
        .unwrap();
    let out1 = dir.path().join("r1");
    let out2 = dir.path().join("r2");
    let cfg_s = cfg.to_str().unwrap();
    assert_eq!(
        code(&run(&["simulate", "--config", cfg_s, "--jobs", "1", "--out", out1.to_str().unwrap()])),
        0
    );
    assert_eq!(
        code(&run(&["simulate", "--config", cfg_s, "--jobs", "3", "--out", out2.to_str().unwrap()])),
        0
    );
    for name in ["divergence.csv", "relerr.csv", "summary.json"] {
        let a = fs::read(out1.join(name)).unwrap();
        let b = fs::read(out2.join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between job counts");
    }

    // a different seed via the environment changes the data
    let out3 = dir.path().join("r3");
    let st = bin()
        .args(["simulate", "--config", cfg_s, "--out", out3.to_str().unwrap()])
        .env("L2DIV_SEED", "42")
        .status()
        .unwrap();
    assert!(st.success());
    assert_ne!(
        fs::read(out1.join("divergence.csv")).unwrap(),
        fs::read(out3.join("divergence.csv")).unwrap()
    );
}

#[test]
fn simulate_rejects_unknown_config_keys() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"n": 40, "replica": 4}"#).unwrap();
    let out = run(&["simulate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&out), 3);
}

#[test]
fn validate_trace_suite_passes() {
    let out = run(&["validate", "--suite", "trace"]);
    assert_eq!(code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let records: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(!records.as_array().unwrap().is_empty());
}

#[test]
fn plot_data_renders_figures() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"n": 40, "replicates": 3, "grid_log10_nlambda": [-4.0, 0.25, -1.0]}"#)
        .unwrap();
    let reports = dir.path().join("reports");
    assert_eq!(
        code(&run(&[
            "simulate", "--config", cfg.to_str().unwrap(), "--out", reports.to_str().unwrap()
        ])),
        0
    );
    let out = run(&["plot-data", "--reports", reports.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    for name in ["figure1.svg", "figure2.svg"] {
        let svg = fs::read_to_string(reports.join(name)).unwrap();
        assert!(svg.starts_with("<svg"), "{name} is not an svg");
    }

    let out = run(&["plot-data", "--reports", "/no/such/dir"]);
    assert_eq!(code(&out), 3);
}
