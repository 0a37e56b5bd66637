use std::path::Path;
use std::process::{Command, Output};

fn cvbench(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cvbench"))
        .env("CVBENCH_THREADS", "1")
        .args(args)
        .output()
        .unwrap()
}

fn stdout_json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

fn stderr_json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stderr).unwrap()
}

#[test]
fn help_lists_every_flag_with_defaults() {
    let out = cvbench(&["--help"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for flag in [
        "--cutoff",
        "--grid-points",
        "--window",
        "--threshold",
        "--targets",
        "--families",
        "--angles",
        "--eps-max",
        "--eps-steps",
        "--out",
        "--format",
        "--config",
    ] {
        assert!(text.contains(flag), "missing {flag}");
    }
    for default in [
        "[default: 80]",
        "[default: 201]",
        "[default: 7]",
        "[default: 0.90]",
        "[default: 72]",
    ] {
        assert!(text.contains(default), "missing {default}");
    }
}

#[test]
fn metrics_for_single_photon() {
    let out = cvbench(&["metrics", "fock{n=1,cutoff=80}"]);
    assert!(out.status.success());
    let v = stdout_json(&out);
    assert!((v["delta"].as_f64().unwrap() - 0.21306).abs() < 6e-3);
    assert_eq!(v["parity"].as_f64().unwrap(), -1.0);
    assert!((v["mean_photon"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    assert!((v["anisotropy"].as_f64().unwrap() - 1.0).abs() < 1e-9);
}

#[test]
fn match_outputs_in_both_formats() {
    let out = cvbench(&["--format", "json", "match", "--family", "odd_cat", "--target-n", "3.0"]);
    assert!(out.status.success());
    let alpha = stdout_json(&out)["parameter"].as_f64().unwrap();
    assert!((alpha - 1.72766).abs() < 1e-4);

    let out = cvbench(&["match", "--family", "even_cat", "--target-n", "2.5"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "family,target_n,parameter,r_db_or_alpha,achieved_n,feasible,reason"
    );
    assert!(lines.next().unwrap().starts_with("even_cat,"));
}

#[test]
fn distinct_exit_codes() {
    let infeasible = cvbench(&["match", "--family", "odd_cat", "--target-n", "1.0"]);
    assert_eq!(infeasible.status.code(), Some(3));
    assert_eq!(stderr_json(&infeasible)["error"], "infeasible");

    let parse = cvbench(&["state", "fock{n=1"]);
    assert_eq!(parse.status.code(), Some(2));
    assert_eq!(stderr_json(&parse)["error"], "parse");

    let unknown_flag = cvbench(&["--bogus", "verify"]);
    assert_eq!(unknown_flag.status.code(), Some(2));
    assert!(stderr_json(&unknown_flag)["message"].is_string());

    let guard = cvbench(&["metrics", "squeezed_fock{r_db=12.5,n=1,cutoff=80}"]);
    assert_eq!(guard.status.code(), Some(4));
    assert_eq!(stderr_json(&guard)["error"], "tail_guard");

    let window = cvbench(&["--window", "2", "--grid-points", "41", "metrics", "fock{n=3}"]);
    assert_eq!(window.status.code(), Some(5));
    assert!(stdout_json(&window)["window_limited"].as_bool().unwrap());

    let bad_threads = Command::new(env!("CARGO_BIN_EXE_cvbench"))
        .env("CVBENCH_THREADS", "many")
        .args(["state", "fock{n=0}"])
        .output()
        .unwrap();
    assert_eq!(bad_threads.status.code(), Some(2));
}

fn read(dir: &Path, name: &str) -> Vec<u8> {
    std::fs::read(dir.join(name)).unwrap()
}

#[test]
fn run_manifest_round_trip_reproduces_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let first = tmp.path().join("first");
    let second = tmp.path().join("second");
    let out = cvbench(&[
        "sweep-radii",
        "--targets",
        "0.5,3",
        "--families",
        "odd_cat,fock",
        "--angles",
        "8",
        "--out",
        first.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let manifest: serde_json::Value = serde_json::from_slice(&read(&first, "run.json")).unwrap();
    assert_eq!(manifest["tool"], "cvbench");
    assert_eq!(manifest["command"], "sweep-radii");
    assert_eq!(manifest["config"]["angles"], 8);
    assert_eq!(manifest["config"]["cutoff"], 80);

    let cfg = first.join("run.json");
    let out = cvbench(&[
        "sweep-radii",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        second.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    assert_eq!(read(&first, "radii_sweep.csv"), read(&second, "radii_sweep.csv"));

    let csv = String::from_utf8(read(&first, "radii_sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 5);
    assert!(csv
        .lines()
        .nth(1)
        .unwrap()
        .starts_with("odd_cat,5.0000000000000000e-1,false,"));
}

#[test]
fn json_format_and_flag_precedence() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg_path = tmp.path().join("cfg.json");
    std::fs::write(
        &cfg_path,
        r#"{"targets": [2.0], "families": ["fock"], "grid_points": 41, "format": "json"}"#,
    )
    .unwrap();
    let out_dir = tmp.path().join("out");
    let out = cvbench(&[
        "sweep-scalar",
        "--config",
        cfg_path.to_str().unwrap(),
        "--grid-points",
        "61",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows: serde_json::Value = serde_json::from_slice(&read(&out_dir, "scalar_sweep.json")).unwrap();
    assert_eq!(rows.as_array().unwrap().len(), 1);
    assert_eq!(rows[0]["provenance"]["grid_points"], 61);
    assert_eq!(rows[0]["family"], "fock");
}

#[test]
fn verify_reports_all_checks() {
    let tmp = tempfile::tempdir().unwrap();
    let out = cvbench(&["verify", "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let log = String::from_utf8(out.stderr).unwrap();
    assert_eq!(log.lines().filter(|l| l.starts_with("PASS")).count(), 5);
    let csv = String::from_utf8(read(tmp.path(), "consistency.csv")).unwrap();
    assert!(csv.starts_with("check,passed,measured,tolerance,margin,detail"));
}
