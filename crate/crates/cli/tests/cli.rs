use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn fh_verify(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fh-verify"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn results(out: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(out.join("results.json")).unwrap()).unwrap()
}

#[test]
fn spectrum_up_to_twenty() {
    let dir = tempfile::tempdir().unwrap();
    let o = fh_verify(&["spectrum", "--n-max", "20"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let doc = results(dir.path());
    assert_eq!(doc["schema_version"], 1);
    let reports = doc["results"].as_array().unwrap();
    assert_eq!(reports.len(), 21);
    for r in reports {
        assert!(r["max_abs_deviation"].as_f64().unwrap() <= 1e-10);
        assert_eq!(r["kind"], "L_phi");
    }
    let csv = std::fs::read_to_string(dir.path().join("spectrum.csv")).unwrap();
    assert!(csv.starts_with("n,index,computed,predicted\n"));
    assert!(dir.path().join("run.log").exists());
}

#[test]
fn threshold_bisection() {
    let dir = tempfile::tempdir().unwrap();
    let o = fh_verify(&["threshold", "--lo", "0", "--hi", "2", "--tol", "1e-6"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let a = results(dir.path())["results"]["alpha_star"].as_f64().unwrap();
    assert!((a - 1.0).abs() <= 1e-6);
}

#[test]
fn glued_energy() {
    let dir = tempfile::tempdir().unwrap();
    let o = fh_verify(&["ode", "--glued"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let r = &results(dir.path())["results"];
    assert_eq!(r["target"], "pi^2");
    assert!(r["abs_err"].as_f64().unwrap() <= 1e-3);
    assert!((r["energy"].as_f64().unwrap() - 9.8696).abs() < 1e-3);
    assert!(r.get("integration").is_none());
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(
        fh_verify(&["threshold", "--tol", "-1"], dir.path()).status.code(),
        Some(2)
    );
    assert_eq!(
        fh_verify(&["ward", "--alpha-min", "3", "--alpha-max", "1"], dir.path())
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        fh_verify(&["energy", "--torus-size", "2"], dir.path()).status.code(),
        Some(2)
    );
    assert_eq!(fh_verify(&["spectrum", "--bogus"], dir.path()).status.code(), Some(2));
    assert_eq!(fh_verify(&[], dir.path()).status.code(), Some(2));
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "command = \"threshold\"\nwidth = 3\n").unwrap();
    let o = fh_verify(&["--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("width"));
    assert_eq!(results(dir.path())["exit_status"], 2);
}

#[test]
fn oversized_laplacian_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let o = fh_verify(&["laplacian", "--dim", "4", "--size", "8"], dir.path());
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn tight_tolerances_fail_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let o = fh_verify(&["spectrum", "--n-max", "4", "--tolerance-scale", "1e-10"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    let doc = results(dir.path());
    assert_eq!(doc["passed"], false);
    assert!(!doc["failed"].as_array().unwrap().is_empty());
}

#[test]
fn identical_inputs_give_identical_json() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let c = tempfile::tempdir().unwrap();
    let args = ["bounds", "--maps-2d", "6", "--maps-4d", "2", "--seed", "5"];
    assert_eq!(fh_verify(&args, a.path()).status.code(), Some(0));
    assert_eq!(fh_verify(&args, b.path()).status.code(), Some(0));
    let first = std::fs::read(a.path().join("results.json")).unwrap();
    assert_eq!(first, std::fs::read(b.path().join("results.json")).unwrap());
    assert_eq!(
        std::fs::read(a.path().join("bounds_2d.csv")).unwrap(),
        std::fs::read(b.path().join("bounds_2d.csv")).unwrap()
    );
    let other = ["bounds", "--maps-2d", "6", "--maps-4d", "2", "--seed", "6"];
    fh_verify(&other, c.path());
    assert_ne!(first, std::fs::read(c.path().join("results.json")).unwrap());
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("threshold.toml");
    std::fs::write(&cfg, "command = \"threshold\"\nseed = 3\nlo = 0.5\ntol = 1e-4\n").unwrap();
    let o = fh_verify(
        &["--config", cfg.to_str().unwrap(), "threshold", "--tol", "1e-8"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0));
    let doc = results(dir.path());
    assert_eq!(doc["seed"], 3);
    assert_eq!(doc["parameters"]["lo"], 0.5);
    assert_eq!(doc["parameters"]["tol"], 1e-8);
    assert!((doc["results"]["alpha_star"].as_f64().unwrap() - 1.0).abs() <= 1e-8);
}

#[test]
fn ode_integration_and_flow_tables() {
    let dir = tempfile::tempdir().unwrap();
    let o = fh_verify(&["ode", "--integrate", "--t-end", "3"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let r = &results(dir.path())["results"]["integration"];
    assert!(r["max_abs_err"].as_f64().unwrap() <= 1e-8);
    assert!(std::fs::read_to_string(dir.path().join("ode.csv"))
        .unwrap()
        .starts_with("t,alpha\n"));

    let o = fh_verify(&["flow", "--target", "t2", "--size", "8", "--steps", "5"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let lines = std::fs::read_to_string(dir.path().join("flow.csv"))
        .unwrap()
        .lines()
        .count();
    assert!(lines >= 2);
}
