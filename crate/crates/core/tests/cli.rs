//! Runs the `riplab` binary end to end.

use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn riplab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_riplab")).args(args).output().expect("binary runs")
}

fn report(args: &[&str]) -> Value {
    let out = riplab(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p.to_string_lossy().into_owned()
}

const SHARP_PAIR: &str = r#"{"x":{"rows":2,"cols":1,"entries":[0,1]},"z":{"rows":2,"cols":1,"entries":[1.4142135623730951,0]}}"#;

#[test]
fn bounds_and_delta_exact_on_sharp_pair() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "fp.json", SHARP_PAIR);
    let b = report(&["bounds", "--input", &input]);
    assert!((b["alpha"].as_f64().unwrap() - 2.0 / 5f64.sqrt()).abs() < 1e-12);
    assert!((b["beta"].as_f64().unwrap() - 1.0 / 5f64.sqrt()).abs() < 1e-12);
    assert!((b["delta_lb"].as_f64().unwrap() - 0.5).abs() < 1e-9);
    assert!((b["tradeoff"]["delta"].as_f64().unwrap() - 0.5).abs() < 1e-5);
    assert!(b["paper_ref"].is_string());

    let d = report(&["delta-exact", "--input", &input]);
    assert!((d["delta"].as_f64().unwrap() - 0.5).abs() < 1e-5);
    assert_eq!(d["h"]["rows"], 4);
    let d = report(&["delta-exact", "--input", &input, "--no-matrix"]);
    assert!(d.get("h").is_none());
}

#[test]
fn counterexample_report() {
    let c = report(&["counterexample", "--n", "2", "--r", "1", "--rstar", "1"]);
    assert!((c["delta_opt"].as_f64().unwrap() - 0.5).abs() < 1e-12);
    assert!((c["f"].as_f64().unwrap() - 1.5).abs() < 1e-9);
    assert_eq!(c["second_order"]["is_sosp"], true);
    assert!(c.get("operator").is_none());
    let c = report(&["counterexample", "--n", "3", "--r", "2", "--rstar", "1", "--with-operator"]);
    assert_eq!(c["operator"]["cols"], 9);
}

#[test]
fn ey_from_spectra_and_matrices() {
    let e = report(&["ey", "--s", "3,2,1", "--d", "0,0", "--r", "2"]);
    assert_eq!(e["value"].as_f64().unwrap(), 1.0);
    assert_eq!(e["Y_star"]["rows"], 3);

    let dir = tempfile::tempdir().unwrap();
    let a = write(dir.path(), "a.json", r#"{"rows":2,"cols":2,"entries":[2,1,1,2]}"#);
    let b = write(dir.path(), "b.json", r#"{"rows":1,"cols":1,"entries":[0.5]}"#);
    let e = report(&["ey", "--a", &a, "--b", &b, "--oracle"]);
    // Eigenvalues 3 and 1: 9 + 1 - (3 - 0.5)².
    assert!((e["value"].as_f64().unwrap() - 3.75).abs() < 1e-12);
    assert!((e["oracle_value"].as_f64().unwrap() - 3.75).abs() < 1e-6);
}

#[test]
fn scan_writes_trace() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("trace.csv");
    let s = report(&[
        "scan", "--n", "2", "--r", "1", "--rstar", "1", "--budget", "300", "--objective", "lb", "--seed", "4",
        "--trace", trace.to_str().unwrap(),
    ]);
    assert!(s["best_value"].as_f64().unwrap() >= 0.5 - 1e-9);
    assert_eq!(s["evaluations"], 300);
    let csv = std::fs::read_to_string(&trace).unwrap();
    assert!(csv.starts_with("evaluation,restart,step,value,best\n"));
    assert!(csv.lines().count() > 2);
}

#[test]
fn sgd_experiment_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sgd.csv");
    let r = report(&[
        "sgd-experiment", "--n", "4", "--trials", "3", "--ranks", "1,2", "--steps", "500", "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(r["summaries"].as_array().unwrap().len(), 2);
    let csv = std::fs::read_to_string(&out).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("rank,trial,seed,final_distance,final_loss,success"));
    assert_eq!(lines.count(), 6);
}

#[test]
fn trivial_check_and_verify_h() {
    let t = report(&["trivial-check", "--n", "2", "--r", "2", "--trials", "3"]);
    assert_eq!(t["summary"]["all_converged"], true);

    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "fp.json", SHARP_PAIR);
    let d = report(&["delta-exact", "--input", &input]);
    let h = write(dir.path(), "h.json", &d["h"].to_string());
    let delta = format!("{}", d["delta"].as_f64().unwrap() + 1e-6);
    let v = report(&["verify-h", "--input", &input, "--h", &h, "--delta", &delta]);
    assert_eq!(v["report"]["feasible"], true);
    let v = report(&["verify-h", "--input", &input, "--h", &h, "--delta", "0.3"]);
    assert_eq!(v["report"]["feasible"], false);
}

#[test]
fn exit_codes() {
    assert_eq!(riplab(&["no-such-command"]).status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.json", r#"{"rows":2,"cols":1,"entries":[1]}"#);
    assert_eq!(riplab(&["bounds", "--input", &bad]).status.code(), Some(2));
    let garbage = write(dir.path(), "garbage.json", "{not json");
    assert_eq!(riplab(&["bounds", "--input", &garbage]).status.code(), Some(2));
    assert_eq!(riplab(&["counterexample", "--n", "2", "--r", "2", "--rstar", "1"]).status.code(), Some(2));
    assert_eq!(riplab(&["ey", "--s", "1,2", "--d", "0"]).status.code(), Some(2));
    let v = riplab(&["--version"]);
    assert!(v.status.success());
    assert!(String::from_utf8_lossy(&v.stdout).starts_with("riplab "));
}

#[test]
fn output_file_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let o1 = dir.path().join("a.json");
    let o2 = dir.path().join("b.json");
    for o in [&o1, &o2] {
        let out = riplab(&["--seed", "17", "scan", "--n", "3", "--r", "1", "--rstar", "1", "--budget", "200", "--output", o.to_str().unwrap()]);
        assert!(out.status.success());
        assert!(out.stdout.is_empty());
    }
    assert_eq!(std::fs::read(&o1).unwrap(), std::fs::read(&o2).unwrap());
    let v: Value = serde_json::from_slice(&std::fs::read(&o1).unwrap()).unwrap();
    assert_eq!(v["seed"], 17);
}

#[test]
fn thread_cap_is_validated() {
    let out = Command::new(env!("CARGO_BIN_EXE_riplab"))
        .args(["trivial-check", "--n", "2", "--r", "2", "--trials", "1"])
        .env("RIPLAB_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = Command::new(env!("CARGO_BIN_EXE_riplab"))
        .args(["trivial-check", "--n", "2", "--r", "2", "--trials", "1"])
        .env("RIPLAB_THREADS", "1")
        .output()
        .unwrap();
    assert!(out.status.success());
}
