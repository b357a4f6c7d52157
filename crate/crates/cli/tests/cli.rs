use std::process::{Command, Output};

use serde_json::Value;

fn indet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_indet"))
        .args(args)
        .env_remove("INDET_SEED")
        .output()
        .expect("binary runs")
}

fn json(args: &[&str]) -> Value {
    let out = indet(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("JSON output")
}

fn close(v: &Value, want: f64, tol: f64) -> bool {
    (v.as_f64().unwrap() - want).abs() <= tol
}

#[test]
fn check_power_pair() {
    let v = json(&["check", "--margins", "power:0.75,power:0.75"]);
    assert_eq!(v["ok"], Value::Bool(true));
    assert!(close(&v["slack"], 0.5, 1e-15));
    assert_eq!(v["meta"]["command"], "check");
}

#[test]
fn check_reports_incompatible_pair() {
    let v = json(&["check", "--margins", "linear:2,linear:2"]);
    assert_eq!(v["ok"], Value::Bool(false));
    assert!(close(&v["slack"], -1.0, 1e-15));
}

#[test]
fn spread_near_limit() {
    let v = json(&["spread", "--margins", "extremal:0.0001"]);
    assert!(close(&v["delta1"], 0.0625, 1e-4));
}

#[test]
fn test_report_schema() {
    let v = json(&["test", "--margins", "spike", "--n", "10000", "--reps", "0", "--seed", "7"]);
    assert!(close(&v["l0"], 3.0, 1e-10));
    assert!(close(&v["l1"], 4.0, 1e-10));
    assert!(close(&v["eta"], 1.0, 1e-10));
    for key in ["t_n", "threshold", "decision", "I_threshold", "bahadur_slope", "tail"] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
    assert_eq!(v["decision"], "accept_H0");
    assert_eq!(v["meta"]["seed"], 7);
}

#[test]
fn test_alternative_rejects_with_tail() {
    let v = json(&[
        "test", "--margins", "spike", "--n", "2000", "--reps", "1000", "--hypothesis",
        "alternative", "--threshold", "3.5",
    ]);
    assert_eq!(v["decision"], "reject_H0");
    assert_eq!(v["tail"]["reps"], 1000);
    assert!(close(&v["threshold"], 3.5, 0.0));
}

#[test]
fn same_seed_same_bytes() {
    let args = ["test", "--margins", "spike", "--n", "500", "--reps", "1000", "--seed", "11"];
    let a = indet(&args);
    let b = indet(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let c = indet(&["test", "--margins", "spike", "--n", "500", "--reps", "1000", "--seed", "12"]);
    assert_ne!(a.stdout, c.stdout);
}

#[test]
fn worker_count_does_not_change_output() {
    let base = ["sample", "--margins", "spike", "--n", "10000", "--seed", "3"];
    let one = indet(&[&base[..], &["--workers", "1"]].concat());
    let four = indet(&[&base[..], &["--workers", "4"]].concat());
    assert!(one.status.success());
    assert_eq!(one.stdout, four.stdout);
}

#[test]
fn seed_from_environment() {
    let out = Command::new(env!("CARGO_BIN_EXE_indet"))
        .args(["sample", "--margins", "spike", "--n", "5", "--out", "csv"])
        .env("INDET_SEED", "42")
        .output()
        .unwrap();
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().next().unwrap().contains("seed=42"), "{text}");
    assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 6);
}

#[test]
fn copula_csv_columns() {
    let out = indet(&["copula", "--margins", "power:0.75,power:0.75", "--out", "csv", "--grid", "3"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with('#'));
    assert_eq!(lines.next().unwrap(), "u,v,C_indet,C_indep,difference");
    assert_eq!(lines.count(), 9);
}

#[test]
fn likelihood_invariance() {
    let v = json(&["likelihood", "--margins", "spike", "--coupling", "fgm", "--theta", "0.7"]);
    assert!(close(&v["l_vs_indet"], 3.0, 1e-10));
    assert!(close(&v["l_vs_indet_2d"], 3.0, 1e-8));
    assert!(v["l_self"].as_f64().unwrap() >= 3.0);
}

#[test]
fn discrete_matrix() {
    let v = json(&[
        "discrete", "--margins", r#"{"mu":[0.6,0.4],"nu":[0.7,0.3]}"#, "--trials", "1000",
    ]);
    assert!(close(&v["matching"], 0.30, 1e-12));
    assert!(close(&v["matching_independence"], 0.3016, 1e-12));
    assert_eq!(v["minimal"], Value::Bool(true));
}

#[test]
fn config_file_overrides_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(&cfg, r#"{"margins": "spike", "n": 50, "seed": 5}"#).unwrap();
    let v = json(&[
        "test", "--margins", "linear:1,linear:-1", "--n", "10", "--config",
        cfg.to_str().unwrap(),
    ]);
    assert_eq!(v["n"], 50);
    assert_eq!(v["meta"]["seed"], 5);
    assert!(close(&v["l0"], 3.0, 1e-10));
}

#[test]
fn output_file_written() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("grid.csv");
    let out = indet(&[
        "couple", "--margins", "spike", "--out", "csv", "--grid", "4", "--output",
        path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let text = std::fs::read_to_string(path).unwrap();
    assert_eq!(text.lines().nth(1), Some("x,y,density"));
    assert_eq!(text.lines().count(), 2 + 16);
}

#[test]
fn exit_codes() {
    assert_eq!(indet(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(indet(&["check"]).status.code(), Some(2));
    let bad = indet(&["check", "--margins", "[{\"kind\":\"power\",\"alfa\":1},{\"kind\":\"uniform\"}]"]);
    assert_eq!(bad.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("alfa"));
    let incompatible = indet(&["test", "--margins", "linear:2,linear:2"]);
    assert_eq!(incompatible.status.code(), Some(2));
    let singular = indet(&["discrete", "--margins", "0.9 0.1,0.9 0.1"]);
    assert_eq!(singular.status.code(), Some(2));
}

#[test]
fn unbounded_square_sampling_rejected() {
    let out = indet(&["sample", "--margins", "power:0.75,power:0.75", "--square"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unbounded"));
}

#[test]
fn every_command_has_help() {
    for cmd in [
        "check", "couple", "copula", "spread", "likelihood", "sample", "test", "slope", "discrete",
    ] {
        let out = indet(&[cmd, "--help"]);
        assert_eq!(out.status.code(), Some(0), "{cmd}");
        assert!(String::from_utf8_lossy(&out.stdout).contains("--margins"));
    }
}
