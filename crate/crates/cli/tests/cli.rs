use std::fs;
use std::process::{Command, Output};

use serde_json::Value;

fn hyperslice(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hyperslice")).args(args).output().unwrap()
}

fn json_out(args: &[&str]) -> Value {
    let out = hyperslice(args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn number(v: &Value) -> f64 {
    v.to_string().parse().unwrap()
}

#[test]
fn cube_volume_and_section() {
    let cube = r#"{"kind":"lp","n":3,"p":"inf"}"#;
    let v = json_out(&["volume", "--body", cube]);
    assert!((number(&v["volume"]["value"]) - 8.0).abs() < 1e-10);
    let s = json_out(&["section", "--body", cube, "--xi", "1,1,0"]);
    assert!((number(&s["section"]["value"]) - 4.0 * 2f64.sqrt()).abs() < 1e-10);
    let s = json_out(&["section", "--body", cube, "--xi", "-1,0,0"]);
    assert!((number(&s["section"]["value"]) - 4.0).abs() < 1e-10);
}

#[test]
fn check_passes_and_csv_has_header() {
    let out = hyperslice(&["--format", "csv", "check", "eq2", "--body", r#"{"kind":"lp","n":2,"p":2}"#]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    let ratio = row[header.iter().position(|h| *h == "ratio").unwrap()].parse::<f64>().unwrap();
    assert!(ratio < 1.0);
}

#[test]
fn usage_errors_exit_2() {
    let out = hyperslice(&["check", "eq2", "--body", r#"{"kind":"lp","n":2,"p":0.5}"#]);
    assert_eq!(out.status.code(), Some(2));
    let out = hyperslice(&["volume", "--body", r#"{"kind":"ball"}"#]);
    assert_eq!(out.status.code(), Some(2));
    let out = hyperslice(&["section", "--body", r#"{"kind":"lp","n":3,"p":1}"#, "--xi", "1,0"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn run_writes_summary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"bodies": [{"kind": "lp", "n": 2, "p": 1}], "checks": ["eq2", "eq3"]}"#).unwrap();
    let out_dir = dir.path().join("out");
    let out = hyperslice(&["--out", out_dir.to_str().unwrap(), "run", cfg.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(out_dir.join("summary.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);

    fs::write(&cfg, r#"{"bodies": [{"kind": "lp", "n": 1, "p": 1}], "checks": ["eq2"]}"#).unwrap();
    let out = hyperslice(&["--out", out_dir.to_str().unwrap(), "run", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn factorization_commands() {
    let body = r#"{"kind":"lp","n":2,"p":1.5,"weights":[1,2]}"#;
    let l = json_out(&["lozanovskii", "--body", body]);
    assert_eq!(l["sandwich_ok"], Value::Bool(true));
    let j = json_out(&["john", "--body", r#"{"kind":"lp","n":3,"p":"inf"}"#]);
    for a in j["semi_axes"].as_array().unwrap() {
        assert!((number(a) - 1.0).abs() < 1e-6);
    }
    let m = json_out(&["mahler", "--body", r#"{"kind":"lp","n":2,"p":"inf"}"#]);
    assert!((number(&m["mahler_volume"]["value"]) - 8.0).abs() < 1e-6);
    let ib = json_out(&["intersection-body", "--body", r#"{"kind":"lp","n":3,"p":2}"#, "--dirs", "3"]);
    for s in ib["samples"].as_array().unwrap() {
        assert!((number(&s["radial"]) - std::f64::consts::PI).abs() < 1e-6);
    }
}
