use std::fs;

use hyperslice::harness::{parse_config, run_experiment, SUMMARY_HEADER};
use hyperslice::Error;

const SMALL: &str = r#"{
  "bodies": [
    {"kind": "lp", "n": 3, "p": 1},
    {"kind": "lp", "n": 2, "p": "inf", "weights": [1, 0.5]},
    {"kind": "image", "base": {"kind": "lp", "n": 2, "p": 1.5}, "matrix": [[1, 1], [0, 1]], "label": "sheared"}
  ],
  "densities": [{"kind": "lebesgue"}, {"kind": "gaussian", "sigma": 0.8}],
  "checks": ["eq2", "eq3", "eq1", "prop1"],
  "quad": {"engine": "deterministic", "seed": 11}
}"#;

#[test]
fn runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, SMALL).unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let first = run_experiment(&cfg, &a).unwrap();
    let second = run_experiment(&cfg, &b).unwrap();
    let csv_a = fs::read(a.join("summary.csv")).unwrap();
    assert_eq!(csv_a, fs::read(b.join("summary.csv")).unwrap());
    assert_eq!(fs::read(a.join("run.json")).unwrap(), fs::read(b.join("run.json")).unwrap());

    assert!(first.all_pass && second.all_pass, "{:?}", first.errors);
    // eq2: 2 unconditional bodies x 2 densities; eq3: 3 x 2; eq1: 3; prop1: B_1^3 x 2
    assert_eq!(first.reports.len(), 4 + 6 + 3 + 2);
    // eq2 on the sheared body, prop1 on the box and the sheared body
    assert_eq!(first.skipped.len(), 2 + 4);
    let text = String::from_utf8(csv_a).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), SUMMARY_HEADER.join(","));
    assert_eq!(lines.count(), first.reports.len());
    assert_eq!(fs::read_dir(a.join("reports")).unwrap().count(), first.reports.len());
    for r in &first.reports {
        assert!(r.is_consistent());
    }
}

#[test]
fn empty_body_list_is_not_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"bodies": [], "checks": ["eq2"]}"#).unwrap();
    let out = run_experiment(&cfg, &dir.path().join("out")).unwrap();
    assert!(out.reports.is_empty() && out.all_pass);
    let csv = fs::read_to_string(dir.path().join("out/summary.csv")).unwrap();
    assert_eq!(csv.trim_end(), SUMMARY_HEADER.join(","));
}

#[test]
fn one_dimensional_body_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"bodies": [{"kind": "lp", "n": 1, "p": 2}], "checks": ["eq3"]}"#).unwrap();
    assert!(matches!(run_experiment(&cfg, &dir.path().join("out")), Err(Error::Usage(_))));
}

#[test]
fn config_errors_carry_position() {
    let err = parse_config("{\n  \"bodies\": [],\n  \"checks\": [\"eq9\"]\n}").unwrap_err();
    let Error::Usage(msg) = err else { panic!("{err:?}") };
    assert!(msg.contains("line 3"), "{msg}");
    assert!(parse_config(r#"{"bodies": [], "checks": [], "extra": 1}"#).is_err());
    assert!(parse_config(r#"{"bodies": [], "checks": [], "quad": {"mc_samples": 0}}"#).is_err());
}

#[test]
fn mc_cells_in_high_dimension() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(
        &cfg,
        r#"{"bodies": [{"kind": "lp", "n": 6, "p": 2}], "checks": ["eq2"],
            "quad": {"engine": "monte_carlo", "mc_samples": 4000, "seed": 3},
            "opt": {"starts": 8, "ascents": 1, "max_iters": 20}}"#,
    )
    .unwrap();
    let out = run_experiment(&cfg, &dir.path().join("out")).unwrap();
    assert_eq!(out.reports.len(), 1);
    assert!(out.all_pass);
    let r = &out.reports[0];
    assert_eq!(r.n, 6);
    assert!(r.lhs.err > 0.0);
}
