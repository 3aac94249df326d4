//! End-to-end tests of the `curlicue` binary: output shape, exit codes,
//! and determinism of file artifacts.

use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_curlicue"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn expand_prints_digits_and_coding() {
    let out = run(&["expand", "5/12"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("(1,+1) (1,+1) (1,*)"), "{text}");
    assert!(text.contains("qhat: 2 5 12"), "{text}");
}

#[test]
fn expand_json_is_machine_readable() {
    let out = run(&["expand", "5/12", "--json"]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_str(stdout(&out).trim()).unwrap();
    assert_eq!(v["alpha"], "5/12");
    assert_eq!(v["digits"], serde_json::json!([[1, 1], [1, 1], [1, 0]]));
    assert_eq!(v["nu"], serde_json::json!([1, 2, 3]));
}

#[test]
fn decimal_alpha_is_parsed_exactly() {
    // 0.375 = 3/8, whose expansion terminates
    let out = run(&["expand", "0.375"]);
    assert!(out.status.success());
    assert!(stdout(&out).contains("alpha = 3/8"));
}

#[test]
fn alpha_outside_domain_is_a_usage_error() {
    for bad in ["0", "-1/3", "7/5", "banana"] {
        let out = run(&["expand", bad]);
        assert_eq!(out.status.code(), Some(2), "alpha = {bad}");
    }
}

#[test]
fn eval_reports_small_difference() {
    let out = run(&["eval", "0.4142135623730951", "-N", "4000", "-J", "30"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    let diff_line = text
        .lines()
        .find(|l| l.starts_with("|gamma^J - exact|"))
        .expect("difference line");
    let diff: f64 = diff_line.split('=').nth(1).unwrap().trim().parse().unwrap();
    assert!(diff <= 1e-8, "{diff_line}");
}

#[test]
fn eval_trace_json_round_trips() {
    let out = run(&["eval", "5/12", "-N", "4", "-J", "1", "--trace-json", "--fast-only"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let first = stdout(&out).lines().next().unwrap().to_owned();
    let v: serde_json::Value = serde_json::from_str(&first).unwrap();
    assert_eq!(v["n"], 4);
    assert!(v["levels"].as_array().unwrap().len() >= 2);
}

#[test]
fn rational_alpha_with_short_expansion_is_a_budget_error() {
    let out = run(&["eval", "5/12", "-N", "1000", "--fast-only"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn curve_svg_is_deterministic_with_expected_vertices() {
    let dir = tempfile::tempdir().unwrap();
    let p1 = dir.path().join("a.svg");
    let p2 = dir.path().join("b.svg");
    for p in [&p1, &p2] {
        let out = run(&["curve", "5/12", "-N", "120", "--output", p.to_str().unwrap()]);
        assert!(out.status.success());
    }
    let s1 = std::fs::read(&p1).unwrap();
    let s2 = std::fs::read(&p2).unwrap();
    assert_eq!(s1, s2, "repeat renders must be byte-identical");
    let text = String::from_utf8(s1).unwrap();
    assert_eq!(text.matches("<polyline").count(), 1);
    let points = text.split("points=\"").nth(1).unwrap().split('"').next().unwrap();
    assert_eq!(points.split_whitespace().count(), 121);
}

#[test]
fn curve_csv_has_header_and_rows() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("c.csv");
    let out = run(&["curve", "5/12", "-N", "60", "--format", "csv", "--output", p.to_str().unwrap()]);
    assert!(out.status.success());
    let text = std::fs::read_to_string(&p).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "t,re,im");
    assert_eq!(lines.count(), 61);
}

#[test]
fn unknown_experiment_is_a_usage_error() {
    let out = run(&["dist", "--experiment", "nope"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bad_config_file_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("cfg.json");
    std::fs::write(&p, r#"{"experiment": "sampler", "bogus_field": 1}"#).unwrap();
    let out = run(&["dist", "--config", p.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn config_file_drives_an_experiment() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    let summary = dir.path().join("summary.json");
    std::fs::write(
        &cfg,
        r#"{"experiment": "sampler", "samples": 8192, "seed": 7, "precision_bits": 64}"#,
    )
    .unwrap();
    let out = run(&["dist", "--config", cfg.to_str().unwrap(), "--output", summary.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&summary).unwrap()).unwrap();
    assert_eq!(v["provenance"]["seed"], 7);
    assert_eq!(v["provenance"]["requested"], 8192);
}

#[test]
fn missing_subcommand_is_a_usage_error() {
    let out = run(&[]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn threads_flag_does_not_change_results() {
    let base = run(&["dist", "--experiment", "sampler", "--samples", "4096"]);
    let capped = run(&["--threads", "1", "dist", "--experiment", "sampler", "--samples", "4096"]);
    assert!(base.status.success() && capped.status.success());
    assert_eq!(stdout(&base), stdout(&capped));
}
