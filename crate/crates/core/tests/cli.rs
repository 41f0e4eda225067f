//! End-to-end checks of the installed binary: exit statuses, report shape,
//! and byte-level determinism of `--no-meta` output.

use serde_json::Value;
use std::process::{Command, Output};

fn heatcube(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_heatcube"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is a JSON report")
}

#[test]
fn identity_example_passes_with_tiny_residuals() {
    let out = heatcube(&[
        "verify-identity",
        "--n",
        "6",
        "--trials",
        "100",
        "--seed",
        "7",
        "--no-meta",
    ]);
    assert_eq!(out.status.code(), Some(0), "{out:?}");
    let report = stdout_json(&out);
    assert_eq!(report["verdict"], "pass");
    assert_eq!(report["results"].as_array().unwrap().len(), 100);
    let max = report["residuals"]["max_scaled_residual"].as_f64().unwrap();
    assert!(max <= 1e-10, "max scaled residual {max}");
}

#[test]
fn sharp_distortion_example_reports_ratio_three() {
    let out = heatcube(&[
        "distortion",
        "--sharp",
        "--n",
        "6",
        "--d",
        "2",
        "--p",
        "1",
        "--no-meta",
    ]);
    assert_eq!(out.status.code(), Some(0), "{out:?}");
    let report = stdout_json(&out);
    let row = &report["results"][0];
    assert_eq!(row["edge_antipodal_ratio"].as_f64().unwrap(), 3.0);
    assert_eq!(row["lip"].as_f64().unwrap(), 2.0);
    assert_eq!(row["distortion"].as_str().unwrap(), "inf");
}

#[test]
fn borsuk_example_finds_a_witness_that_holds() {
    let out = heatcube(&[
        "borsuk",
        "--n",
        "5",
        "--range-dim",
        "2",
        "--seed",
        "1",
        "--no-meta",
    ]);
    assert_eq!(out.status.code(), Some(0), "{out:?}");
    let report = stdout_json(&out);
    assert_eq!(report["verdict"], "pass");
    let row = &report["results"][0];
    assert!(row["residual"].as_f64().unwrap() <= 1e-8);
    assert_eq!(row["holds"].as_bool(), Some(true));
}

#[test]
fn no_meta_reports_are_byte_identical_across_runs() {
    let args = [
        "poincare",
        "--n",
        "4",
        "--trials",
        "10",
        "--seed",
        "42",
        "--no-meta",
    ];
    let first = heatcube(&args);
    let second = heatcube(&args);
    assert_eq!(first.status.code(), Some(0));
    assert_eq!(first.stdout, second.stdout);
    assert!(!first.stdout.is_empty());
}

#[test]
fn meta_block_appears_by_default() {
    let out = heatcube(&["enflo", "--n", "3", "--trials", "2", "--seed", "5"]);
    assert_eq!(out.status.code(), Some(0));
    let report = stdout_json(&out);
    assert!(report["meta"]["version"].is_string());
    assert!(report["meta"]["threads"].as_u64().unwrap() >= 1);
}

#[test]
fn violations_exit_one_and_keep_the_rows() {
    let out = heatcube(&[
        "verify-identity",
        "--n",
        "3",
        "--trials",
        "2",
        "--tol",
        "1e-30",
        "--no-meta",
    ]);
    assert_eq!(out.status.code(), Some(1), "{out:?}");
    let report = stdout_json(&out);
    assert_eq!(report["verdict"], "fail");
    assert_eq!(report["results"][0]["pass"].as_bool(), Some(false));
}

#[test]
fn config_errors_exit_two() {
    // semantic configuration error (parses, fails validation)
    let out = heatcube(&["verify-identity", "--n", "40"]);
    assert_eq!(out.status.code(), Some(2), "{out:?}");
    assert!(out.stdout.is_empty());
    assert!(String::from_utf8_lossy(&out.stderr).contains("configuration error"));
    // clap-level usage error
    let out = heatcube(&["verify-identity", "--nope", "3"]);
    assert_eq!(out.status.code(), Some(2));
    // conflicting time parameters
    let out = heatcube(&["simulate", "--n", "3", "--q", "0.5", "--t", "1.0"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn output_flag_writes_the_report_to_a_file() {
    let dir = std::env::temp_dir().join(format!("heatcube-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("report.json");
    let out = heatcube(&[
        "semigroup",
        "--n",
        "3",
        "--trials",
        "2",
        "--no-meta",
        "--output",
        path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{out:?}");
    assert!(out.stdout.is_empty());
    let report: Value = serde_json::from_slice(&std::fs::read(&path).unwrap()).unwrap();
    assert_eq!(report["verdict"], "pass");
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn csv_format_emits_one_line_per_trial() {
    let out = heatcube(&[
        "enflo",
        "--n",
        "3",
        "--trials",
        "4",
        "--format",
        "csv",
        "--no-meta",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 5);
    assert!(lines[0].split(',').any(|h| h == "ratio"));
}

#[test]
fn simulate_matches_the_exact_operator() {
    let out = heatcube(&[
        "simulate",
        "--n",
        "3",
        "--q",
        "0.6",
        "--samples",
        "5000",
        "--trials",
        "10",
        "--seed",
        "3",
        "--no-meta",
    ]);
    assert_eq!(out.status.code(), Some(0), "{out:?}");
    let report = stdout_json(&out);
    assert!(report["residuals"]["share_within_4_stderr"].as_f64().unwrap() >= 0.95);
}
