use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use clap::Parser;
use clusterperm_cli::report::Payload;
use clusterperm_cli::{run, Report, RunConfig};
use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_clusterperm"))
}

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data").join(name)
}

fn invoke(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn error_of(out: &Output) -> Value {
    assert!(!out.status.success());
    let err: Value = serde_json::from_slice(&out.stderr).expect("stderr is a JSON envelope");
    err["error"].clone()
}

fn write(dir: &tempfile::TempDir, name: &str, body: &str) -> PathBuf {
    let path = dir.path().join(name);
    std::fs::write(&path, body).unwrap();
    path
}

#[test]
fn toy_test_reports_a_grid_pvalue() {
    let toy = data("toy_dyadic.csv");
    let out = invoke(&["test", "--data", toy.to_str().unwrap(), "--b0", "0.5"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: Report = serde_json::from_slice(&out.stdout).unwrap();
    let Payload::Test(t) = report.result else { panic!("wrong payload") };
    assert_eq!(t.num_perms, 19);
    assert_eq!(t.n_obs, 400);
    let scaled = t.pval * 20.0;
    assert!((scaled - scaled.round()).abs() < 1e-12 && scaled >= 1.0);
    assert!(!t.reject);
}

#[test]
fn repeated_runs_are_byte_identical() {
    let toy = data("toy_dyadic.csv");
    let args = ["ci", "--data", toy.to_str().unwrap(), "--seed", "42"];
    let first = invoke(&args);
    let second = invoke(&args);
    assert!(first.status.success());
    assert_eq!(first.stdout, second.stdout);
}

#[test]
fn thread_count_does_not_change_output() {
    let args = ["simulate", "--panel", "table1", "--n", "8", "--reps", "12", "--num-perms", "7"];
    let one = invoke(&[&args[..], &["--threads", "1"]].concat());
    let two = invoke(&[&args[..], &["--threads", "2"]].concat());
    assert!(one.status.success(), "{}", String::from_utf8_lossy(&one.stderr));
    let strip = |o: &Output| {
        let mut v: Value = serde_json::from_slice(&o.stdout).unwrap();
        v["config"]["global"]["threads"] = Value::Null;
        v
    };
    assert_eq!(strip(&one), strip(&two));
    let a: Report = serde_json::from_slice(&one.stdout).unwrap();
    let b: Report = serde_json::from_slice(&two.stdout).unwrap();
    assert_eq!(a.config_digest, b.config_digest);
}

#[test]
fn ci_below_resolution_fails() {
    let toy = data("toy_dyadic.csv");
    let out = invoke(&["ci", "--data", toy.to_str().unwrap(), "--alpha", "0.01"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(error_of(&out)["code"], "E_RESOLUTION");
}

#[test]
fn parse_error_names_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(&dir, "bad.csv", "i,j,y,d\n1,1,0.5,1.0\n1,2,oops,2.0\n");
    let out = invoke(&["test", "--data", path.to_str().unwrap()]);
    let err = error_of(&out);
    assert_eq!(err["code"], "E_PARSE");
    assert_eq!(err["line"], 3);
}

#[test]
fn duplicate_cells_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(&dir, "dup.csv", "i,j,y,d\n1,1,0.5,1.0\n1,2,0.1,2.0\n1,1,0.7,0.3\n");
    let out = invoke(&["test", "--data", path.to_str().unwrap()]);
    assert_eq!(error_of(&out)["code"], "E_DUPLICATE_CELL");
}

#[test]
fn missing_cells_without_the_missing_command_fail() {
    let toy = data("toy_missing.csv");
    let out = invoke(&["test", "--data", toy.to_str().unwrap()]);
    assert_eq!(error_of(&out)["code"], "E_MISSING_DATA");
}

#[test]
fn three_row_mask_finds_the_two_by_two_block() {
    let dir = tempfile::tempdir().unwrap();
    // rows 011 / 111 / 110: the largest block has area 4
    let path = write(
        &dir,
        "mask.csv",
        "i,j,m\n1,1,0\n1,2,1\n1,3,1\n2,1,1\n2,2,1\n2,3,1\n3,1,1\n3,2,1\n3,3,0\n",
    );
    let out = invoke(&["biclique", "--mask", path.to_str().unwrap(), "--biclique-solver", "exact"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: Report = serde_json::from_slice(&out.stdout).unwrap();
    let Payload::Biclique(b) = report.result else { panic!("wrong payload") };
    assert_eq!(b.largest.rows.len() * b.largest.cols.len(), 4);
    assert_eq!(b.observed_cells, 7);
}

#[test]
fn missing_design_uses_only_a_full_block() {
    let toy = data("toy_missing.csv");
    let out = invoke(&["test-missing", "--data", toy.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: Report = serde_json::from_slice(&out.stdout).unwrap();
    let Payload::Missing(m) = report.result else { panic!("wrong payload") };
    assert!(m.cell_count <= m.observed_cells);
    assert_eq!(m.test.n_obs, m.cell_count);
}

#[test]
fn exact_solver_cap_is_enforced() {
    let obs = invoke(&["simulate", "--panel", "growth", "--n", "20", "--reps", "2"]);
    assert_eq!(error_of(&obs)["code"], "E_CAP_EXCEEDED");
}

#[test]
fn text_output_and_out_file() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("report.txt");
    let toy = data("toy_panel.csv");
    let out = invoke(&["test-panel", "--data", toy.to_str().unwrap(), "--format", "text", "--out", target.to_str().unwrap()]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let text = std::fs::read_to_string(target).unwrap();
    assert!(text.contains("design      panel"));
}

#[test]
fn config_round_trips_through_the_report() {
    let toy = data("toy_dyadic.csv");
    let config = RunConfig::parse_from(["clusterperm", "test", "--data", toy.to_str().unwrap(), "--seed", "9", "--num-perms", "9"]);
    let report = run(&config).unwrap();
    let json = serde_json::to_string(&report).unwrap();
    let back: Report = serde_json::from_str(&json).unwrap();
    assert_eq!(back, report);
    let rerun = run(&back.config).unwrap();
    assert_eq!(rerun, report);
}

#[test]
fn infinite_bounds_serialize_as_strings() {
    let v = serde_json::to_value(clusterperm_cli::report::Real(f64::NEG_INFINITY)).unwrap();
    assert_eq!(v, Value::String("-inf".into()));
    let back: clusterperm_cli::report::Real = serde_json::from_value(Value::String("inf".into())).unwrap();
    assert!(back.0.is_infinite() && back.0 > 0.0);
}
