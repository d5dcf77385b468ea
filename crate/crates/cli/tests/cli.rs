use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const FAMS_TOY: &str = r#"{
  "marshals": 3,
  "schedules": [
    {"id": 1, "flights": [0]},
    {"id": 2, "flights": [0, 1]},
    {"id": 3, "flights": [1]}
  ],
  "flights": [
    {"id": 0, "u_def": -1, "u_undef": -6},
    {"id": 1, "u_def": -1, "u_undef": -4}
  ]
}"#;

const TSG_TOY: &str = r#"{
  "resources": [{"id": 0, "capacity": 7}, {"id": 1, "capacity": 15}],
  "teams": [
    {"id": 0, "members": [0], "eff": 0.9},
    {"id": 1, "members": [0, 1], "eff": 0.95},
    {"id": 2, "members": [1], "eff": 0.5}
  ],
  "categories": [
    {"id": 0, "risk": 0, "flight": 0, "n": 2, "u_def": -1, "u_undef": -10},
    {"id": 1, "risk": 1, "flight": 0, "n": 3, "u_def": -1, "u_undef": -5},
    {"id": 2, "risk": 1, "flight": 1, "n": 15, "u_def": -1, "u_undef": -4}
  ],
  "risks": [{"id": 0, "p": 0.4}, {"id": 1, "p": 0.6}]
}"#;

fn ara(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ara"))
        .args(args)
        .env_remove("ARA_THREADS")
        .output()
        .expect("binary runs")
}

fn write(dir: &TempDir, name: &str, text: &str) -> String {
    let path = dir.path().join(name);
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn json(out: &Output) -> Value {
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).unwrap()
}

fn without_wall_time(mut v: Value) -> Value {
    v.as_object_mut().unwrap().remove("wall_ms");
    v
}

#[test]
fn rand_on_toy_tsg_respects_the_bound() {
    let dir = TempDir::new().unwrap();
    let inst = write(&dir, "tsg.json", TSG_TOY);
    let report = json(&ara(&[
        "solve",
        &inst,
        "--method",
        "rand",
        "--samples",
        "1000",
    ]));
    let value = report["value"].as_f64().unwrap();
    let ub = report["upper_bound"].as_f64().unwrap();
    assert!(value <= ub + 1e-6);
    assert_eq!(report["method"], "rand");
    assert_eq!(report["family"], "tsg");
    assert!(report["c_measured"].as_f64().unwrap() >= 1.0);
    assert_eq!(report["instance_digest"].as_str().unwrap().len(), 64);
}

#[test]
fn exact_and_cg_agree_on_fams_toy() {
    let dir = TempDir::new().unwrap();
    let inst = write(&dir, "fams.json", FAMS_TOY);
    let exact = json(&ara(&["solve", &inst, "--method", "exact"]));
    let cg = json(&ara(&["solve", &inst, "--method", "cg"]));
    let (a, b) = (
        exact["value"].as_f64().unwrap(),
        cg["value"].as_f64().unwrap(),
    );
    assert!((a - b).abs() < 1e-6, "{a} vs {b}");
    assert_eq!(exact["loss_pct"].as_f64(), Some(0.0));

    let rand = json(&ara(&[
        "solve",
        &inst,
        "--baseline",
        &a.to_string(),
        "--seed",
        "3",
    ]));
    let loss = rand["loss_pct"].as_f64().unwrap();
    let expected = 100.0 * (a - rand["value"].as_f64().unwrap()) / a.abs();
    assert!((loss - expected).abs() < 1e-9);
}

#[test]
fn same_seed_gives_the_same_report() {
    let dir = TempDir::new().unwrap();
    let inst = write(&dir, "fams.json", FAMS_TOY);
    let run = || {
        without_wall_time(json(&ara(&[
            "solve",
            &inst,
            "--seed",
            "11",
            "--samples",
            "300",
        ])))
    };
    assert_eq!(run(), run());
}

#[test]
fn report_goes_to_out_file() {
    let dir = TempDir::new().unwrap();
    let inst = write(&dir, "tsg.json", TSG_TOY);
    let out = dir.path().join("report.json");
    let status = ara(&[
        "solve",
        &inst,
        "--method",
        "marginal-bound",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(status.status.success());
    assert!(status.stdout.is_empty());
    let report: Value = serde_json::from_str(&fs::read_to_string(out).unwrap()).unwrap();
    assert_eq!(report["value"], report["upper_bound"]);
}

#[test]
fn parse_errors_exit_with_two_and_name_the_line() {
    let dir = TempDir::new().unwrap();
    let bad = write(
        &dir,
        "bad.json",
        "{\n  \"marshals\": 2,\n  \"schedules\": [,]\n}",
    );
    let out = ara(&["solve", &bad]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("line 3"), "{stderr}");

    let missing = dir.path().join("nope.json");
    assert_eq!(
        ara(&["solve", missing.to_str().unwrap()]).status.code(),
        Some(2)
    );
    assert_eq!(ara(&["solve"]).status.code(), Some(2));
    let inst = write(&dir, "fams.json", FAMS_TOY);
    assert_eq!(
        ara(&["solve", &inst, "--method", "fast"]).status.code(),
        Some(2)
    );
    assert_eq!(
        ara(&["solve", &inst, "--cutoff-s", "0"]).status.code(),
        Some(2)
    );
}

#[test]
fn cg_on_tsg_is_a_usage_error() {
    let dir = TempDir::new().unwrap();
    let inst = write(&dir, "tsg.json", TSG_TOY);
    let out = ara(&["solve", &inst, "--method", "cg"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn solver_failures_exit_with_three() {
    let dir = TempDir::new().unwrap();
    let inst = write(&dir, "tsg.json", TSG_TOY);
    let out = ara(&[
        "solve",
        &inst,
        "--samples",
        "100000",
        "--cutoff-s",
        "0.000001",
    ]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("cutoff"));
}

#[test]
fn generate_is_deterministic_and_records_its_config() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        &dir,
        "gen.json",
        r#"{"family": "tsg", "seed": 1, "risk_levels": 2, "resource_types": 3, "team_types": 4, "flights": 2}"#,
    );
    let a = ara(&["generate", &cfg, "--seed", "7"]);
    let b = ara(&["generate", &cfg, "--seed", "7"]);
    assert_eq!(json(&a), json(&b));
    let inst = json(&a);
    assert_eq!(inst["generator"]["family"], "tsg");
    assert_eq!(inst["generator"]["seed"], 7);
    assert_eq!(inst["categories"].as_array().unwrap().len(), 4);

    let bad = write(&dir, "bad.json", r#"{"family": "ships"}"#);
    assert_eq!(ara(&["generate", &bad]).status.code(), Some(2));
}

#[test]
fn check_impl_reports_the_verdict() {
    let dir = TempDir::new().unwrap();
    for (text, expected) in [(FAMS_TOY, false), (TSG_TOY, false)] {
        let inst = write(&dir, "inst.json", text);
        let verdict = json(&ara(&["check-impl", &inst]));
        assert_eq!(verdict["bi_hierarchical"], expected);
        assert_eq!(verdict["witness"]["kind"], "odd_cycle");
    }
    let disjoint = write(
        &dir,
        "game.json",
        r#"{"k": 1, "n": 2,
            "constraints": [{"cells": [[0, 0]], "lower": 0, "upper": 1},
                            {"cells": [[0, 1]], "lower": 0, "upper": 1}],
            "targets": [{"id": 0, "cells": [[0, 0]], "weights": [1.0], "u_def": 0, "u_undef": -1}]}"#,
    );
    let verdict = json(&ara(&["check-impl", &disjoint]));
    assert_eq!(verdict["bi_hierarchical"], true);
}

fn bench_config(dir: &TempDir, methods: &str) -> String {
    write(
        dir,
        "bench.json",
        &format!(
            r#"{{"family": "fams", "axis": "flights", "sizes": [4, 6], "repetitions": 2,
                "methods": {methods}, "samples": 50, "seed": 5,
                "fams": {{"seed": 0, "flights": 4, "schedules": 5, "marshals": 2, "targets_per_schedule": 2}}}}"#
        ),
    )
}

fn csv_without_wall_time(path: &Path) -> Vec<String> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|line| {
            let mut fields: Vec<&str> = line.split(',').collect();
            fields.remove(7);
            fields.join(",")
        })
        .collect()
}

#[test]
fn bench_writes_stable_csv() {
    let dir = TempDir::new().unwrap();
    let cfg = bench_config(&dir, r#"["cg", "rand"]"#);
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    assert!(ara(&["bench", &cfg, "--out", a.to_str().unwrap()])
        .status
        .success());
    let out = Command::new(env!("CARGO_BIN_EXE_ara"))
        .args(["bench", &cfg, "--out", b.to_str().unwrap()])
        .env("ARA_THREADS", "1")
        .output()
        .unwrap();
    assert!(out.status.success());
    let rows = csv_without_wall_time(&a);
    assert_eq!(rows, csv_without_wall_time(&b));
    assert_eq!(
        rows[0],
        "family,size,seed,method,value,upper_bound,loss_pct,sample_failures,status"
    );
    // two sizes, each with 2 seeds x 2 methods and 2 mean rows
    assert_eq!(rows.len(), 1 + 12);
    assert!(rows.iter().any(|r| r.contains(",mean,rand,")));
}

#[test]
fn bench_rejects_an_empty_method_list() {
    let dir = TempDir::new().unwrap();
    let cfg = bench_config(&dir, "[]");
    let out = ara(&["bench", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no methods"));
}
