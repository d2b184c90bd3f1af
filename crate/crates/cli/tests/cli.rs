use std::path::Path;
use std::process::{Command, Output};

const REST: &str = r#"
modes = 4
t_final = 0.05
dt = 0.01
grid = { dim = 2, radius = 1.0, cells = 4 }
potential = { law = "power-b", p = 2.5, delta = 1.0, mu = 1.0 }
"#;

fn slipflow(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_slipflow")).args(args).output().expect("binary runs")
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn unknown_subcommand_fails() {
    let out = slipflow(&["bogus"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
}

#[test]
fn malformed_config_prints_usage() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "modes = \"many\"\n").unwrap();
    let out = slipflow(&["simulate", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
    assert_eq!(json(&dir.path().join("simulate.json"))["passed"], false);
}

#[test]
fn rest_config_gives_zero_ledger() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("rest.toml");
    std::fs::write(&cfg, REST).unwrap();
    let out = slipflow(&["--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap(), "simulate"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(json(&dir.path().join("simulate.json"))["passed"], true);
    let ledger = std::fs::read_to_string(dir.path().join("simulate_ledger.csv")).unwrap();
    let rows: Vec<&str> = ledger.lines().skip(1).collect();
    assert_eq!(rows.len(), 6);
    for row in rows {
        let cols: Vec<f64> = row.split(',').map(|s| s.parse().unwrap()).collect();
        assert!(cols[2..].iter().all(|v| *v == 0.0), "{row}");
    }
    assert!(dir.path().join("simulate_final.csv").exists());
}

#[test]
fn verify_emits_json_and_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = slipflow(&[
        "verify",
        "--law",
        "power-a",
        "--p",
        "1.9",
        "--samples",
        "500",
        "--seed",
        "7",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let report = json(&dir.path().join("verify.json"));
    assert_eq!(report["passed"], true);
    assert_eq!(report["seeds"][0], 7);
    assert!(!report["checks"].as_array().unwrap().is_empty());
    assert!(dir.path().join("verify_checks.csv").exists());
}

#[test]
fn json_params_are_accepted() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("u.json");
    std::fs::write(&cfg, r#"{ "grid": { "dim": 2, "radius": 1.0, "cells": 4 }, "exponents": [2.5], "modes": 6 }"#)
        .unwrap();
    let out = slipflow(&["uniqueness", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    assert!(dir.path().join("uniqueness_errors.csv").exists());
}
