use std::f64::consts::PI;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spotrank")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn simulate(dir: &Path) {
    ok(&[
        "simulate", "--scenario", "h0", "--n", "3000", "--d", "3", "--eta", "0.001", "--seed", "4", "--out",
        dir.to_str().unwrap(),
    ]);
}

fn error_json(out: &Output) -> Value {
    let text = String::from_utf8_lossy(&out.stderr);
    let line = text.lines().rev().find(|l| l.trim_start().starts_with('{')).expect("json error on stderr");
    serde_json::from_str(line).unwrap()
}

#[test]
fn report_is_self_describing() {
    let tmp = tempfile::tempdir().unwrap();
    let grid = tmp.path().join("grid");
    simulate(&grid);
    let report = tmp.path().join("report.json");
    ok(&[
        "test", "--input", grid.to_str().unwrap(), "--variant", "sim", "--alpha", "0.05", "--r", "1",
        "--block-seconds", "100", "--grid-seconds", "1", "--report", report.to_str().unwrap(),
    ]);
    let v: Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    let cfg = &v["config"];
    assert_eq!(cfg["alpha"], 0.05);
    assert_eq!(cfg["n"], 3000);
    assert_eq!(cfg["d"], 3);
    let (n, eta) = (cfg["n"].as_f64().unwrap(), cfg["eta"].as_f64().unwrap());
    let blocks = v["blocks"].as_array().unwrap();
    assert_eq!(blocks.len(), 30);
    for b in blocks {
        let h = b["h"].as_f64().unwrap();
        let eps = b["eps"].as_f64().unwrap();
        assert!((eps - PI * eta / (h * n.sqrt())).abs() <= 1e-15 * eps.max(1.0));
        assert_eq!(b["reject"].as_bool().unwrap(), b["statistic"].as_f64().unwrap() > b["kappa"].as_f64().unwrap());
    }
    assert!(report.with_extension("csv").exists());
}

#[test]
fn auto_block_selects_a_length() {
    let tmp = tempfile::tempdir().unwrap();
    let grid = tmp.path().join("grid");
    simulate(&grid);
    let out = ok(&["test", "--input", grid.to_str().unwrap(), "--auto-block"]);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["config"]["auto_block"], true);
    assert!(!v["blocks"].as_array().unwrap().is_empty());
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("nope");
    let out = run(&["test", "--input", missing.to_str().unwrap(), "--block-seconds", "100"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_json(&out)["exit_code"], 2);

    let grid = tmp.path().join("grid");
    simulate(&grid);
    let out = run(&["test", "--input", grid.to_str().unwrap(), "--r", "5", "--block-seconds", "100"]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(error_json(&out)["exit_code"], 3);

    assert_eq!(run(&["test", "--bogus"]).status.code(), Some(2));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn ingest_is_idempotent() {
    let tmp = tempfile::tempdir().unwrap();
    // 2024-01-02 09:00 UTC
    let t0: i64 = 1_704_186_000_000;
    let mut body = String::from("timestamp_ms,symbol,bid,ask\n");
    for k in 0..400 {
        let t = t0 + k * 700;
        body.push_str(&format!("{t},AAA,{:.4},{:.4}\n", 10.0 + (k % 7) as f64 * 0.01, 10.02 + (k % 7) as f64 * 0.01));
        body.push_str(&format!("{},BBB,{:.4},{:.4}\n", t + 300, 20.0 - (k % 5) as f64 * 0.01, 20.01));
    }
    fs::write(tmp.path().join("ticks.csv"), body).unwrap();
    let pattern = tmp.path().join("*.csv");
    let snapshot = |out: &Path| {
        ok(&[
            "ingest", "--files", pattern.to_str().unwrap(), "--session", "09:00-09:04", "--grid-seconds", "1",
            "--out", out.to_str().unwrap(),
        ]);
        (fs::read(out.join("grid.csv")).unwrap(), fs::read(out.join("meta.json")).unwrap())
    };
    let a = snapshot(&tmp.path().join("a"));
    let b = snapshot(&tmp.path().join("b"));
    assert_eq!(a, b);
    let g = spotrank::io::read_grid(&tmp.path().join("a")).unwrap();
    assert_eq!((g.n(), g.d()), (240, 2));
    let again = tmp.path().join("c");
    spotrank::io::write_grid(&g, &again).unwrap();
    assert_eq!(fs::read(again.join("grid.csv")).unwrap(), a.0);
}
