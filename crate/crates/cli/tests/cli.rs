//! End-to-end binary tests: fixture values, exit codes, diagnostic
//! documents, and byte-level determinism of repeated runs.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn binary() -> Command {
    Command::new(env!("CARGO_BIN_EXE_representer"))
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("representer-cli-{}-{name}", std::process::id()));
    fs::create_dir_all(&dir).expect("scratch dir creates");
    dir
}

fn write(path: &Path, text: &str) {
    fs::write(path, text).expect("fixture writes");
}

fn run(args: &[&str]) -> Output {
    binary().args(args).output().expect("binary runs")
}

fn json_stdout(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).expect("stdout is a JSON document")
}

#[test]
fn identity_ridge_fixture_halves_the_data() {
    let dir = scratch("tikhonov");
    let config = dir.join("run.toml");
    write(
        &config,
        "[tikhonov]\noperator = [[1.0, 0.0], [0.0, 1.0]]\ndata = [1.0, 0.0]\nlambda = 1.0\n",
    );
    let out = run(&["tikhonov", "--config", config.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let doc = json_stdout(&out);
    let a = doc["result"]["coefficients"].as_array().unwrap();
    assert!((a[0].as_f64().unwrap() - 0.5).abs() <= 1e-12);
    assert!(a[1].as_f64().unwrap().abs() <= 1e-12);
    assert_eq!(doc["status"], "ok");
    assert_eq!(doc["config"]["tikhonov"]["lambda"], 1.0);
}

#[test]
fn csv_inputs_resolve_relative_to_the_config() {
    let dir = scratch("csv");
    write(&dir.join("h.csv"), "left,right\n1.0,0.0\n0.0,1.0\n");
    write(&dir.join("y.csv"), "1.0\n0.0\n");
    let config = dir.join("run.toml");
    write(
        &config,
        "[tikhonov]\noperator = \"h.csv\"\ndata = \"y.csv\"\nlambda = 1.0\n",
    );
    let out = run(&["tikhonov", "--config", config.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let doc = json_stdout(&out);
    let a = doc["result"]["coefficients"].as_array().unwrap();
    assert!((a[0].as_f64().unwrap() - 0.5).abs() <= 1e-12);
}

#[test]
fn sparse_fixture_keeps_the_stronger_column() {
    let dir = scratch("lp");
    let config = dir.join("run.toml");
    write(
        &config,
        "[lp-solve]\noperator = [[1.0, 2.0]]\ndata = [2.0]\nlambda = 1.0\np = 1.0\nprune = true\n",
    );
    let out = run(&["lp-solve", "--config", config.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let doc = json_stdout(&out);
    let support = doc["result"]["support"].as_array().unwrap();
    assert_eq!(support.len(), 1);
    assert_eq!(support[0], 1);
    let s = doc["result"]["coefficients"].as_array().unwrap();
    assert!(s[0].as_f64().unwrap().abs() <= 1e-9);
    assert!((s[1].as_f64().unwrap() - 0.875).abs() <= 1e-9);
    let certificate = doc["result"]["certificate"].as_array().unwrap();
    assert!((certificate[0].as_f64().unwrap() - 0.5).abs() <= 1e-6);
    assert_eq!(doc["result"]["pruned"]["support"].as_array().unwrap().len(), 1);
}

#[test]
fn conjugate_reports_a_verified_pair() {
    let dir = scratch("conjugate");
    let config = dir.join("run.toml");
    write(&config, "[conjugate]\ninput = [3.0, -4.0]\np = 1.5\n");
    let out = run(&["conjugate", "--config", config.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let doc = json_stdout(&out);
    assert_eq!(doc["result"]["passed"], true);
    let primal_norm = doc["result"]["primal_norm"].as_f64().unwrap();
    let dual_norm = doc["result"]["dual_norm"].as_f64().unwrap();
    assert!((primal_norm - dual_norm).abs() <= 1e-10 * primal_norm);
    assert_eq!(doc["result"]["q"], 3.0);
}

#[test]
fn missing_config_is_a_validation_failure() {
    let out = run(&["tikhonov"]);
    assert_eq!(out.status.code(), Some(2));
    let doc = json_stdout(&out);
    assert_eq!(doc["status"], "error");
    assert_eq!(doc["error"]["kind"], "validation");
    assert_eq!(doc["error"]["field"], "--config");
}

#[test]
fn malformed_config_names_the_file() {
    let dir = scratch("malformed");
    let config = dir.join("run.toml");
    write(&config, "[tikhonov]\nlambda = \"much\"\n");
    let out = run(&["tikhonov", "--config", config.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let doc = json_stdout(&out);
    assert_eq!(doc["error"]["kind"], "validation");
    assert_eq!(doc["error"]["path"], config.to_str().unwrap());
    assert!(doc["error"]["message"].as_str().unwrap().contains("lambda"));
}

#[test]
fn inadmissible_decay_rate_is_rejected() {
    let dir = scratch("gtvbad");
    let config = dir.join("run.toml");
    write(
        &config,
        concat!(
            "[gtv-fit]\n",
            "operator = { family = \"super-exponential\", alpha = 2.0 }\n",
            "lambda = 0.1\n",
            "[gtv-fit.synthetic]\n",
            "count = 4\n",
            "span = [0.0, 1.0]\n",
            "translates = [[0.5, 1.0]]\n",
        ),
    );
    let out = run(&["gtv-fit", "--config", config.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let doc = json_stdout(&out);
    assert_eq!(doc["error"]["kind"], "validation");
    assert!(doc["error"]["message"].as_str().unwrap().contains("alpha"));
}

#[test]
fn unknown_selftest_criterion_is_rejected() {
    let out = run(&["selftest", "--criterion", "9"]);
    assert_eq!(out.status.code(), Some(2));
    let doc = json_stdout(&out);
    assert_eq!(doc["error"]["kind"], "validation");
    assert_eq!(doc["error"]["field"], "selftest.criteria");
}

#[test]
fn spike_recovery_round_trips_synthetic_truth() {
    let dir = scratch("spikes");
    let config = dir.join("run.toml");
    write(
        &config,
        concat!(
            "[spikes]\n",
            "atoms = { family = \"fourier\", max-frequency = 4 }\n",
            "lambda-relative = 1e-3\n",
            "cells = 512\n",
            "refine-steps = 2000\n",
            "[spikes.synthetic]\n",
            "count = 3\n",
            "min-separation = 0.15\n",
        ),
    );
    let out = run(&["spikes", "--config", config.to_str().unwrap(), "--seed", "7"]);
    assert_eq!(out.status.code(), Some(0));
    let doc = json_stdout(&out);
    let result = &doc["result"];
    let positions = result["positions"].as_array().unwrap();
    let truth = result["truth"]["positions"].as_array().unwrap();
    assert_eq!(positions.len(), truth.len());
    for x in positions {
        let x = x.as_array().unwrap()[0].as_f64().unwrap();
        let nearest = truth
            .iter()
            .map(|t| (t.as_array().unwrap()[0].as_f64().unwrap() - x).abs())
            .fold(f64::INFINITY, f64::min);
        assert!(nearest <= 1e-3, "recovered position {x} is {nearest} from the truth");
    }
    let peak = result["certificate_peak"].as_f64().unwrap();
    let lambda = result["lambda"].as_f64().unwrap();
    assert!(peak <= lambda * (1.0 + 1e-5));
}

#[test]
fn every_selftest_scenario_is_byte_deterministic() {
    let dir = scratch("determinism");
    for criterion in 1..=8 {
        let index = criterion.to_string();
        let first = dir.join(format!("first-{criterion}.json"));
        let second = dir.join(format!("second-{criterion}.json"));
        for path in [&first, &second] {
            let out = run(&[
                "selftest",
                "--criterion",
                &index,
                "--seed",
                "11",
                "--output",
                path.to_str().unwrap(),
            ]);
            assert_eq!(out.status.code(), Some(0), "criterion {criterion} failed");
        }
        let a = fs::read(&first).expect("first document");
        let b = fs::read(&second).expect("second document");
        assert!(!a.is_empty());
        assert_eq!(a, b, "criterion {criterion} documents differ between runs");
    }
}

#[test]
fn full_selftest_prints_one_line_per_criterion() {
    let dir = scratch("fullselftest");
    let output = dir.join("selftest.json");
    let out = run(&["selftest", "--output", output.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let lines: Vec<&str> = std::str::from_utf8(&out.stdout)
        .unwrap()
        .lines()
        .filter(|l| l.starts_with("criterion "))
        .collect();
    assert_eq!(lines.len(), 8);
    for (i, line) in lines.iter().enumerate() {
        assert!(line.contains("PASS"), "criterion {} line reads: {line}", i + 1);
    }
    let doc: serde_json::Value =
        serde_json::from_slice(&fs::read(&output).unwrap()).expect("document parses");
    assert_eq!(doc["result"]["all_passed"], true);
    assert_eq!(doc["result"]["criteria"].as_array().unwrap().len(), 8);
}
