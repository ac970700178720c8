mod common;

use std::path::Path;
use std::process::{Command, Output};

use arcfit::output::{strip_timing, validate_plot, validate_report, validate_result};
use common::{binary, write};
use serde_json::Value;

const CONSTANT: &str = r#"
[problem]
arcs = [[0.0, 1.0]]
degree = 6
bound = 1.0

[data]
source = "synthetic"
case = { kind = "constant", value = [2.0, 0.0] }
density = 201
"#;

const TRACE: &str = r#"
[problem]
arcs = [[0.3, 1.4]]
degree = 4
grid = 12
bound = 1.0

[data]
source = "synthetic"
case = { kind = "polynomial_trace", coefficients = [[0.2, 0.1], [0.3, 0.0], [0.0, -0.2]] }
density = 201
"#;

fn arcfit(dir: &Path, args: &[&str]) -> Output {
    Command::new(binary()).current_dir(dir).args(args).output().unwrap()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn solve(dir: &Path, config: &str, extra: &[&str]) -> (Output, Value) {
    write(dir, "run.toml", config);
    let mut args = vec!["solve", "--config", "run.toml", "--out", "result.json"];
    args.extend_from_slice(extra);
    let out = arcfit(dir, &args);
    let doc = json(&dir.join("result.json"));
    (out, doc)
}

#[test]
fn feasible_trace_has_zero_multipliers() {
    let dir = tempfile::tempdir().unwrap();
    let (out, doc) = solve(dir.path(), TRACE, &[]);
    assert_eq!(out.status.code(), Some(0));
    validate_result(&doc).unwrap();
    assert!(doc["solve"]["multipliers"].as_array().unwrap().iter().all(|l| l.as_f64() == Some(0.0)));
}

#[test]
fn degree_zero_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let (out, doc) = solve(dir.path(), CONSTANT, &["--degree", "0", "--grid", "8"]);
    assert_eq!(out.status.code(), Some(0));
    let c = &doc["solve"]["coefficients"][0];
    assert!((c[0].as_f64().unwrap() - 1.0).abs() < 1e-8);
    assert!(c[1].as_f64().unwrap().abs() < 1e-8);
    assert_eq!(doc["certificate"]["verdict"], "certified");

    let cert = arcfit(dir.path(), &["certify", "result.json", "--config", "run.toml", "--out", "cert.json"]);
    assert_eq!(cert.status.code(), Some(0));
    assert_eq!(json(&dir.path().join("cert.json"))["verdict"], "certified");
}

#[test]
fn flags_override_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let (_, doc) = solve(dir.path(), CONSTANT, &["--degree", "3", "--bound", "0.5", "--tol", "1e-9"]);
    assert_eq!(doc["problem"]["degree"], 3);
    assert_eq!(doc["problem"]["grid"], 6);
    assert_eq!(doc["problem"]["bounds"][0], 0.5);
    assert_eq!(doc["problem"]["tol"], 1e-9);
    assert_eq!(doc["solve"]["coefficients"].as_array().unwrap().len(), 4);
}

#[test]
fn certify_stored_and_tampered_results() {
    let dir = tempfile::tempdir().unwrap();
    let (_, doc) = solve(dir.path(), CONSTANT, &[]);
    let stored = doc["certificate"]["verdict"].clone();
    assert_ne!(stored, "failed");
    let out = arcfit(dir.path(), &["certify", "result.json", "--config", "run.toml", "--out", "cert.json"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&dir.path().join("cert.json"))["verdict"], stored);

    let mut tampered = doc.clone();
    let c0 = tampered["solve"]["coefficients"][0][0].as_f64().unwrap();
    tampered["solve"]["coefficients"][0][0] = Value::from(c0 + 0.05);
    std::fs::write(dir.path().join("tampered.json"), tampered.to_string()).unwrap();
    let out = arcfit(dir.path(), &["certify", "tampered.json", "--config", "run.toml", "--out", "cert.json"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(json(&dir.path().join("cert.json"))["verdict"], "failed");
}

#[test]
fn input_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let (_, doc) = solve(dir.path(), CONSTANT, &[]);

    let mut wrong = doc.clone();
    wrong["schema"] = Value::from("arcfit/result-v9");
    std::fs::write(dir.path().join("wrong.json"), wrong.to_string()).unwrap();
    let out = arcfit(dir.path(), &["certify", "wrong.json", "--config", "run.toml"]);
    assert_eq!(out.status.code(), Some(1));

    std::fs::write(dir.path().join("junk.json"), "{ not json").unwrap();
    assert_eq!(arcfit(dir.path(), &["certify", "junk.json", "--config", "run.toml"]).status.code(), Some(1));

    write(dir.path(), "other.toml", &CONSTANT.replace("[2.0, 0.0]", "[2.0, 0.1]"));
    let out = arcfit(dir.path(), &["certify", "result.json", "--config", "other.toml"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("digest"));

    assert_eq!(arcfit(dir.path(), &["solve"]).status.code(), Some(1));
    assert_eq!(arcfit(dir.path(), &["solve", "--config", "missing.toml"]).status.code(), Some(1));
    write(dir.path(), "bad.toml", &CONSTANT.replace("bound = 1.0", "bound = 0.0"));
    assert_eq!(arcfit(dir.path(), &["solve", "--config", "bad.toml"]).status.code(), Some(1));
    write(
        dir.path(),
        "file.toml",
        &CONSTANT
            .replace("source = \"synthetic\"", "source = \"file\"\npath = \"none.csv\"")
            .replace("case = { kind = \"constant\", value = [2.0, 0.0] }\ndensity = 201", ""),
    );
    assert_eq!(arcfit(dir.path(), &["solve", "--config", "file.toml"]).status.code(), Some(1));
    assert_eq!(arcfit(dir.path(), &["sweep", "--config", "run.toml"]).status.code(), Some(1));
    assert_eq!(arcfit(dir.path(), &["validate", "wrong.json"]).status.code(), Some(1));
}

#[test]
fn unconverged_solve_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let (out, doc) = solve(dir.path(), &format!("{CONSTANT}\n[solver]\nmax_iter = 1\n"), &["--degree", "12"]);
    assert_eq!(doc["solve"]["status"], "max_iter");
    assert_eq!(doc["certificate"]["verdict"], "failed");
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn emit_plot_bundle() {
    let dir = tempfile::tempdir().unwrap();
    let config = r#"
[problem]
arcs = [[0.7, 1.3]]
degree = 20
bound = 0.96

[data]
source = "synthetic"
case = { kind = "filterlike" }
density = 81
"#;
    solve(dir.path(), config, &[]);
    let out = arcfit(dir.path(), &["emit-plot", "result.json", "--config", "run.toml", "--out", "plot.json"]);
    assert_eq!(out.status.code(), Some(0));
    let plot = validate_plot(&json(&dir.path().join("plot.json"))).unwrap();
    assert_eq!(plot.overlay.theta.len(), 81);
    assert_eq!(plot.bounds, vec![0.96]);
    let doc = validate_result(&json(&dir.path().join("result.json"))).unwrap();
    let c = &doc.solve.coefficients;
    for (t, v) in plot.theta.iter().zip(&plot.modulus).step_by(97) {
        let g: num_complex::Complex64 =
            c.iter().enumerate().map(|(j, cj)| cj * num_complex::Complex64::cis(j as f64 * t)).sum();
        assert!((g.norm() - v).abs() < 1e-12);
    }
}

#[test]
fn sweep_writes_json_and_csv() {
    let dir = tempfile::tempdir().unwrap();
    let config = format!("{CONSTANT}\n[sweep]\nover = \"degree\"\ndegrees = [2, 4, 8]\n\n[output]\nreport = \"rep\"\n");
    write(dir.path(), "run.toml", &config);
    let out = arcfit(dir.path(), &["sweep", "--config", "run.toml", "--jobs", "3"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report = validate_report(&json(&dir.path().join("rep.json"))).unwrap();
    assert_eq!(report.cells.len(), 3);
    let csv = std::fs::read_to_string(dir.path().join("rep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
    assert!(csv.lines().next().unwrap().ends_with("runtime_s"));
}

#[test]
fn repeated_runs_are_identical_modulo_timing() {
    let dir = tempfile::tempdir().unwrap();
    let (_, a) = solve(dir.path(), CONSTANT, &["--degree", "16"]);
    let (_, b) = solve(dir.path(), CONSTANT, &["--degree", "16"]);
    let (a, b) = (strip_timing(a), strip_timing(b));
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());

    let config = format!("{CONSTANT}\n[sweep]\nover = \"grid\"\ngrids = [8, 16, 32]\n");
    write(dir.path(), "sweep.toml", &config);
    arcfit(dir.path(), &["sweep", "--config", "sweep.toml", "--jobs", "1", "--out", "one"]);
    arcfit(dir.path(), &["sweep", "--config", "sweep.toml", "--jobs", "3", "--out", "three"]);
    let one = strip_timing(json(&dir.path().join("one.json")));
    let three = strip_timing(json(&dir.path().join("three.json")));
    assert_eq!(one, three);
}
