//! End-to-end tests of the command-line interface: file outputs, exit
//! codes, and byte-level reproducibility.

use std::path::Path;
use std::process::{Command, Output};

fn rgee(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rgee"))
        .args(args)
        .args(["--out", out.to_str().unwrap()])
        .output()
        .expect("binary runs")
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap_or_else(|_| panic!("missing {name}"))
}

#[test]
fn simulate_writes_files_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = rgee(
        &["simulate", "--model", "sim2", "--n", "200", "--seed", "7"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["graph.edges", "latent.labels", "observed.labels", "manifest.json"] {
        assert!(dir.path().join(f).exists(), "missing {f}");
    }
    let manifest: serde_json::Value = serde_json::from_str(&read(dir.path(), "manifest.json")).unwrap();
    assert_eq!(manifest["spec"]["seed"], 7);
    assert_eq!(manifest["command"], "simulate");
}

#[test]
fn simulate_is_byte_reproducible() {
    let d1 = tempfile::tempdir().unwrap();
    let d2 = tempfile::tempdir().unwrap();
    for d in [&d1, &d2] {
        let out = rgee(
            &["simulate", "--model", "sim1", "--n", "150", "--seed", "99"],
            d.path(),
        );
        assert!(out.status.success());
    }
    for f in ["graph.edges", "latent.labels", "observed.labels", "manifest.json"] {
        assert_eq!(read(d1.path(), f), read(d2.path(), f), "{f} differs");
    }
}

#[test]
fn simulate_sim3_observed_labels_span_three_classes() {
    let dir = tempfile::tempdir().unwrap();
    let out = rgee(
        &["simulate", "--model", "sim3", "--n", "300", "--seed", "1"],
        dir.path(),
    );
    assert!(out.status.success());
    let labels: Vec<u32> = read(dir.path(), "observed.labels")
        .lines()
        .map(|l| l.parse().unwrap())
        .collect();
    assert_eq!(labels.len(), 300);
    assert!(labels.iter().all(|&y| (1..=3).contains(&y)));
    for c in 1..=3 {
        assert!(labels.contains(&c), "class {c} missing");
    }
}

#[test]
fn unknown_model_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = rgee(
        &["simulate", "--model", "sim7", "--n", "10"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("usage") || err.contains("sim7"));
}

#[test]
fn missing_file_is_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = rgee(
        &["refine", "--graph", "/no/such/file", "--labels", "/no/such/labels"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn refine_defaults_echoed_in_metadata() {
    let sim = tempfile::tempdir().unwrap();
    assert!(rgee(
        &["simulate", "--model", "sim2", "--n", "200", "--seed", "5"],
        sim.path()
    )
    .status
    .success());
    let dir = tempfile::tempdir().unwrap();
    let graph = sim.path().join("graph.edges");
    let labels = sim.path().join("observed.labels");
    let out = rgee(
        &[
            "refine",
            "--graph",
            graph.to_str().unwrap(),
            "--labels",
            labels.to_str().unwrap(),
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let meta: serde_json::Value = serde_json::from_str(&read(dir.path(), "metadata.json")).unwrap();
    assert_eq!(meta["config"]["gamma_y"], 5);
    assert_eq!(meta["config"]["gamma_k"], 5);
    assert_eq!(meta["config"]["epsilon"], 0.3);
    assert_eq!(meta["config"]["epsilon_n"], 5);
    assert!(dir.path().join("embedding.csv").exists());
    assert!(dir.path().join("embedding_blocks.json").exists());
    assert!(dir.path().join("label_history.csv").exists());
}

#[test]
fn refine_zero_caps_gives_single_pass() {
    let sim = tempfile::tempdir().unwrap();
    assert!(rgee(
        &["simulate", "--model", "sim1", "--n", "200", "--seed", "5"],
        sim.path()
    )
    .status
    .success());
    let dir = tempfile::tempdir().unwrap();
    let out = rgee(
        &[
            "refine",
            "--graph",
            sim.path().join("graph.edges").to_str().unwrap(),
            "--labels",
            sim.path().join("observed.labels").to_str().unwrap(),
            "--gamma-y",
            "0",
            "--gamma-k",
            "0",
        ],
        dir.path(),
    );
    assert!(out.status.success());
    let meta: serde_json::Value = serde_json::from_str(&read(dir.path(), "metadata.json")).unwrap();
    assert_eq!(meta["passes"], 1);
    // single pass over two observed classes: two embedding columns
    let first_line = read(dir.path(), "embedding.csv");
    assert_eq!(first_line.lines().next().unwrap().split(',').count(), 2);
}

#[test]
fn cv_report_is_reproducible() {
    let d1 = tempfile::tempdir().unwrap();
    let d2 = tempfile::tempdir().unwrap();
    for d in [&d1, &d2] {
        let out = rgee(
            &[
                "cv", "--model", "sim2", "--n", "200", "--seed", "11", "--method", "gee",
                "--folds", "4", "--replicates", "2",
            ],
            d.path(),
        );
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    assert_eq!(read(d1.path(), "cv_report.csv"), read(d2.path(), "cv_report.csv"));
}

#[test]
fn cv_json_format() {
    let dir = tempfile::tempdir().unwrap();
    let out = rgee(
        &[
            "cv", "--model", "sim1", "--n", "200", "--seed", "2", "--method", "rgee",
            "--folds", "4", "--replicates", "1", "--format", "json",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_str(&read(dir.path(), "cv_report.json")).unwrap();
    assert_eq!(report["method"], "rgee");
    assert_eq!(report["per_fold_errors"][0].as_array().unwrap().len(), 4);
}

#[test]
fn recover_without_discoveries_reports_undefined_and_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    // a separable model refines nothing, so precision is undefined
    let out = rgee(
        &[
            "recover", "--model", "sim1", "--n", "300", "--seed", "4", "--format", "csv",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = read(dir.path(), "recovery.csv");
    if csv.contains("precision,undefined") {
        assert!(csv.contains("discovered,0"));
    }
    let manifest: serde_json::Value = serde_json::from_str(&read(dir.path(), "manifest.json")).unwrap();
    assert_eq!(manifest["command"], "recover");
}

#[test]
fn bench_writes_csv_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out = rgee(
        &[
            "bench", "--model", "sim3", "--n", "100,200", "--seed", "3", "--runs", "1",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = read(dir.path(), "bench.csv");
    assert!(csv.starts_with("n,edges,gee_seconds,rgee_seconds"));
    assert_eq!(csv.lines().count(), 3);
}

#[test]
fn roundtrip_simulate_then_cv_on_files() {
    let sim = tempfile::tempdir().unwrap();
    assert!(rgee(
        &["simulate", "--model", "sim2", "--n", "250", "--seed", "21"],
        sim.path()
    )
    .status
    .success());
    let dir = tempfile::tempdir().unwrap();
    let out = rgee(
        &[
            "cv",
            "--graph",
            sim.path().join("graph.edges").to_str().unwrap(),
            "--labels",
            sim.path().join("observed.labels").to_str().unwrap(),
            "--latent",
            sim.path().join("latent.labels").to_str().unwrap(),
            "--method",
            "gee0",
            "--folds",
            "5",
            "--replicates",
            "2",
            "--seed",
            "9",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(read(dir.path(), "cv_report.csv").contains("# method=gee0"));
}
