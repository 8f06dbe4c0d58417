use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mgltree"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn leaf(cat: &str, n: usize, rule: Value) -> Value {
    json!({"categories": [cat], "n": n, "rule": rule})
}

/// Writes a synthetic CSV through the `synth` subcommand and returns a
/// config pointing at it.
fn fixture(dir: &Path, leaves: Vec<Value>, noise: f64, extra: Value) -> PathBuf {
    let spec = json!({"attributes": ["g"], "dim": 2, "noise": noise, "leaves": leaves});
    let spec_path = dir.join("spec.json");
    fs::write(&spec_path, spec.to_string()).unwrap();
    let csv = dir.join("data.csv");
    let out = run(&["synth", "--spec", spec_path.to_str().unwrap(), "--seed", "1", "--out", csv.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let schema: Value = serde_json::from_str(&fs::read_to_string(dir.join("data.schema.json")).unwrap()).unwrap();
    let mut cfg = json!({
        "data": "data.csv",
        "schema": schema,
        "hierarchy": {"attribute_order": ["g"]},
        "learners": [{"kind": "constant"}],
        "epsilon": {"kind": "constant", "value": 0.0},
    });
    for (k, v) in extra.as_object().unwrap() {
        cfg[k] = v.clone();
    }
    let path = dir.join("config.json");
    fs::write(&path, serde_json::to_string_pretty(&cfg).unwrap()).unwrap();
    path
}

fn two_leaf(dir: &Path, extra: Value) -> PathBuf {
    fixture(
        dir,
        vec![
            leaf("A", 3, json!({"kind": "constant", "label": 1})),
            leaf("B", 1, json!({"kind": "constant", "label": 0})),
        ],
        0.0,
        extra,
    )
}

fn planted(dir: &Path, extra: Value) -> PathBuf {
    fixture(
        dir,
        vec![
            leaf("A", 400, json!({"kind": "linear", "weights": [1.0, 0.0], "bias": 0.0})),
            leaf("B", 100, json!({"kind": "linear", "weights": [-1.0, 0.0], "bias": 0.0})),
        ],
        0.05,
        extra,
    )
}

fn decisions(model: &Path) -> Vec<(String, String)> {
    let v: Value = serde_json::from_str(&fs::read_to_string(model).unwrap()).unwrap();
    v["nodes"]
        .as_array()
        .unwrap()
        .iter()
        .map(|n| (n["id"].as_str().unwrap().to_string(), n["decision"].as_str().unwrap().to_string()))
        .collect()
}

#[test]
fn validate_hierarchy_exit_codes() {
    let dir = TempDir::new().unwrap();
    let cfg = two_leaf(dir.path(), json!({}));
    let out = run(&["validate-hierarchy", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).starts_with("VALID"));

    let crossing = json!({"nodes": [
        {"id": "ALL"},
        {"id": "first", "rows": [0, 1]},
        {"id": "second", "rows": [1, 2]}
    ]});
    let out = run(&[
        "validate-hierarchy",
        "--config",
        cfg.to_str().unwrap(),
        "--set",
        &format!("hierarchy={crossing}"),
    ]);
    assert_eq!(code(&out), 1);
    let text = stdout(&out);
    assert!(text.starts_with("INVALID") && text.contains("first") && text.contains("second"), "{text}");

    let bad = dir.path().join("bad.json");
    fs::write(&bad, "{ not json").unwrap();
    assert_eq!(code(&run(&["validate-hierarchy", "--config", bad.to_str().unwrap()])), 2);
    let missing = dir.path().join("nope.json");
    assert_eq!(code(&run(&["validate-hierarchy", "--config", missing.to_str().unwrap()])), 2);
}

#[test]
fn train_marks_decisions_and_is_idempotent() {
    let dir = TempDir::new().unwrap();
    let cfg = two_leaf(dir.path(), json!({"methods": ["erm", "group_erm", "prepend", "mgl_tree", "decoupled"]}));
    let out_dir = dir.path().join("zero");
    let out = run(&["train", "--config", cfg.to_str().unwrap(), "--out", out_dir.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let model = out_dir.join("mgl_tree-constant.json");
    let d = decisions(&model);
    assert_eq!(d[0], ("ALL".into(), "root".into()));
    assert!(d[1..].iter().all(|(_, dec)| dec == "updated"), "{d:?}");
    for f in ["erm", "group_erm", "prepend", "decoupled"] {
        assert!(out_dir.join(format!("{f}-constant.json")).exists());
    }
    let trace = fs::read_to_string(out_dir.join("mgl_tree-constant.trace.jsonl")).unwrap();
    assert_eq!(trace.lines().count(), 3);
    assert!(stdout(&out).contains("learner,group_id,depth,n_g"));

    let before: Vec<Vec<u8>> = ["mgl_tree-constant.json", "prepend-constant.json", "training_risks.csv"]
        .iter()
        .map(|f| fs::read(out_dir.join(f)).unwrap())
        .collect();
    assert_eq!(code(&run(&["train", "--config", cfg.to_str().unwrap(), "--out", out_dir.to_str().unwrap()])), 0);
    let after: Vec<Vec<u8>> = ["mgl_tree-constant.json", "prepend-constant.json", "training_risks.csv"]
        .iter()
        .map(|f| fs::read(out_dir.join(f)).unwrap())
        .collect();
    assert_eq!(before, after);

    let inf_dir = dir.path().join("inf");
    let out = run(&[
        "train",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        inf_dir.to_str().unwrap(),
        "--set",
        "epsilon.value=\"inf\"",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let d = decisions(&inf_dir.join("mgl_tree-constant.json"));
    assert!(d[1..].iter().all(|(_, dec)| dec == "inherited"), "{d:?}");
}

#[test]
fn train_on_empty_dataset_fails() {
    let dir = TempDir::new().unwrap();
    let cfg = two_leaf(dir.path(), json!({}));
    fs::write(dir.path().join("empty.csv"), "g,x0,x1,y\n").unwrap();
    let out = run(&["train", "--config", cfg.to_str().unwrap(), "--set", "data=empty.csv"]);
    assert_eq!(code(&out), 1);
}

#[test]
fn unknown_config_keys_are_rejected() {
    let dir = TempDir::new().unwrap();
    let cfg = two_leaf(dir.path(), json!({}));
    let out = run(&["train", "--config", cfg.to_str().unwrap(), "--set", "colour=blue"]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("colour"));
}

#[test]
fn evaluate_writes_reports() {
    let dir = TempDir::new().unwrap();
    let cfg = planted(
        dir.path(),
        json!({"learners": [{"kind": "logistic"}], "epsilon": {"kind": "scaled", "c": 0.1}}),
    );
    let out_dir = dir.path().join("eval");
    let out = run(&["evaluate", "--config", cfg.to_str().unwrap(), "--out", out_dir.to_str().unwrap(), "--jobs", "2"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(out_dir.join("report.csv")).unwrap();
    let rows: Vec<Vec<&str>> = csv.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 4 * 3);
    assert!(rows.iter().all(|r| r.len() == 8 && r[7] == "10"));
    assert!(out_dir.join("report.json").exists());
    assert!(out_dir.join("compare_mgl_tree_erm.csv").exists());

    let worst = |method: &str| {
        rows.iter()
            .filter(|r| r[0] == method)
            .map(|r| r[4].parse::<f64>().unwrap())
            .fold(0.0, f64::max)
    };
    assert!(worst("mgl_tree") <= worst("erm"));

    let seq_dir = dir.path().join("seq");
    let out = run(&["evaluate", "--config", cfg.to_str().unwrap(), "--out", seq_dir.to_str().unwrap(), "--jobs", "1"]);
    assert_eq!(code(&out), 0);
    assert_eq!(fs::read(out_dir.join("report.csv")).unwrap(), fs::read(seq_dir.join("report.csv")).unwrap());
    assert_eq!(fs::read(out_dir.join("report.json")).unwrap(), fs::read(seq_dir.join("report.json")).unwrap());
}

#[test]
fn evaluate_missing_dataset() {
    let dir = TempDir::new().unwrap();
    let cfg = two_leaf(dir.path(), json!({}));
    let out = run(&["evaluate", "--config", cfg.to_str().unwrap(), "--set", "data=absent.csv"]);
    assert_eq!(code(&out), 1);
}

#[test]
fn audit_exit_codes() {
    let dir = TempDir::new().unwrap();
    let cfg = planted(dir.path(), json!({"learners": [{"kind": "tree", "max_depth": 2}], "methods": ["mgl_tree"]}));
    let out_dir = dir.path().join("out");
    assert_eq!(code(&run(&["train", "--config", cfg.to_str().unwrap(), "--out", out_dir.to_str().unwrap()])), 0);
    let model = out_dir.join("mgl_tree-tree2.json");
    let out = run(&["audit", "--config", cfg.to_str().unwrap(), "--model", model.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", stdout(&out));
    assert!(stdout(&out).starts_with("CLEAN"));

    // Swap two nodes' predictors.
    let mut v: Value = serde_json::from_str(&fs::read_to_string(&model).unwrap()).unwrap();
    let hs = v["hypotheses"].as_array_mut().unwrap();
    hs.swap(1, 2);
    let corrupted = dir.path().join("corrupted.json");
    fs::write(&corrupted, v.to_string()).unwrap();
    let out = run(&["audit", "--config", cfg.to_str().unwrap(), "--model", corrupted.to_str().unwrap()]);
    assert_eq!(code(&out), 1, "{}", stdout(&out));

    let other = fs::read_to_string(dir.path().join("data.csv")).unwrap();
    let truncated: String = other.lines().take(50).map(|l| format!("{l}\n")).collect();
    let wrong = dir.path().join("wrong.csv");
    fs::write(&wrong, truncated).unwrap();
    let out = run(&[
        "audit",
        "--config",
        cfg.to_str().unwrap(),
        "--model",
        model.to_str().unwrap(),
        "--data",
        wrong.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 2);
}

#[test]
fn synth_random_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    assert_eq!(code(&run(&["synth", "--seed", "9", "--out", a.to_str().unwrap()])), 0);
    assert_eq!(code(&run(&["synth", "--seed", "9", "--out", b.to_str().unwrap()])), 0);
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert!(dir.path().join("a.schema.json").exists());
}
