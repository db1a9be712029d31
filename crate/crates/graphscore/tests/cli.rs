//! End-to-end tests of the `graphscore` binary: file formats, exit codes
//! and byte-level reproducibility.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_graphscore"))
        .args(args)
        .env("GRAPHSCORE_LOG", "error")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("config.json");
    fs::write(&path, body).unwrap();
    path.display().to_string()
}

/// Small dataset so the training commands finish in seconds.
fn small_config(out: &Path, extra: &str) -> String {
    format!(
        r#"{{
  "graph": {{ "kind": "erdos_renyi", "n": 6, "params": {{ "p": 0.4 }}, "seed": 5 }},
  "gpvar": {{ "t": 3000, "seed": 6 }},
  "train": {{ "epochs": 2, "batches": 5, "batch_size": 8, "seed": 7 }}{extra},
  "output": {{ "dir": "{}" }}
}}"#,
        out.display()
    )
}

#[test]
fn generate_writes_expected_files_and_respects_force() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = write_config(dir.path(), &small_config(&out, ""));

    let ok = run(&["generate", "--config", &cfg]);
    assert!(ok.status.success(), "{}", String::from_utf8_lossy(&ok.stderr));
    let size = fs::metadata(out.join("data.bin")).unwrap().len();
    assert_eq!(size, 8 + 8 + 3000 * 6 * 8);
    assert!(out.join("sidecar.json").exists());

    // Refuses to overwrite without --force (data error, exit 3).
    let refused = run(&["generate", "--config", &cfg]);
    assert_eq!(refused.status.code(), Some(3));

    let forced = run(&["generate", "--config", &cfg, "--force"]);
    assert!(forced.status.success());
}

#[test]
fn generate_is_byte_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    let cfg = write_config(dir.path(), &small_config(&out_a, ""));
    assert!(run(&["generate", "--config", &cfg]).status.success());
    assert!(run(&["generate", "--config", &cfg, "--out", out_b.to_str().unwrap()])
        .status
        .success());
    assert_eq!(
        fs::read(out_a.join("data.bin")).unwrap(),
        fs::read(out_b.join("data.bin")).unwrap()
    );
    // Sidecars differ only in the recorded output-independent fields; both
    // parse and agree on the edge list.
    let sa: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_a.join("sidecar.json")).unwrap()).unwrap();
    let sb: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_b.join("sidecar.json")).unwrap()).unwrap();
    assert_eq!(sa["edges"], sb["edges"]);
}

#[test]
fn zero_theta_records_pure_noise() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = write_config(
        dir.path(),
        &format!(
            r#"{{
  "graph": {{ "kind": "erdos_renyi", "n": 4, "params": {{ "p": 0.6 }}, "seed": 5 }},
  "gpvar": {{ "theta": [[0.0, 0.0], [0.0, 0.0], [0.0, 0.0]], "t": 5000, "seed": 6 }},
  "output": {{ "dir": "{}" }}
}}"#,
            out.display()
        ),
    );
    assert!(run(&["generate", "--config", &cfg]).status.success());
    let sidecar: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("sidecar.json")).unwrap()).unwrap();
    assert!(sidecar["theta"]
        .as_array()
        .unwrap()
        .iter()
        .all(|row| row.as_array().unwrap().iter().all(|v| v.as_f64() == Some(0.0))));
    // Pure noise: per-node variance near 1.
    let bytes = fs::read(out.join("data.bin")).unwrap();
    let values: Vec<f64> = bytes[16..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    assert!((var - 1.0).abs() < 0.05, "variance {var}");
}

#[test]
fn identify_writes_history_and_summary_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = write_config(dir.path(), &small_config(&out, ""));
    assert!(run(&["generate", "--config", &cfg]).status.success());

    let first = run(&["identify", "--config", &cfg]);
    assert!(first.status.success(), "{}", String::from_utf8_lossy(&first.stderr));
    let history = fs::read(out.join("history.csv")).unwrap();
    let summary = fs::read(out.join("summary.json")).unwrap();

    // 2 epochs -> header + 3 rows (epoch 0 evaluation included).
    let text = String::from_utf8(history.clone()).unwrap();
    assert_eq!(text.lines().count(), 4);
    assert!(text.starts_with("epoch,train_mae,val_mae,edge_precision,edge_recall,"));

    // Identical bytes on rerun with the same config and seed.
    let rerun = run(&["identify", "--config", &cfg, "--force"]);
    assert!(rerun.status.success());
    assert_eq!(history, fs::read(out.join("history.csv")).unwrap());
    assert_eq!(summary, fs::read(out.join("summary.json")).unwrap());

    let parsed: serde_json::Value = serde_json::from_slice(&summary).unwrap();
    assert_eq!(parsed["command"], "identify");
    assert!(parsed["version"].as_str().unwrap().starts_with("graphscore-v"));
    assert!(parsed["final_metrics"]["val_mae"].as_f64().unwrap().is_finite());
}

#[test]
fn identify_with_zero_epochs_writes_single_row() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = write_config(
        dir.path(),
        &format!(
            r#"{{
  "graph": {{ "kind": "erdos_renyi", "n": 6, "params": {{ "p": 0.4 }}, "seed": 5 }},
  "gpvar": {{ "t": 3000, "seed": 6 }},
  "train": {{ "epochs": 0, "batches": 5, "batch_size": 8, "seed": 7 }},
  "output": {{ "dir": "{}" }}
}}"#,
            out.display()
        ),
    );
    assert!(run(&["generate", "--config", &cfg]).status.success());
    assert!(run(&["identify", "--config", &cfg]).status.success());
    let text = fs::read_to_string(out.join("history.csv")).unwrap();
    assert_eq!(text.lines().count(), 2); // header + epoch 0
    assert!(text.lines().nth(1).unwrap().starts_with("0,"));
}

#[test]
fn joint_command_runs_on_the_small_dataset() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = write_config(dir.path(), &small_config(&out, ""));
    assert!(run(&["generate", "--config", &cfg]).status.success());
    let joint = run(&["joint", "--config", &cfg]);
    assert!(joint.status.success(), "{}", String::from_utf8_lossy(&joint.stderr));
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["command"], "joint");
}

#[test]
fn missing_dataset_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("nowhere");
    let cfg = write_config(dir.path(), &small_config(&out, ""));
    let res = run(&["identify", "--config", &cfg]);
    assert_eq!(res.status.code(), Some(3));
}

#[test]
fn bad_config_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{ "turbo": true }"#);
    let res = run(&["generate", "--config", &cfg]);
    assert_eq!(res.status.code(), Some(2));
    let msg = String::from_utf8_lossy(&res.stderr);
    assert!(msg.contains("turbo"), "{msg}");

    // Missing --config entirely.
    let res = run(&["generate"]);
    assert_eq!(res.status.code(), Some(2));
}

#[test]
fn sample_emits_edge_lists_frechet_mean_and_mu() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = write_config(
        dir.path(),
        &format!(
            r#"{{
  "graph": {{ "kind": "erdos_renyi", "n": 5, "params": {{ "p": 0.5 }}, "seed": 5 }},
  "distribution": {{ "kind": "sns", "k": 2, "dummies": 1 }},
  "output": {{ "dir": "{}" }}
}}"#,
            out.display()
        ),
    );
    let res = run(&["sample", "--config", &cfg, "--count", "20", "--init"]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let lines: Vec<String> =
        fs::read_to_string(out.join("samples.jsonl")).unwrap().lines().map(String::from).collect();
    assert_eq!(lines.len(), 20);
    for line in &lines {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        let edges = v["edges"].as_array().unwrap();
        // SNS with K = 2: at most 2 real neighbors per row.
        let mut per_row = [0usize; 5];
        for e in edges {
            let i = e[0].as_u64().unwrap() as usize;
            per_row[i] += 1;
        }
        assert!(per_row.iter().all(|&c| c <= 2), "{line}");
    }
    let a0: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("a0.json")).unwrap()).unwrap();
    assert!(a0["edges"].is_array());
    let mu: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("mu.json")).unwrap()).unwrap();
    let rows = mu["mu"].as_array().unwrap();
    assert_eq!(rows.len(), 5);
    // Dummy columns are dropped from the reported mean.
    assert_eq!(rows[0].as_array().unwrap().len(), 5);
}

#[test]
fn sample_count_zero_emits_only_moments() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = write_config(
        dir.path(),
        &format!(
            r#"{{ "graph": {{ "kind": "erdos_renyi", "n": 4, "params": {{ "p": 0.5 }} }},
                 "output": {{ "dir": "{}" }} }}"#,
            out.display()
        ),
    );
    let res = run(&["sample", "--config", &cfg, "--count", "0", "--init"]);
    assert!(res.status.success());
    assert_eq!(fs::read_to_string(out.join("samples.jsonl")).unwrap(), "");
    assert!(out.join("a0.json").exists());
    assert!(out.join("mu.json").exists());
}

#[test]
fn sample_from_scores_file_with_extreme_scores() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = write_config(
        dir.path(),
        &format!(
            r#"{{ "graph": {{ "kind": "erdos_renyi", "n": 3, "params": {{ "p": 0.5 }} }},
                 "output": {{ "dir": "{}" }} }}"#,
            out.display()
        ),
    );
    let scores = dir.path().join("scores.json");
    fs::write(&scores, "[[0.0, 50.0, 50.0], [50.0, 0.0, 50.0], [50.0, 50.0, 0.0]]").unwrap();
    let res = run(&["sample", "--config", &cfg, "--count", "5", "--scores", scores.to_str().unwrap()]);
    assert!(res.status.success());
    for line in fs::read_to_string(out.join("samples.jsonl")).unwrap().lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert_eq!(v["edges"].as_array().unwrap().len(), 6); // complete digraph
    }

    // Malformed scores file: data error.
    fs::write(&scores, "[[0.0, 1.0]]").unwrap();
    let res = run(&["sample", "--config", &cfg, "--count", "1", "--scores", scores.to_str().unwrap(), "--force"]);
    assert_eq!(res.status.code(), Some(3));
}

#[test]
fn verify_fast_passes() {
    let res = run(&["verify", "--level", "fast"]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stdout));
    let text = String::from_utf8_lossy(&res.stdout);
    assert!(text.contains("PASS Prop1-SNS-mu"));
    assert!(text.contains("PASS Eq5-quadrature-vs-enumeration"));
    assert!(!text.contains("FAIL"));
}
