use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::{json, Value};

fn voxseg(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_voxseg")).args(args).current_dir(dir).output().expect("binary runs")
}

fn ok(args: &[&str], dir: &Path) -> String {
    let out = voxseg(args, dir);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn fails(args: &[&str], dir: &Path, code: i32) -> String {
    let out = voxseg(args, dir);
    assert_eq!(out.status.code(), Some(code), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    let err = String::from_utf8(out.stderr).unwrap();
    assert_eq!(err.trim_end().lines().count(), 1, "single-line error expected: {err}");
    assert!(err.starts_with("error: "));
    err
}

/// Two nested structures on a 20^3 grid: quick to train and connected.
fn small_phantom() -> Value {
    json!({
        "name": "small",
        "dims": [20, 20, 20],
        "structures": [
            {"name": "shell", "shape": "shell", "inner": 4.0, "outer": 7.0, "center": [9.5, 9.5, 9.5], "label": 1, "mean": 60.0, "std": 4.0},
            {"name": "core", "shape": "sphere", "radius": 4.0, "center": [9.5, 9.5, 9.5], "label": 2, "mean": 120.0, "std": 4.0}
        ],
        "background_mean": 20.0,
        "background_std": 4.0,
        "seed": 5
    })
}

fn tiny_arch(patch: usize) -> Value {
    json!({"patch": patch, "kernels": [3, 3, 3], "filters": [2, 3, 3], "fc": [5, 4], "coord_width": 6, "class_count": 2, "task_count": 7, "dropout": 0.0})
}

fn plan(stage: &str, quota: usize) -> Value {
    json!({"stage": stage, "quota": quota, "patch": 11})
}

fn write(path: &Path, v: &Value) {
    fs::write(path, serde_json::to_string_pretty(v).unwrap()).unwrap();
}

#[test]
fn inspect_model_prints_canonical_census() {
    let dir = tempfile::tempdir().unwrap();
    let out = ok(&["inspect-model"], dir.path());
    assert!(out.contains("total 2,687,200"), "{out}");
    for n in ["10,976", "256,000", "110,592", "1,769,472", "527,360", "12,800"] {
        assert!(out.contains(n), "{n} missing from\n{out}");
    }
    let j: Value = serde_json::from_str(&ok(&["inspect-model", "--json"], dir.path())).unwrap();
    assert_eq!(j["total"], 2_687_200);
}

#[test]
fn evaluate_identical_volumes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&["phantom", "--suite", "2", "--out-dir", "ph"], d);
    let j: Value = serde_json::from_str(&ok(&["evaluate", "--seg", "ph/seg.vvol", "--truth", "ph/seg.vvol", "--csv", "d.csv"], d)).unwrap();
    assert_eq!(j["median"], 1.0);
    assert_eq!(j["mean"], 1.0);
    let labels = j["labels"].as_array().unwrap();
    assert_eq!(labels.len(), 3);
    assert!(labels.iter().all(|l| l["dice"] == 1.0));
    let csv = fs::read_to_string(d.join("d.csv")).unwrap();
    assert!(csv.starts_with("id,name,dice\n"));
    assert!(csv.contains(",median,1.000000"));
}

#[test]
fn phantom_is_idempotent() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write(&d.join("spec.json"), &small_phantom());
    ok(&["phantom", "--spec", "spec.json", "--out-dir", "a"], d);
    ok(&["phantom", "--spec", "spec.json", "--out-dir", "b"], d);
    for f in ["image.vvol", "seg.vvol", "mask.vvol", "labels.json", "phantom.json"] {
        assert_eq!(fs::read(d.join("a").join(f)).unwrap(), fs::read(d.join("b").join(f)).unwrap(), "{f}");
    }
    ok(&["phantom", "--spec", "spec.json", "--seed", "6", "--out-dir", "c"], d);
    assert_ne!(fs::read(d.join("a/image.vvol")).unwrap(), fs::read(d.join("c/image.vvol")).unwrap());
}

#[test]
fn train_segment_then_identity_crf_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write(&d.join("spec.json"), &small_phantom());
    ok(&["phantom", "--spec", "spec.json", "--out-dir", "ph"], d);
    let report: Value = serde_json::from_str(&ok(&["spectral", "--mask", "ph/mask.vvol", "--out-dir", "sc"], d)).unwrap();
    assert!(report["lambda_1"].as_f64().unwrap() > 0.0);
    write(
        &d.join("train.json"),
        &json!({
            "images": [{"image": "ph/image.vvol", "seg": "ph/seg.vvol", "mask": "ph/mask.vvol",
                        "coords": ["sc/coord_1.vvol", "sc/coord_2.vvol", "sc/coord_3.vvol"]}],
            "out_dir": "models",
            "train": {"epochs": 1, "batch_size": 8, "seed": 3},
            "fg_plan": plan("fg_bg", 16),
            "structure_plan": plan("structures", 8),
            "arch": tiny_arch(11)
        }),
    );
    ok(&["train", "--config", "train.json"], d);
    let lines = fs::read_to_string(d.join("models/report.jsonl")).unwrap();
    assert!(lines.lines().all(|l| serde_json::from_str::<Value>(l).is_ok()));
    assert!(lines.contains("\"iteration\"") && lines.contains("\"lr\""));

    let seg = |out: &str, probs: &str| {
        ok(
            &["segment", "--image", "ph/image.vvol", "--mask", "ph/mask.vvol", "--fg-model", "models/fg.dnmd",
              "--structure-model", "models/structures.dnmd", "--coords", "sc/coord_1.vvol", "sc/coord_2.vvol", "sc/coord_3.vvol",
              "--out", out, "--probs-dir", probs],
            d,
        )
    };
    seg("labels.vvol", "probs");
    seg("labels2.vvol", "probs2");
    assert_eq!(fs::read(d.join("labels.vvol")).unwrap(), fs::read(d.join("labels2.vvol")).unwrap());
    assert!(d.join("probs/prob_02.vvol").exists() && !d.join("probs/prob_03.vvol").exists());

    write(&d.join("identity.json"), &json!({"v1": 0.0, "v2": 0.0}));
    ok(&["crf", "--probs-dir", "probs", "--image", "ph/image.vvol", "--mask", "ph/mask.vvol", "--params", "identity.json", "--out", "crf.vvol", "--q-dir", "q"], d);
    assert_eq!(fs::read(d.join("labels.vvol")).unwrap(), fs::read(d.join("crf.vvol")).unwrap());
    assert!(d.join("q/prob_00.vvol").exists());

    ok(&["crf", "--probs-dir", "probs", "--image", "ph/image.vvol", "--mask", "ph/mask.vvol", "--out", "crf_default.vvol"], d);
    ok(&["evaluate", "--seg", "crf_default.vvol", "--truth", "ph/seg.vvol", "--labels", "ph/labels.json"], d);
}

#[test]
fn exit_codes_and_single_line_errors() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fails(&["no-such-command"], d, 1);
    fails(&["crf", "--image", "x"], d, 1);
    fails(&["evaluate", "--seg", "missing.vvol", "--truth", "missing.vvol"], d, 2);

    write(&d.join("bad.json"), &json!({"v1": -1.0, "sigma_beta": 0.0, "iterations": 0}));
    ok(&["phantom", "--suite", "2", "--out-dir", "ph"], d);
    let err = fails(&["crf", "--probs-dir", "ph", "--image", "ph/image.vvol", "--mask", "ph/mask.vvol", "--params", "bad.json", "--out", "o.vvol"], d, 2);
    assert_eq!(err.matches("; ").count(), 2, "all violations listed: {err}");

    fs::write(d.join("junk.vvol"), b"not a volume").unwrap();
    fails(&["evaluate", "--seg", "junk.vvol", "--truth", "ph/seg.vvol"], d, 3);

    // Two separate spheres give a disconnected mask.
    let mut two = small_phantom();
    two["structures"] = json!([
        {"name": "a", "shape": "sphere", "radius": 2.0, "center": [4.0, 9.5, 9.5], "label": 1, "mean": 60.0, "std": 4.0},
        {"name": "b", "shape": "sphere", "radius": 2.0, "center": [15.0, 9.5, 9.5], "label": 2, "mean": 60.0, "std": 4.0}
    ]);
    write(&d.join("two.json"), &two);
    ok(&["phantom", "--spec", "two.json", "--out-dir", "two"], d);
    let err = fails(&["spectral", "--mask", "two/mask.vvol", "--out-dir", "sc"], d, 2);
    assert!(err.contains("not 6-connected"), "{err}");
}

#[test]
fn train_config_validation_lists_every_problem() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write(
        &d.join("train.json"),
        &json!({
            "images": [{"image": "a.vvol", "seg": "b.vvol", "mask": "c.vvol"}],
            "out_dir": "m",
            "train": {"batch_size": 1, "base_lr": -1.0},
            "threads": 0
        }),
    );
    let err = fails(&["train", "--config", "train.json"], d, 2);
    for needle in ["a.vvol", "b.vvol", "c.vvol", "batch", "base_lr", "threads"] {
        assert!(err.contains(needle), "{needle} not reported: {err}");
    }
    write(&d.join("typo.json"), &json!({"images": [], "out_dir": "m", "epochs": 3}));
    let err = fails(&["train", "--config", "typo.json"], d, 2);
    assert!(err.contains("epochs"), "{err}");
}

#[test]
fn pipeline_runs_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write(
        &d.join("pipeline.json"),
        &json!({
            "out_dir": "run",
            "phantom": small_phantom(),
            "train": {"epochs": 1, "batch_size": 8},
            "fg_plan": plan("fg_bg", 16),
            "structure_plan": plan("structures", 8),
            "arch": tiny_arch(11)
        }),
    );
    let summary: Value = serde_json::from_str(&ok(&["pipeline", "--config", "pipeline.json"], d)).unwrap();
    for stage in ["pre_crf", "post_crf"] {
        assert_eq!(summary[stage]["labels"].as_array().unwrap().len(), 2);
    }
    for f in ["train/image.vvol", "test/coord_3.vvol", "models/fg.dnmd", "probs/prob_00.vvol", "labels_crf.vvol", "dice_post_crf.csv", "summary.json"] {
        assert!(d.join("run").join(f).exists(), "{f}");
    }
}

/// Top-level property names of a shipped JSON schema.
fn schema_keys(name: &str) -> Vec<String> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../docs/schemas").join(name);
    let schema: Value = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
    schema["properties"].as_object().unwrap().keys().cloned().collect()
}

#[test]
fn help_lists_every_config_key() {
    let dir = tempfile::tempdir().unwrap();
    for (cmd, schema) in [("train", "train.schema.json"), ("pipeline", "pipeline.schema.json"), ("crf", "crf.schema.json"), ("phantom", "phantom.schema.json")] {
        let help = ok(&[cmd, "--help"], dir.path());
        let keys = schema_keys(schema);
        assert!(!keys.is_empty());
        for k in keys {
            assert!(help.contains(&k), "`{cmd} --help` does not mention {k}");
        }
    }
}
