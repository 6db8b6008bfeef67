mod common;

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use common::{snapshot, write_scene, SceneOptions};

fn affpipe(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_affpipe")).args(args).env_remove("AFFPIPE_SEED").output().unwrap()
}

fn ok(out: Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

#[test]
fn classify_uses_lexicon_and_context() {
    let v: serde_json::Value =
        serde_json::from_str(&ok(affpipe(&["classify", "--description", "cut the carrot with a knife"]))).unwrap();
    assert_eq!(v["kind"], "tool_object");
    assert_eq!(v["tool_name"], "knife");

    let v: serde_json::Value = serde_json::from_str(&ok(affpipe(&[
        "classify",
        "--description",
        "stir the pot",
        "--prev",
        "pick up the spoon",
    ])))
    .unwrap();
    assert_eq!(v["tool_name"], "spoon");

    let v: serde_json::Value = serde_json::from_str(&ok(affpipe(&["classify", "--description", "pick up the cup"]))).unwrap();
    assert_eq!(v["kind"], "hand_object");
    assert!(!affpipe(&["classify"]).status.success());
}

#[test]
fn build_then_eval_against_itself() {
    let dir = tempfile::tempdir().unwrap();
    let scene = write_scene(&dir.path().join("clip"), "cli-clip", &SceneOptions::default());
    let out = dir.path().join("out");
    ok(affpipe(&["build", "--manifest", p(&scene.manifest), "--out", p(&out), "--seed", "7", "--png"]));

    let summary: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["built"], 1);
    for f in ["heatmap.pfm", "heatmap.png", "trajectory.json", "tuple.json"] {
        assert!(out.join("cli-clip").join(f).is_file(), "{f}");
    }

    // The env var stands in for --seed.
    let out2 = dir.path().join("out2");
    let o = Command::new(env!("CARGO_BIN_EXE_affpipe"))
        .args(["build", "--manifest", p(&scene.manifest), "--out", p(&out2), "--png", "--workers", "2"])
        .env("AFFPIPE_SEED", "7")
        .output()
        .unwrap();
    ok(o);
    assert_eq!(snapshot(&out), snapshot(&out2));

    let report = dir.path().join("report.json");
    let stdout = ok(affpipe(&["eval", "--pred-dir", p(&out), "--gt-dir", p(&out2), "--out", p(&report)]));
    let agg: serde_json::Value = serde_json::from_str(&stdout).unwrap();
    let all = &agg["all"]["means"];
    assert_eq!(agg["all"]["count"], 1);
    assert!((all["sim"].as_f64().unwrap() - 1.0).abs() < 1e-9);
    assert!((all["cc"].as_f64().unwrap() - 1.0).abs() < 1e-9);
    assert_eq!(all["ade"].as_f64().unwrap(), 0.0);
    assert_eq!(all["dtw"].as_f64().unwrap(), 0.0);
    assert!(report.is_file());
}

#[test]
fn bad_config_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let scene = write_scene(&dir.path().join("clip"), "c", &SceneOptions::default());
    let out = affpipe(&["build", "--manifest", p(&scene.manifest), "--out", p(&dir.path().join("o")), "--sigma", "0"]);
    assert!(!out.status.success());
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"gmm_k": 2, "unknown": 1}"#).unwrap();
    let out = affpipe(&["build", "--manifest", p(&scene.manifest), "--out", p(&dir.path().join("o")), "--config", p(&cfg)]);
    assert!(!out.status.success());
}

#[test]
fn convert_annotations_writes_tuples() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("gt");
    ok(affpipe(&["convert-annotations", "--input", p(&fixture("annotations.jsonl")), "--out", p(&out)]));
    for id in ["kitchen-017", "kitchen-018"] {
        let tuple: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(out.join(id).join("tuple.json")).unwrap()).unwrap();
        assert_eq!(tuple["keypoints"].as_array().unwrap().len(), 5);
        assert_eq!(tuple["interaction"]["source"], "manual");
    }

    let report = dir.path().join("r.json");
    let stdout = ok(affpipe(&["eval", "--pred-dir", p(&out), "--gt-dir", p(&out), "--out", p(&report), "--normalize-dtw"]));
    let agg: serde_json::Value = serde_json::from_str(&stdout).unwrap();
    assert_eq!(agg["all"]["count"], 2);
    assert_eq!(agg["hand_object"]["count"], 1);
    assert_eq!(agg["tool_object"]["count"], 1);
    assert_eq!(agg["all"]["means"]["auc_j"].as_f64().unwrap(), 1.0);
}
