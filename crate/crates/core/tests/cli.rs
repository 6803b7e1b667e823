use std::path::Path;
use std::process::{Command, Output};

fn nest(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nest"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const TINY: &str = r#"{"d": 8, "s": 3, "K": 2, "H": 1, "h_neuro": 4, "gen_hidden": 8,
    "encoder_blocks": 1, "steps": 4, "batch": 2, "checkpoint_every": 2}"#;

#[test]
fn full_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let p = |n: &str| dir.path().join(n);
    std::fs::write(p("cfg.json"), TINY).unwrap();

    let out = nest(&[
        "gen-data",
        "--kind",
        "merge",
        "--count",
        "5",
        "--seed",
        "7",
        "--out",
        s(&p("data.jsonl")),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let out = nest(&[
        "train",
        "--config",
        s(&p("cfg.json")),
        "--data",
        s(&p("data.jsonl")),
        "--out",
        s(&p("ckpt.json")),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(p("ckpt.step2.json").exists() && p("ckpt.step4.json").exists());
    let curve = std::fs::read_to_string(p("ckpt.loss.csv")).unwrap();
    assert_eq!(curve.lines().next(), Some("step,loss"));
    assert_eq!(curve.lines().count(), 5);

    let out = nest(&[
        "eval",
        "--ckpt",
        s(&p("ckpt.json")),
        "--data",
        s(&p("data.jsonl")),
        "--report",
        s(&p("report.json")),
        "--config",
        s(&p("cfg.json")),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(p("report.json")).unwrap()).unwrap();
    assert_eq!(report["min_ade"].as_array().unwrap().len(), 2);
    assert!(report["timing"]["mean_ms_per_12_agents"].as_f64().unwrap() > 0.0);

    let out = nest(&[
        "predict",
        "--ckpt",
        s(&p("ckpt.json")),
        "--data",
        s(&p("data.jsonl")),
        "--out",
        s(&p("preds.jsonl")),
    ]);
    assert!(out.status.success());
    let preds = std::fs::read_to_string(p("preds.jsonl")).unwrap();
    assert_eq!(preds.lines().count(), 5);
    let first: serde_json::Value = serde_json::from_str(preds.lines().next().unwrap()).unwrap();
    assert_eq!(first["modes"][0]["traj"].as_array().unwrap().len(), 12);

    let out = nest(&[
        "inspect",
        "--ckpt",
        s(&p("ckpt.json")),
        "--data",
        s(&p("data.jsonl")),
        "--out",
        s(&p("hg.jsonl")),
    ]);
    assert!(out.status.success());
    let hg: serde_json::Value = serde_json::from_str(
        std::fs::read_to_string(p("hg.jsonl"))
            .unwrap()
            .lines()
            .next()
            .unwrap(),
    )
    .unwrap();
    assert_eq!(hg["E"][0].as_array().unwrap().len(), 3);
}

#[test]
fn usage_errors_exit_1() {
    assert_eq!(nest(&["train"]).status.code(), Some(1));
    assert_eq!(
        nest(&["gen-data", "--kind", "roundabout", "--count", "1", "--out", "x"])
            .status
            .code(),
        Some(1)
    );
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"d": 8, "learning_rate": 0.1}"#).unwrap();
    let data = dir.path().join("d.jsonl");
    assert!(
        nest(&["gen-data", "--kind", "chain", "--count", "2", "--out", s(&data)])
            .status
            .success()
    );
    let out = nest(&[
        "train",
        "--config",
        s(&cfg),
        "--data",
        s(&data),
        "--out",
        s(&dir.path().join("c.json")),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("learning_rate"));
    assert_eq!(nest(&["--help"]).status.code(), Some(0));
}

#[test]
fn data_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, TINY).unwrap();
    let data = dir.path().join("d.jsonl");
    std::fs::write(&data, "{\"scenario_id\": \"a\", \"dt\": 0.5}\nnot json\n").unwrap();
    let out = nest(&[
        "train",
        "--config",
        s(&cfg),
        "--data",
        s(&data),
        "--out",
        s(&dir.path().join("c.json")),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 1"));
    let out = nest(&[
        "train",
        "--config",
        s(&cfg),
        "--data",
        s(&dir.path().join("missing.jsonl")),
        "--out",
        "c.json",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn mismatched_config_is_refused_with_both_hashes() {
    let dir = tempfile::tempdir().unwrap();
    let p = |n: &str| dir.path().join(n);
    std::fs::write(p("a.json"), TINY).unwrap();
    std::fs::write(p("b.json"), TINY.replace("\"steps\": 4", "\"steps\": 5")).unwrap();
    assert!(nest(&[
        "gen-data",
        "--kind",
        "chain",
        "--count",
        "2",
        "--out",
        s(&p("d.jsonl"))
    ])
    .status
    .success());
    assert!(nest(&[
        "train",
        "--config",
        s(&p("a.json")),
        "--data",
        s(&p("d.jsonl")),
        "--out",
        s(&p("c.json"))
    ])
    .status
    .success());
    let out = nest(&[
        "eval",
        "--ckpt",
        s(&p("c.json")),
        "--data",
        s(&p("d.jsonl")),
        "--report",
        s(&p("r.json")),
        "--config",
        s(&p("b.json")),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    let hex_words = err
        .split(|c: char| !c.is_ascii_hexdigit())
        .filter(|w| w.len() == 64)
        .count();
    assert_eq!(hex_words, 2, "{err}");
    assert!(!p("r.json").exists());
}

#[test]
fn divergence_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let p = |n: &str| dir.path().join(n);
    std::fs::write(
        p("cfg.json"),
        TINY.replace("\"steps\": 4", "\"steps\": 50, \"lr\": 1e12"),
    )
    .unwrap();
    assert!(nest(&[
        "gen-data",
        "--kind",
        "chain",
        "--count",
        "2",
        "--out",
        s(&p("d.jsonl"))
    ])
    .status
    .success());
    let out = nest(&[
        "train",
        "--config",
        s(&p("cfg.json")),
        "--data",
        s(&p("d.jsonl")),
        "--out",
        s(&p("c.json")),
    ]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("diverged at step"));
}
