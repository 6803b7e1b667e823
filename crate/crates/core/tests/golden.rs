//! Fixed-seed training and evaluation must reproduce the stored report.
//! Set `UPDATE_GOLDEN=1` to rewrite it.

use std::path::PathBuf;

use nest::harness::{evaluate, train};
use nest::scenario::{generate_synthetic, make_batch, SynthKind, SynthParams};
use nest::{Config, Model};

#[test]
fn report_matches_golden_file() {
    let cfg = Config {
        d: 8,
        s: 3,
        k: 3,
        h: 2,
        h_neuro: 4,
        gen_hidden: 8,
        encoder_blocks: 1,
        steps: 20,
        batch: 3,
        seed: 42,
        ..Config::default()
    };
    let raw = generate_synthetic(SynthKind::Merge, 6, 9, &SynthParams::default()).unwrap();
    let scenes = make_batch(&raw, cfg.t_h, cfg.t_f, true).unwrap();
    let model = train(Model::init(cfg).unwrap(), &scenes).unwrap().model;
    let report = evaluate(&model, &scenes, false).unwrap();
    let text = serde_json::to_string_pretty(&report).unwrap() + "\n";

    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden/report.json");
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        std::fs::write(&path, &text).unwrap();
    }
    let stored = std::fs::read_to_string(&path).expect("golden file; run with UPDATE_GOLDEN=1 to create it");
    assert_eq!(text, stored);
}
