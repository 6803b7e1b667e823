//! Identical histories, two possible futures: the decoder has to spread its
//! modes over both.

use nest::harness::{evaluate, train};
use nest::scenario::{generate_synthetic, make_batch, SynthKind, SynthParams};
use nest::{Config, Model};

fn main() -> nest::Result<()> {
    let steps = std::env::args()
        .nth(1)
        .and_then(|a| a.parse().ok())
        .unwrap_or(400);
    let cfg = Config {
        steps,
        ..nest::harness::uturn_config()
    };
    let raw = generate_synthetic(SynthKind::Uturn, 20, 3, &SynthParams::default())?;
    let scenes = make_batch(&raw, cfg.t_h, cfg.t_f, true)?;

    let before = evaluate(&Model::init(cfg.clone())?, &scenes, false)?;
    let out = train(Model::init(cfg)?, &scenes)?;
    let after = evaluate(&out.model, &scenes, false)?;
    for (name, r) in [("init", &before), ("trained", &after)] {
        let ks: Vec<String> = r
            .min_ade
            .iter()
            .enumerate()
            .map(|(k, v)| format!("k={} {v:.2}", k + 1))
            .collect();
        println!("{name:<8} minADE {}", ks.join("  "));
    }

    let pred = out.model.predict_local(&scenes[0])?;
    for m in pred.ranked() {
        let end = pred.modes[m].traj.last().expect("non-empty");
        println!(
            "mode {m}: p = {:.3}, ends at ({:6.1}, {:6.1})",
            pred.modes[m].prob, end[0], end[1]
        );
    }
    Ok(())
}
