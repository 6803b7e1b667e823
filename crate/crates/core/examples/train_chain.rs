//! Trains on a small braking-chain set and reports metrics as it goes.
//!
//! ```text
//! cargo run --release --example train_chain -- [steps]
//! ```

use std::time::Instant;

use nest::harness::{evaluate, train_with};
use nest::scenario::{generate_synthetic, make_batch, SynthKind, SynthParams};
use nest::{Config, Model};

fn main() -> nest::Result<()> {
    let steps = std::env::args()
        .nth(1)
        .and_then(|a| a.parse().ok())
        .unwrap_or(300);
    let cfg = Config {
        steps,
        ..nest::harness::overfit_config()
    };
    let raw = generate_synthetic(SynthKind::Chain, 20, 7, &SynthParams::default())?;
    let scenes = make_batch(&raw, cfg.t_h, cfg.t_f, true)?;

    let start = Instant::now();
    let every = (steps / 10).max(1);
    let out = train_with(Model::init(cfg)?, &scenes, |rec, model| {
        if (rec.step + 1) % every == 0 {
            let r = evaluate(model, &scenes, false)?;
            println!(
                "step {:>5}  loss {:>8.4}  minADE_1 {:>7.3} m  {:>5.1} s",
                rec.step + 1,
                rec.loss,
                r.min_ade[0],
                start.elapsed().as_secs_f64()
            );
        }
        Ok(())
    })?;
    let r = evaluate(&out.model, &scenes, true)?;
    println!(
        "final minADE_1 {:.3} m, minFDE_1 {:.3} m",
        r.min_ade[0], r.min_fde_1
    );
    if let Some(t) = r.timing {
        println!("{:.2} ms per 12 agents", t.mean_ms_per_12_agents);
    }
    Ok(())
}
