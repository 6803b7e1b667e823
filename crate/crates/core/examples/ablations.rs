//! Trains every ablation method A..F briefly on the same chain data.

use nest::harness::{dataset_loss, train};
use nest::scenario::{generate_synthetic, make_batch, SynthKind, SynthParams};
use nest::{Ablation, Config, Model};

fn main() -> nest::Result<()> {
    let steps = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(50);
    let base = Config {
        steps,
        ..nest::harness::overfit_config()
    };
    let raw = generate_synthetic(SynthKind::Chain, 20, 7, &SynthParams::default())?;
    let scenes = make_batch(&raw, base.t_h, base.t_f, true)?;

    println!("method  nm  sw  hg  cf  mm  params   final-loss  eval-loss");
    for m in Ablation::METHODS {
        let ablation = Ablation::method(m).expect("known method");
        let cfg = Config {
            ablation,
            ..base.clone()
        };
        let out = train(Model::init(cfg)?, &scenes)?;
        let last = out.curve.last().map_or(f64::NAN, |r| r.loss);
        let flag = |b: bool| if b { "x" } else { "." };
        println!(
            "{m}       {}   {}   {}   {}   {}   {:<8} {:>10.4} {:>10.4}",
            flag(ablation.neuromodulator),
            flag(ablation.small_world),
            flag(ablation.hypergraph),
            flag(ablation.context_fusion),
            flag(ablation.multimodal),
            out.model.params.num_scalars(),
            last,
            dataset_loss(&out.model, &scenes)?,
        );
    }
    Ok(())
}
