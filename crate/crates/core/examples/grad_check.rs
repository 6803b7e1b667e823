//! Compares tape gradients of the full training loss against central
//! differences, parameter by parameter.
//!
//! The discrete incidence pattern is recorded once and replayed, so every
//! probe differentiates the same piecewise-smooth function.

use nest::harness::grad_check_config;
use nest::model::{batch_loss, freeze_structures, init_params};
use nest::numerics::grad_check;
use nest::scenario::{generate_synthetic, make_batch, SynthKind, SynthParams};
use nest::Pass;

fn main() -> nest::Result<()> {
    let cfg = grad_check_config();
    let synth = SynthParams {
        t_f: 4,
        vehicles: 3,
        ..SynthParams::default()
    };
    let scenes = make_batch(
        &generate_synthetic(SynthKind::Chain, 1, 5, &synth)?,
        cfg.t_h,
        cfg.t_f,
        true,
    )?;
    let params = init_params(&cfg)?;
    let pass = Pass::train(cfg.seed, 0);
    let frozen = freeze_structures(&params, &cfg, &scenes, &pass)?;

    let report = grad_check(
        |g, p| batch_loss(g, p, &cfg, &scenes, &pass, frozen.as_deref()),
        &params,
        1e-5,
    )?;
    print!("{report}");
    println!(
        "max relative error {:.2e} over {} tensors: {}",
        report.max_rel_error(),
        report.entries.len(),
        if report.passes(1e-3) { "ok" } else { "FAILED" }
    );
    Ok(())
}
