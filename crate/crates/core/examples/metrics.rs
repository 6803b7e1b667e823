//! minADE / minFDE / RMSE on a hand-built two-mode prediction.

use nest::harness::{min_ade, min_fde, rmse_horizon, MetricsReport};
use nest::{PredictedMode, PredictionSet};

fn mode(prob: f64, f: impl Fn(f64) -> [f64; 2]) -> PredictedMode {
    PredictedMode {
        prob,
        traj: (1..=12)
            .map(|t| f(t as f64 * 0.5))
            .map(|[x, y]| [x, y, 1.0, 1.0])
            .collect(),
    }
}

fn main() -> nest::Result<()> {
    let gt: Vec<[f64; 2]> = (1..=12).map(|t| [10.0 * t as f64 * 0.5, 0.0]).collect();
    // The likelier mode drifts sideways, the other is exact.
    let pred = PredictionSet {
        modes: vec![mode(0.7, |s| [10.0 * s, 0.5 * s]), mode(0.3, |s| [10.0 * s, 0.0])],
    };
    println!(
        "minADE_1 {:.3}  minADE_2 {:.3}",
        min_ade(&pred, &gt, 1)?,
        min_ade(&pred, &gt, 2)?
    );
    println!(
        "minFDE_1 {:.3}  minFDE_2 {:.3}",
        min_fde(&pred, &gt, 1)?,
        min_fde(&pred, &gt, 2)?
    );
    for h in [1.0, 3.0, 6.0] {
        println!(
            "RMSE@{h}s {:.3}",
            rmse_horizon(&[pred.clone()], &[gt.clone()], 0.5, h)?
        );
    }
    let report = MetricsReport::compute(&[pred], &[gt], 0.5)?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}
