use serde::{Deserialize, Serialize};

use crate::error::{NestError, Result};
use crate::predictor::PredictionSet;

fn displacement(p: &[f64; 4], q: &[f64; 2]) -> f64 {
    (p[0] - q[0]).hypot(p[1] - q[1])
}

fn top_k(pred: &PredictionSet, gt: &[[f64; 2]], k: usize) -> Result<Vec<usize>> {
    let n = pred.modes.len();
    if k == 0 || k > n {
        return Err(NestError::Usage(format!(
            "k = {k} but the prediction has {n} modes"
        )));
    }
    if let Some(m) = pred.modes.iter().find(|m| m.traj.len() != gt.len()) {
        return Err(NestError::shape(
            "metrics",
            format!("mode has {} steps, ground truth {}", m.traj.len(), gt.len()),
        ));
    }
    if gt.is_empty() {
        return Err(NestError::Usage("empty ground-truth trajectory".into()));
    }
    let mut ranked = pred.ranked();
    ranked.truncate(k);
    Ok(ranked)
}

/// Smallest mean displacement among the `k` most probable modes.
pub fn min_ade(pred: &PredictionSet, gt: &[[f64; 2]], k: usize) -> Result<f64> {
    let modes = top_k(pred, gt, k)?;
    Ok(modes
        .into_iter()
        .map(|m| {
            let traj = &pred.modes[m].traj;
            traj.iter().zip(gt).map(|(p, q)| displacement(p, q)).sum::<f64>() / gt.len() as f64
        })
        .fold(f64::INFINITY, f64::min))
}

/// Smallest final-step displacement among the `k` most probable modes.
pub fn min_fde(pred: &PredictionSet, gt: &[[f64; 2]], k: usize) -> Result<f64> {
    let modes = top_k(pred, gt, k)?;
    let last = gt.len() - 1;
    Ok(modes
        .into_iter()
        .map(|m| displacement(&pred.modes[m].traj[last], &gt[last]))
        .fold(f64::INFINITY, f64::min))
}

/// Index of the future step nearest to `horizon_s`; step `i` lies at
/// `(i + 1) * dt`.
pub fn horizon_step(t_f: usize, dt: f64, horizon_s: f64) -> Result<usize> {
    if !(horizon_s > 0.0) || horizon_s > t_f as f64 * dt * (1.0 + 1e-9) {
        return Err(NestError::Usage(format!(
            "horizon {horizon_s} s outside the predicted {} s",
            t_f as f64 * dt
        )));
    }
    Ok(((horizon_s / dt).round() as usize).clamp(1, t_f) - 1)
}

/// Root mean squared error of the most probable mode at the step nearest to
/// `horizon_s`, over the whole dataset.
pub fn rmse_horizon(preds: &[PredictionSet], gts: &[Vec<[f64; 2]>], dt: f64, horizon_s: f64) -> Result<f64> {
    if preds.len() != gts.len() || preds.is_empty() {
        return Err(NestError::Usage(format!(
            "{} predictions for {} ground truths",
            preds.len(),
            gts.len()
        )));
    }
    let mut total = 0.0;
    for (pred, gt) in preds.iter().zip(gts) {
        let best = top_k(pred, gt, 1)?[0];
        let step = horizon_step(gt.len(), dt, horizon_s)?;
        total += displacement(&pred.modes[best].traj[step], &gt[step]).powi(2);
    }
    Ok((total / preds.len() as f64).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HorizonError {
    pub horizon_s: f64,
    pub rmse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub mean_ms_per_12_agents: f64,
    pub protocol: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub scenarios: usize,
    /// Entry `k - 1` is `minADE_k`.
    pub min_ade: Vec<f64>,
    pub min_fde_1: f64,
    /// Entry `k - 1` is `minFDE_k`.
    pub min_fde: Vec<f64>,
    /// One entry per whole second of the prediction horizon.
    pub rmse: Vec<HorizonError>,
    /// Absent in timing-free reports.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timing: Option<Timing>,
}

impl MetricsReport {
    /// Dataset means of every metric. All scenes must share one `dt`.
    pub fn compute(preds: &[PredictionSet], gts: &[Vec<[f64; 2]>], dt: f64) -> Result<Self> {
        if preds.is_empty() || preds.len() != gts.len() {
            return Err(NestError::Usage(format!(
                "{} predictions for {} ground truths",
                preds.len(),
                gts.len()
            )));
        }
        let k_max = preds.iter().map(|p| p.modes.len()).min().unwrap_or(0);
        let n = preds.len() as f64;
        let mut min_ade_k = Vec::with_capacity(k_max);
        let mut min_fde_k = Vec::with_capacity(k_max);
        for k in 1..=k_max {
            let mut ade = 0.0;
            let mut fde = 0.0;
            for (p, g) in preds.iter().zip(gts) {
                ade += min_ade(p, g, k)?;
                fde += min_fde(p, g, k)?;
            }
            min_ade_k.push(ade / n);
            min_fde_k.push(fde / n);
        }
        let t_f = gts[0].len();
        let seconds = (t_f as f64 * dt + 1e-9).floor() as usize;
        let rmse = (1..=seconds)
            .map(|h| {
                Ok(HorizonError {
                    horizon_s: h as f64,
                    rmse: rmse_horizon(preds, gts, dt, h as f64)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(MetricsReport {
            scenarios: preds.len(),
            min_fde_1: min_fde_k[0],
            min_ade: min_ade_k,
            min_fde: min_fde_k,
            rmse,
            timing: None,
        })
    }

    pub fn min_ade_k(&self, k: usize) -> Option<f64> {
        k.checked_sub(1).and_then(|i| self.min_ade.get(i)).copied()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::predictor::PredictedMode;

    fn mode(prob: f64, pts: &[[f64; 2]]) -> PredictedMode {
        PredictedMode {
            prob,
            traj: pts.iter().map(|p| [p[0], p[1], 1.0, 1.0]).collect(),
        }
    }

    fn gt() -> Vec<[f64; 2]> {
        vec![[1.0, 0.0], [2.0, 0.0], [3.0, 0.0]]
    }

    #[test]
    fn ade_examples() {
        let g = gt();
        let exact = PredictionSet {
            modes: vec![mode(1.0, &g)],
        };
        assert_eq!(min_ade(&exact, &g, 1).unwrap(), 0.0);
        let shifted: Vec<_> = g.iter().map(|p| [p[0] + 1.0, p[1]]).collect();
        let off = PredictionSet {
            modes: vec![mode(1.0, &shifted)],
        };
        assert_eq!(min_ade(&off, &g, 1).unwrap(), 1.0);
        assert!(matches!(min_ade(&off, &g, 2), Err(NestError::Usage(_))));
    }

    #[test]
    fn fde_examples() {
        let g = gt();
        let mut last = g.clone();
        last[2] = [6.0, 4.0];
        let p = PredictionSet {
            modes: vec![mode(0.7, &last), mode(0.3, &g)],
        };
        assert_eq!(min_fde(&p, &g, 1).unwrap(), 5.0);
        assert_eq!(min_fde(&p, &g, 2).unwrap(), 0.0);
    }

    #[test]
    fn top_k_follows_probability() {
        let g = gt();
        let far: Vec<_> = g.iter().map(|p| [p[0], p[1] + 10.0]).collect();
        let p = PredictionSet {
            modes: vec![mode(0.1, &g), mode(0.9, &far)],
        };
        assert_eq!(min_ade(&p, &g, 1).unwrap(), 10.0);
        assert_eq!(min_ade(&p, &g, 2).unwrap(), 0.0);
    }

    #[test]
    fn rmse_examples() {
        let g: Vec<[f64; 2]> = (1..=6).map(|i| [i as f64, 0.0]).collect();
        let exact = PredictionSet {
            modes: vec![mode(1.0, &g)],
        };
        assert_eq!(
            rmse_horizon(&[exact.clone()], &[g.clone()], 0.5, 3.0).unwrap(),
            0.0
        );
        let off2: Vec<_> = g.iter().map(|p| [p[0], 2.0]).collect();
        let bad = PredictionSet {
            modes: vec![mode(1.0, &off2)],
        };
        let v = rmse_horizon(&[bad.clone(), bad.clone()], &[g.clone(), g.clone()], 0.5, 3.0).unwrap();
        assert_eq!(v, 2.0);
        let mixed = rmse_horizon(&[exact, bad], &[g.clone(), g.clone()], 0.5, 3.0).unwrap();
        assert!((mixed - 2f64.sqrt()).abs() < 1e-15);
        assert!(rmse_horizon(
            &[PredictionSet {
                modes: vec![mode(1.0, &g)]
            }],
            &[g],
            0.5,
            3.5
        )
        .is_err());
    }

    #[test]
    fn horizon_step_rounds_to_nearest() {
        assert_eq!(horizon_step(12, 0.5, 1.0).unwrap(), 1);
        assert_eq!(horizon_step(12, 0.5, 6.0).unwrap(), 11);
        assert_eq!(horizon_step(12, 0.5, 0.1).unwrap(), 0);
        assert!(horizon_step(12, 0.5, 6.1).is_err());
    }

    #[test]
    fn report_is_monotone_in_k() {
        let g = gt();
        let a: Vec<_> = g.iter().map(|p| [p[0], 1.0]).collect();
        let b: Vec<_> = g.iter().map(|p| [p[0], -0.5]).collect();
        let p = PredictionSet {
            modes: vec![mode(0.6, &a), mode(0.4, &b)],
        };
        let r = MetricsReport::compute(&[p], &[g], 0.5).unwrap();
        assert!(r.min_ade[1] <= r.min_ade[0]);
        assert_eq!(r.min_ade_k(2), Some(0.5));
        assert_eq!(r.rmse.len(), 1);
    }
}
