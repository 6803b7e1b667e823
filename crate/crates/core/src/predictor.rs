//! Lane-context fusion, the K-generator Laplace decoder and the training loss.

use serde::{Deserialize, Serialize};

use crate::config::{Config, ScaleActivation};
use crate::encoder::LaneFeatures;
use crate::error::{NestError, Result};
use crate::numerics::{
    attention, mlp_forward, nn::log_sum_exp, softmax, Activation, Graph, MlpSpec, ParamSpec, ParamStore,
    Tensor, Var,
};
use crate::scenario::Frame;

fn generator_spec(cfg: &Config) -> MlpSpec {
    MlpSpec::new(&[2 * cfg.d, cfg.gen_hidden, 4 * cfg.t_f], Activation::Tanh)
}

fn prob_spec(cfg: &Config) -> MlpSpec {
    MlpSpec::new(&[2 * cfg.d, cfg.d, cfg.num_modes()], Activation::Tanh)
}

pub fn register_params(cfg: &Config, registry: &mut Vec<ParamSpec>) {
    if cfg.ablation.context_fusion {
        for proj in ["q", "k", "v"] {
            MlpSpec::new(&[cfg.d, cfg.d], Activation::None)
                .without_bias()
                .register(&format!("predictor.fuse.{proj}"), registry);
        }
    }
    for k in 0..cfg.num_modes() {
        generator_spec(cfg).register(&format!("predictor.gen{k}"), registry);
    }
    prob_spec(cfg).register("predictor.prob", registry);
}

/// `F_c = F_i + Attn(F_i W_q, F_l W_k, F_l W_v)`; without lanes (or with
/// fusion disabled) `F_c = F_i`.
pub fn fuse_context(
    g: &mut Graph,
    params: &ParamStore,
    cfg: &Config,
    f_i: Var,
    lanes: &LaneFeatures,
) -> Result<Var> {
    if !cfg.ablation.context_fusion || lanes.len == 0 {
        return Ok(f_i);
    }
    let mut proj = |name: &str, x: Var| -> Result<Var> {
        let w = g.param(params, &format!("predictor.fuse.{name}.0.w"))?;
        g.matmul(x, w)
    };
    let q = proj("q", f_i)?;
    let k = proj("k", lanes.features)?;
    let v = proj("v", lanes.features)?;
    let ctx = attention(g, q, k, v)?;
    g.add(f_i, ctx)
}

/// Decoder outputs on the tape, one entry per mode.
#[derive(Debug, Clone)]
pub struct ModeOutputs {
    /// `t_f x 2` positions in meters.
    pub means: Vec<Var>,
    /// `t_f x 2` Laplace scales, strictly positive.
    pub scales: Vec<Var>,
    /// `1 x K` unnormalized mode scores.
    pub logits: Var,
}

/// `K` independent generators and a probability head on `[F_c, F_a0]`.
pub fn predict_modes(
    g: &mut Graph,
    params: &ParamStore,
    cfg: &Config,
    f_c: Var,
    f_a0: Var,
) -> Result<ModeOutputs> {
    let z = g.concat_cols(&[f_c, f_a0])?;
    let mut means = Vec::with_capacity(cfg.num_modes());
    let mut scales = Vec::with_capacity(cfg.num_modes());
    for k in 0..cfg.num_modes() {
        let out = mlp_forward(g, params, &format!("predictor.gen{k}"), z, &generator_spec(cfg))?;
        let out = g.reshape(out, cfg.t_f, 4)?;
        let mu = g.slice_cols(out, 0, 2)?;
        means.push(g.scale(mu, cfg.position_scale)?);
        let raw = g.slice_cols(out, 2, 2)?;
        let b = match cfg.scale_activation {
            ScaleActivation::Exp => g.exp(raw)?,
            ScaleActivation::Softplus => {
                let e = g.exp(raw)?;
                let e = g.add_scalar(e, 1.0)?;
                g.log(e)?
            }
        };
        scales.push(if cfg.scale_floor > 0.0 {
            g.add_scalar(b, cfg.scale_floor)?
        } else {
            b
        });
    }
    let logits = mlp_forward(g, params, "predictor.prob", z, &prob_spec(cfg))?;
    Ok(ModeOutputs {
        means,
        scales,
        logits,
    })
}

/// `(1/t_f) sum_t sum_c [log(2 b) + |gt - mu| / b]`.
pub fn laplace_nll(g: &mut Graph, mu: Var, b: Var, gt: &[[f64; 2]]) -> Result<Var> {
    let (t_f, cols) = g.value(mu).dims();
    if cols != 2 || g.value(b).dims() != (t_f, 2) || gt.len() != t_f {
        return Err(NestError::shape(
            "laplace_nll",
            format!(
                "mu {:?}, b {:?}, ground truth has {} steps",
                g.value(mu).shape(),
                g.value(b).shape(),
                gt.len()
            ),
        ));
    }
    let target = g.constant(Tensor::matrix(t_f, 2, gt.iter().flatten().copied().collect())?);
    let err = g.sub(target, mu)?;
    let err = g.abs(err)?;
    let ratio = g.div(err, b)?;
    let two_b = g.scale(b, 2.0)?;
    let log_term = g.log(two_b)?;
    let total = g.add(log_term, ratio)?;
    let total = g.sum_all(total)?;
    g.scale(total, 1.0 / t_f as f64)
}

/// Mean Euclidean displacement between a `t_f x 2` trajectory and `gt`.
pub fn average_displacement(traj: &Tensor, gt: &[[f64; 2]]) -> f64 {
    let n = gt.len();
    gt.iter()
        .enumerate()
        .map(|(t, p)| (traj.get(t, 0) - p[0]).hypot(traj.get(t, 1) - p[1]))
        .sum::<f64>()
        / n as f64
}

/// Mode with the smallest average displacement; ties go to the lower index.
pub fn best_mode(g: &Graph, outputs: &ModeOutputs, gt: &[[f64; 2]]) -> usize {
    let ades: Vec<f64> = outputs
        .means
        .iter()
        .map(|&m| average_displacement(g.value(m), gt))
        .collect();
    (0..ades.len()).fold(0, |b, k| if ades[k] < ades[b] { k } else { b })
}

/// Winner-takes-all Laplace NLL plus `c_cls` times the cross-entropy of the
/// mode probabilities against the winning mode. Returns the loss and winner.
pub fn training_loss(
    g: &mut Graph,
    outputs: &ModeOutputs,
    gt: &[[f64; 2]],
    c_cls: f64,
) -> Result<(Var, usize)> {
    let best = best_mode(g, outputs, gt);
    let nll = laplace_nll(g, outputs.means[best], outputs.scales[best], gt)?;
    if c_cls == 0.0 {
        return Ok((nll, best));
    }
    let lse = log_sum_exp(g, outputs.logits)?;
    let picked = g.slice_cols(outputs.logits, best, 1)?;
    let ce = g.sub(lse, picked)?;
    let ce = g.scale(ce, c_cls)?;
    Ok((g.add(nll, ce)?, best))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictedMode {
    pub prob: f64,
    /// `[x, y, b_x, b_y]` per future step.
    pub traj: Vec<[f64; 4]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionSet {
    pub modes: Vec<PredictedMode>,
}

impl PredictionSet {
    pub fn from_outputs(g: &Graph, outputs: &ModeOutputs) -> Result<Self> {
        let probs = softmax(g.value(outputs.logits), 1.0)?;
        let modes = outputs
            .means
            .iter()
            .zip(&outputs.scales)
            .enumerate()
            .map(|(k, (&m, &b))| {
                let (m, b) = (g.value(m), g.value(b));
                PredictedMode {
                    prob: probs.get(0, k),
                    traj: (0..m.rows())
                        .map(|t| [m.get(t, 0), m.get(t, 1), b.get(t, 0), b.get(t, 1)])
                        .collect(),
                }
            })
            .collect();
        Ok(PredictionSet { modes })
    }

    /// Mode indices by descending probability, ties by index.
    pub fn ranked(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.modes.len()).collect();
        idx.sort_by(|&a, &b| self.modes[b].prob.total_cmp(&self.modes[a].prob).then(a.cmp(&b)));
        idx
    }

    /// Maps positions into the world frame. Scales are rotated as independent
    /// per-axis spreads, so each world-axis scale matches the variance of the
    /// rotated local distribution.
    pub fn to_world(&self, frame: &Frame) -> PredictionSet {
        let (s, c) = frame.heading.sin_cos();
        let modes = self
            .modes
            .iter()
            .map(|m| PredictedMode {
                prob: m.prob,
                traj: m
                    .traj
                    .iter()
                    .map(|&[x, y, bx, by]| {
                        let [wx, wy] = frame.point_to_world([x, y]);
                        [
                            wx,
                            wy,
                            ((c * bx).powi(2) + (s * by).powi(2)).sqrt(),
                            ((s * bx).powi(2) + (c * by).powi(2)).sqrt(),
                        ]
                    })
                    .collect(),
            })
            .collect();
        PredictionSet { modes }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{grad_check, RngStream};

    fn cfg(k: usize, t_f: usize) -> Config {
        Config {
            d: 4,
            k,
            t_f,
            gen_hidden: 6,
            ..Config::default()
        }
    }

    fn store(cfg: &Config) -> ParamStore {
        let mut reg = Vec::new();
        register_params(cfg, &mut reg);
        ParamStore::init(&reg, &RngStream::new(5, "init")).unwrap()
    }

    fn lanes(g: &mut Graph, rows: &[Vec<f64>]) -> LaneFeatures {
        let t = if rows.is_empty() {
            Tensor::zeros(0, 4)
        } else {
            Tensor::from_rows(rows).unwrap()
        };
        LaneFeatures {
            features: g.constant(t),
            len: rows.len(),
        }
    }

    #[test]
    fn fusion_cases() {
        let c = cfg(2, 3);
        let p = store(&c);
        let fi = Tensor::row(vec![0.1, -0.2, 0.3, 0.0]);
        let lane = vec![0.5, 1.0, -1.0, 2.0];

        let mut g = Graph::new();
        let f = g.constant(fi.clone());
        let none = lanes(&mut g, &[]);
        let out = fuse_context(&mut g, &p, &c, f, &none).unwrap();
        assert_eq!(g.value(out), &fi);

        let one = lanes(&mut g, &[lane.clone()]);
        let single = fuse_context(&mut g, &p, &c, f, &one).unwrap();
        let wv = p.get("predictor.fuse.v.0.w").unwrap();
        let proj = Tensor::row(lane.clone()).matmul(wv).unwrap();
        for k in 0..4 {
            assert!((g.value(single).get(0, k) - (fi.get(0, k) + proj.get(0, k))).abs() < 1e-14);
        }
        let two = lanes(&mut g, &[lane.clone(), lane]);
        let double = fuse_context(&mut g, &p, &c, f, &two).unwrap();
        for k in 0..4 {
            assert!((g.value(single).get(0, k) - g.value(double).get(0, k)).abs() < 1e-14);
        }
    }

    fn decode(c: &Config, p: &ParamStore) -> PredictionSet {
        let mut g = Graph::new();
        let fc = g.constant(Tensor::row(vec![0.3, -0.4, 0.2, 0.9]));
        let fa = g.constant(Tensor::row(vec![-0.1, 0.8, 0.0, 0.5]));
        let out = predict_modes(&mut g, p, c, fc, fa).unwrap();
        PredictionSet::from_outputs(&g, &out).unwrap()
    }

    #[test]
    fn decoder_shapes_and_codomains() {
        for act in [ScaleActivation::Exp, ScaleActivation::Softplus] {
            let c = Config {
                scale_activation: act,
                ..cfg(3, 5)
            };
            let pred = decode(&c, &store(&c));
            assert_eq!(pred.modes.len(), 3);
            assert!(pred.modes.iter().all(|m| m.traj.len() == 5));
            assert!(pred
                .modes
                .iter()
                .flat_map(|m| &m.traj)
                .all(|s| s[2] > 0.0 && s[3] > 0.0));
            let total: f64 = pred.modes.iter().map(|m| m.prob).sum();
            assert!((total - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_decoder_gives_identical_uniform_modes() {
        let c = cfg(4, 3);
        let mut p = store(&c);
        let names: Vec<String> = p.names().map(String::from).collect();
        for n in names {
            let t = p.get_mut(&n).unwrap();
            *t = Tensor::zeros(t.rows(), t.cols());
        }
        let pred = decode(&c, &p);
        for m in &pred.modes {
            assert_eq!(m.traj, pred.modes[0].traj);
            assert_eq!(m.prob, 0.25);
        }
    }

    #[test]
    fn single_mode_when_multimodal_off() {
        let mut c = cfg(5, 3);
        c.ablation.multimodal = false;
        let pred = decode(&c, &store(&c));
        assert_eq!(pred.modes.len(), 1);
        assert_eq!(pred.modes[0].prob, 1.0);
    }

    fn nll_value(mu: &[[f64; 2]], b: &[[f64; 2]], gt: &[[f64; 2]]) -> f64 {
        let mut g = Graph::new();
        let t = mu.len();
        let m = g.constant(Tensor::matrix(t, 2, mu.iter().flatten().copied().collect()).unwrap());
        let s = g.constant(Tensor::matrix(t, 2, b.iter().flatten().copied().collect()).unwrap());
        let l = laplace_nll(&mut g, m, s, gt).unwrap();
        g.value(l).item()
    }

    #[test]
    fn nll_closed_forms() {
        let gt = [[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]];
        let v = nll_value(&gt, &[[1.0, 1.0]; 3], &gt);
        assert!((v - 2.0 * 2f64.ln()).abs() < 1e-15);

        let mu = [[0.0, 0.0]];
        let v = nll_value(&mu, &[[0.5, 0.8]], &[[1.0, 0.0]]);
        assert!((v - (0.0 + 2.0 + 1.6f64.ln())).abs() < 1e-15);
    }

    #[test]
    fn nll_gradient_matches_differences() {
        let gt = [[1.0, -2.0], [0.5, 0.25], [3.0, 1.0]];
        let mut p = ParamStore::new();
        p.insert(
            "mu",
            Tensor::from_rows(&[vec![0.2, -1.5], vec![0.9, -0.3], vec![2.0, 1.4]]).unwrap(),
        );
        p.insert(
            "b",
            Tensor::from_rows(&[vec![0.7, 1.3], vec![0.4, 2.0], vec![1.1, 0.6]]).unwrap(),
        );
        let report = grad_check(
            |g, store| {
                let mu = g.param(store, "mu")?;
                let b = g.param(store, "b")?;
                laplace_nll(g, mu, b, &gt)
            },
            &p,
            1e-6,
        )
        .unwrap();
        assert!(report.passes(1e-4), "{report}");
    }

    fn outputs(g: &mut Graph, means: &[Vec<[f64; 2]>], logits: Vec<f64>) -> ModeOutputs {
        let t = means[0].len();
        ModeOutputs {
            means: means
                .iter()
                .map(|m| g.constant(Tensor::matrix(t, 2, m.iter().flatten().copied().collect()).unwrap()))
                .collect(),
            scales: means
                .iter()
                .map(|_| g.constant(Tensor::filled(t, 2, 1.0)))
                .collect(),
            logits: g.constant(Tensor::row(logits)),
        }
    }

    #[test]
    fn single_mode_loss_is_plain_nll() {
        let gt = [[1.0, 1.0], [2.0, 2.0]];
        let mut g = Graph::new();
        let o = outputs(&mut g, &[vec![[0.0, 1.0], [2.0, 2.5]]], vec![0.3]);
        let (loss, best) = training_loss(&mut g, &o, &gt, 0.5).unwrap();
        assert_eq!(best, 0);
        let want = nll_value(&[[0.0, 1.0], [2.0, 2.5]], &[[1.0, 1.0]; 2], &gt);
        assert!((g.value(loss).item() - want).abs() < 1e-14);
    }

    #[test]
    fn winner_is_the_exact_mode() {
        let gt = [[1.0, 1.0], [2.0, 2.0]];
        let mut g = Graph::new();
        let o = outputs(
            &mut g,
            &[vec![[5.0, 1.0], [2.0, 9.0]], gt.to_vec()],
            vec![0.4, -0.2],
        );
        let (loss, best) = training_loss(&mut g, &o, &gt, 0.5).unwrap();
        assert_eq!(best, 1);
        let p1 = (-0.2f64).exp() / (0.4f64.exp() + (-0.2f64).exp());
        let want = 2.0 * 2f64.ln() + 0.5 * -p1.ln();
        assert!((g.value(loss).item() - want).abs() < 1e-14);
    }

    #[test]
    fn winner_ignores_scales() {
        let gt = [[1.0, 1.0], [2.0, 2.0]];
        let mut g = Graph::new();
        let mut o = outputs(
            &mut g,
            &[vec![[1.5, 1.0], [2.0, 2.0]], vec![[1.0, 1.0], [2.5, 2.5]]],
            vec![0.0, 0.0],
        );
        let before = best_mode(&g, &o, &gt);
        o.scales = vec![
            g.constant(Tensor::filled(2, 2, 100.0)),
            g.constant(Tensor::filled(2, 2, 1e-3)),
        ];
        assert_eq!(best_mode(&g, &o, &gt), before);
    }

    #[test]
    fn world_frame_conversion() {
        let pred = PredictionSet {
            modes: vec![PredictedMode {
                prob: 1.0,
                traj: vec![[1.0, 0.0, 2.0, 0.5]],
            }],
        };
        let frame = Frame {
            origin: [10.0, 5.0],
            heading: std::f64::consts::FRAC_PI_2,
        };
        let w = pred.to_world(&frame).modes[0].traj[0];
        assert!((w[0] - 10.0).abs() < 1e-12 && (w[1] - 6.0).abs() < 1e-12);
        assert!((w[2] - 0.5).abs() < 1e-12 && (w[3] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn ranking_by_probability() {
        let m = |prob| PredictedMode { prob, traj: vec![] };
        let p = PredictionSet {
            modes: vec![m(0.2), m(0.5), m(0.2), m(0.1)],
        };
        assert_eq!(p.ranked(), vec![1, 0, 2, 3]);
    }
}
