use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{NestError, Result};

/// How uncertain incidence entries are resolved outside training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvalRewire {
    /// Connect every uncertain entry iff `beta >= 0.5`.
    Threshold,
    /// Draw `eta` exactly as in training.
    Sample,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Optimizer {
    Sgd,
    Adam,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LrSchedule {
    Constant,
    /// Cosine decay from `lr` to zero over `steps`.
    Cosine,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScaleActivation {
    Exp,
    Softplus,
}

/// Component switches. The six ablation methods A-F are presets of these.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Ablation {
    pub neuromodulator: bool,
    pub small_world: bool,
    pub hypergraph: bool,
    pub context_fusion: bool,
    pub multimodal: bool,
}

impl Default for Ablation {
    fn default() -> Self {
        Ablation::method('F').expect("F is a method")
    }
}

impl Ablation {
    pub const METHODS: [char; 6] = ['A', 'B', 'C', 'D', 'E', 'F'];

    /// Flag settings of ablation method `A`..`F`; `F` is the full model.
    pub fn method(m: char) -> Option<Ablation> {
        let (neuromodulator, small_world, hypergraph, context_fusion, multimodal) =
            match m.to_ascii_uppercase() {
                'A' => (false, true, true, true, true),
                'B' => (false, false, true, true, true),
                'C' => (false, false, false, true, true),
                'D' => (true, true, true, false, true),
                'E' => (true, true, true, true, false),
                'F' => (true, true, true, true, true),
                _ => return None,
            };
        Some(Ablation {
            neuromodulator,
            small_world,
            hypergraph,
            context_fusion,
            multimodal,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    /// Feature width.
    pub d: usize,
    /// Number of hyperedges.
    pub s: usize,
    /// Intention modes in pooling and trajectory modes in the predictor.
    #[serde(rename = "K")]
    pub k: usize,
    /// Pooling iterations.
    #[serde(rename = "H")]
    pub h: usize,
    pub t_h: usize,
    pub t_f: usize,
    /// Gumbel-softmax temperature for intentions.
    pub tau: f64,
    /// Temperature of the soft incidence used for straight-through gradients.
    pub tau_e: f64,
    /// Hidden width of the neuromodulator MLPs.
    pub h_neuro: usize,
    pub lr: f64,
    pub steps: usize,
    pub batch: usize,
    pub seed: u64,
    /// Weight of the mode-classification term.
    pub c_cls: f64,
    pub eval_rewire: EvalRewire,
    pub ablation: Ablation,

    pub optimizer: Optimizer,
    pub momentum: f64,
    pub lr_schedule: LrSchedule,
    /// Rescale the gradient to at most this global L2 norm (0 = off).
    pub grad_clip: f64,
    /// Threshold used when the neuromodulator is disabled.
    pub alpha_fixed: f64,
    /// Connection probability used when the neuromodulator is disabled.
    pub beta_fixed: f64,
    /// Redraw rewiring noise every training pass instead of once per scene.
    pub resample_rewire: bool,
    /// Hidden width of each trajectory generator.
    pub gen_hidden: usize,
    pub encoder_blocks: usize,
    pub lane_segment_length: f64,
    /// Generators emit positions in units of this many meters.
    pub position_scale: f64,
    pub scale_activation: ScaleActivation,
    /// Lower bound added to every Laplace scale, in meters.
    pub scale_floor: f64,
    /// Write an intermediate checkpoint every this many steps (0 = never).
    pub checkpoint_every: usize,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            d: 32,
            s: 8,
            k: 5,
            h: 3,
            t_h: 8,
            t_f: 12,
            tau: 1.0,
            tau_e: 0.5,
            h_neuro: 16,
            lr: 1e-2,
            steps: 2000,
            batch: 20,
            seed: 0,
            c_cls: 0.5,
            eval_rewire: EvalRewire::Threshold,
            ablation: Ablation::default(),
            optimizer: Optimizer::Sgd,
            momentum: 0.0,
            lr_schedule: LrSchedule::Constant,
            grad_clip: 0.0,
            alpha_fixed: 0.5,
            beta_fixed: 0.1,
            resample_rewire: true,
            gen_hidden: 64,
            encoder_blocks: 2,
            lane_segment_length: 20.0,
            position_scale: 1.0,
            scale_activation: ScaleActivation::Exp,
            scale_floor: 0.0,
            checkpoint_every: 0,
        }
    }
}

impl Config {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Config =
            serde_json::from_str(text).map_err(|e| NestError::Usage(format!("invalid config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| NestError::io(path, e))?;
        Config::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let sizes = [
            ("d", self.d),
            ("s", self.s),
            ("K", self.k),
            ("t_h", self.t_h),
            ("t_f", self.t_f),
            ("h_neuro", self.h_neuro),
            ("batch", self.batch),
            ("gen_hidden", self.gen_hidden),
        ];
        if let Some((name, _)) = sizes.iter().find(|(_, v)| *v == 0) {
            return Err(NestError::Usage(format!("config `{name}` must be >= 1")));
        }
        let positive = [
            ("tau", self.tau),
            ("tau_e", self.tau_e),
            ("lr", self.lr),
            ("lane_segment_length", self.lane_segment_length),
            ("position_scale", self.position_scale),
        ];
        if let Some((name, v)) = positive.iter().find(|(_, v)| !(*v > 0.0 && v.is_finite())) {
            return Err(NestError::Usage(format!("config `{name}` must be > 0, got {v}")));
        }
        for (name, v) in [("alpha_fixed", self.alpha_fixed), ("beta_fixed", self.beta_fixed)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(NestError::Usage(format!("config `{name}` must lie in [0, 1]")));
            }
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(NestError::Usage("config `momentum` must lie in [0, 1)".into()));
        }
        for (name, v) in [("grad_clip", self.grad_clip), ("scale_floor", self.scale_floor)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(NestError::Usage(format!("config `{name}` must be >= 0")));
            }
        }
        if !(self.c_cls >= 0.0) {
            return Err(NestError::Usage("config `c_cls` must be >= 0".into()));
        }
        Ok(())
    }

    /// Learning rate used at `step`.
    pub fn lr_at(&self, step: usize) -> f64 {
        match self.lr_schedule {
            LrSchedule::Constant => self.lr,
            LrSchedule::Cosine => {
                let frac = step as f64 / self.steps.max(1) as f64;
                0.5 * self.lr * (1.0 + (std::f64::consts::PI * frac).cos())
            }
        }
    }

    /// Trajectory modes the predictor emits.
    pub fn num_modes(&self) -> usize {
        if self.ablation.multimodal {
            self.k
        } else {
            1
        }
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let text = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(text.as_bytes()))
    }

    pub fn to_json_value(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_rejected() {
        assert!(Config::from_json(r#"{"d": 8, "bogus": 1}"#).is_err());
        assert!(Config::from_json(r#"{"ablation": {"wings": true}}"#).is_err());
        let c = Config::from_json(r#"{"d": 8, "K": 2, "H": 1}"#).unwrap();
        assert_eq!((c.d, c.k, c.h, c.s), (8, 2, 1, 8));
    }

    #[test]
    fn invalid_sizes_rejected() {
        assert!(Config::from_json(r#"{"d": 0}"#).is_err());
        assert!(Config::from_json(r#"{"tau": 0.0}"#).is_err());
    }

    #[test]
    fn hash_tracks_content() {
        let a = Config::default();
        let mut b = a.clone();
        assert_eq!(a.hash(), b.hash());
        b.seed = 1;
        assert_ne!(a.hash(), b.hash());
        let round: Config = serde_json::from_value(a.to_json_value()).unwrap();
        assert_eq!(round.hash(), a.hash());
    }

    #[test]
    fn methods_match_ablation_table() {
        let m = |c| Ablation::method(c).unwrap();
        assert!(!m('A').neuromodulator && m('A').small_world);
        assert!(!m('B').small_world && m('B').hypergraph);
        assert!(!m('C').hypergraph);
        assert!(!m('D').context_fusion && m('D').neuromodulator);
        assert!(!m('E').multimodal);
        assert_eq!(m('F'), Ablation::default());
        assert!(Ablation::method('G').is_none());
    }
}
