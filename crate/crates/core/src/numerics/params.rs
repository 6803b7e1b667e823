use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::rng::RngStream;
use super::tensor::Tensor;
use crate::error::{NestError, Result};

pub const FORMAT_VERSION: &str = "nest-params/1";

/// Named parameter tensors. Iteration order is by name.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParamStore {
    tensors: BTreeMap<String, Tensor>,
}

/// Shape and fan-in of one registered parameter.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamSpec {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub fan_in: usize,
}

impl ParamSpec {
    pub fn new(name: impl Into<String>, rows: usize, cols: usize, fan_in: usize) -> Self {
        ParamSpec {
            name: name.into(),
            rows,
            cols,
            fan_in,
        }
    }
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) initialization. Each tensor
    /// draws from its own child stream keyed by name, so adding or removing a
    /// parameter never shifts the values of the others.
    pub fn init(registry: &[ParamSpec], rng: &RngStream) -> Result<Self> {
        let mut store = ParamStore::new();
        for spec in registry {
            if store.tensors.contains_key(&spec.name) {
                return Err(NestError::Param(format!("duplicate parameter `{}`", spec.name)));
            }
            let bound = 1.0 / (spec.fan_in.max(1) as f64).sqrt();
            let data = rng
                .child(&spec.name)
                .uniforms(spec.rows * spec.cols)
                .into_iter()
                .map(|u| (2.0 * u - 1.0) * bound)
                .collect();
            store.insert(&spec.name, Tensor::matrix(spec.rows, spec.cols, data)?);
        }
        Ok(store)
    }

    pub fn insert(&mut self, name: impl Into<String>, t: Tensor) {
        self.tensors.insert(name.into(), t);
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.tensors.get(name)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.tensors.get_mut(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Tensor)> {
        self.tensors.iter()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.tensors.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn num_scalars(&self) -> usize {
        self.tensors.values().map(Tensor::len).sum()
    }

    /// Checks names and shapes against an architecture registry.
    pub fn check_registry(&self, registry: &[ParamSpec]) -> Result<()> {
        if registry.len() != self.tensors.len() {
            return Err(NestError::Param(format!(
                "registry has {} parameters, store has {}",
                registry.len(),
                self.tensors.len()
            )));
        }
        for spec in registry {
            let t = self
                .get(&spec.name)
                .ok_or_else(|| NestError::Param(format!("missing parameter `{}`", spec.name)))?;
            if t.dims() != (spec.rows, spec.cols) {
                return Err(NestError::Param(format!(
                    "`{}` has shape {:?}, expected {}x{}",
                    spec.name,
                    t.shape(),
                    spec.rows,
                    spec.cols
                )));
            }
        }
        Ok(())
    }
}

/// On-disk checkpoint: `{version, config_hash, config, tensors}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub version: String,
    pub config_hash: String,
    /// Full configuration the tensors were produced under; lets `eval` and
    /// `predict` rebuild the architecture from the checkpoint alone.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<serde_json::Value>,
    pub tensors: BTreeMap<String, Tensor>,
}

impl Checkpoint {
    pub fn new(params: &ParamStore, config_hash: &str, config: Option<serde_json::Value>) -> Self {
        Checkpoint {
            version: FORMAT_VERSION.to_string(),
            config_hash: config_hash.to_string(),
            config,
            tensors: params.tensors.clone(),
        }
    }

    pub fn params(&self) -> ParamStore {
        ParamStore {
            tensors: self.tensors.clone(),
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(self)?;
        fs::write(path, text).map_err(|e| NestError::io(path, e))
    }

    /// Loads a checkpoint; with `expected_hash` set, refuses a checkpoint
    /// written under a different configuration.
    pub fn load(path: &Path, expected_hash: Option<&str>) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| NestError::io(path, e))?;
        let ckpt: Checkpoint = serde_json::from_str(&text)
            .map_err(|e| NestError::Checkpoint(format!("{}: {e}", path.display())))?;
        if ckpt.version != FORMAT_VERSION {
            return Err(NestError::Checkpoint(format!(
                "unsupported version `{}` (expected `{FORMAT_VERSION}`)",
                ckpt.version
            )));
        }
        if let Some(expected) = expected_hash {
            if expected != ckpt.config_hash {
                return Err(NestError::ConfigHash {
                    checkpoint: ckpt.config_hash,
                    config: expected.to_string(),
                });
            }
        }
        Ok(ckpt)
    }
}
