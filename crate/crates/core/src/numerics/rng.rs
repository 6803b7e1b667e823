use std::fmt::Display;

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use super::tensor::Tensor;

/// A labelled, counter-addressable random stream.
///
/// Draw `i` of stream `(seed, label)` is the `i`-th 64-bit output of a ChaCha8
/// generator keyed by SHA-256 of the seed and label, so it is the same value on
/// every platform and independent of how many other streams were consumed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RngStream {
    seed: u64,
    label: String,
}

/// Maps 53 random bits onto the open interval (0, 1).
fn open_unit(bits: u64) -> f64 {
    ((bits >> 11) as f64 + 0.5) / (1u64 << 53) as f64
}

impl RngStream {
    pub fn new(seed: u64, label: impl Into<String>) -> Self {
        RngStream {
            seed,
            label: label.into(),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Sub-stream `label/key`.
    pub fn child(&self, key: impl Display) -> RngStream {
        RngStream {
            seed: self.seed,
            label: format!("{}/{}", self.label, key),
        }
    }

    pub fn generator(&self) -> ChaCha8Rng {
        let mut hasher = Sha256::new();
        hasher.update(self.seed.to_le_bytes());
        hasher.update(self.label.as_bytes());
        let key: [u8; 32] = hasher.finalize().into();
        ChaCha8Rng::from_seed(key)
    }

    /// Draw `index` in (0, 1).
    pub fn uniform_at(&self, index: u64) -> f64 {
        let mut g = self.generator();
        // Each u64 consumes two 32-bit words of the keystream.
        g.set_word_pos(u128::from(index) * 2);
        open_unit(g.next_u64())
    }

    /// The first `n` draws in (0, 1).
    pub fn uniforms(&self, n: usize) -> Vec<f64> {
        let mut g = self.generator();
        (0..n).map(|_| open_unit(g.next_u64())).collect()
    }
}

/// Standard Gumbel value for a uniform draw.
pub fn gumbel_from_uniform(u: f64) -> f64 {
    -(-u.ln()).ln()
}

/// i.i.d. standard Gumbel samples, `rows x cols`, from the leading draws of
/// `rng`.
pub fn sample_gumbel(rows: usize, cols: usize, rng: &RngStream) -> Tensor {
    let data = rng
        .uniforms(rows * cols)
        .into_iter()
        .map(gumbel_from_uniform)
        .collect();
    Tensor::from_parts(vec![rows, cols], data)
}
