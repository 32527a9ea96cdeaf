use serde::{Deserialize, Serialize};

use crate::error::{LatticeError, Result};
use crate::seqcore::Mode;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Optimizer {
    /// Plain mini-batch SGD.
    Sgd,
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

impl Optimizer {
    pub fn adam() -> Self {
        Optimizer::Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl std::str::FromStr for Optimizer {
    type Err = LatticeError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sgd" => Ok(Optimizer::Sgd),
            "adam" => Ok(Optimizer::adam()),
            other => Err(LatticeError::InvalidConfig(format!("unknown optimizer {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BackboneConfig {
    pub mode: Mode,
    pub embed_dim: usize,
    pub hidden_dim: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub optimizer: Optimizer,
    /// Global gradient-norm clip; `0` disables clipping.
    pub clip_norm: f64,
}

impl Default for BackboneConfig {
    /// Embedding 32, hidden 64, 5 epochs, batch 256, learning rate 0.001, SGD.
    fn default() -> Self {
        BackboneConfig {
            mode: Mode::Discrete,
            embed_dim: 32,
            hidden_dim: 64,
            epochs: 5,
            batch_size: 256,
            learning_rate: 0.001,
            seed: 0,
            optimizer: Optimizer::Sgd,
            clip_norm: 5.0,
        }
    }
}

impl BackboneConfig {
    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("embed_dim", self.embed_dim),
            ("hidden_dim", self.hidden_dim),
            ("epochs", self.epochs),
            ("batch_size", self.batch_size),
        ];
        if let Some((name, _)) = counts.iter().find(|(_, v)| *v == 0) {
            return Err(LatticeError::InvalidConfig(format!("{name} must be >= 1")));
        }
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(LatticeError::InvalidConfig(format!(
                "learning_rate must be > 0, got {}",
                self.learning_rate
            )));
        }
        if !(self.clip_norm >= 0.0) {
            return Err(LatticeError::InvalidConfig("clip_norm must be >= 0".into()));
        }
        Ok(())
    }
}
