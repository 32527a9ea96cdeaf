//! Sequence-model backbone.
//!
//! [`Backbone`] is what the rest of the system needs from a sequence model: next-step
//! scores and a behavior embedding (the final hidden state). [`LstmBackbone`] is the
//! only implementation.

mod config;
mod gradcheck;
mod lstm;
mod train;

pub use config::{BackboneConfig, Optimizer};
pub use gradcheck::{grad_check, GradCheck};
pub use lstm::{Forward, LstmBackbone, ParamLayout};
pub use train::{train_backbone, train_backbone_with, TrainingLog};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::seqcore::{Mode, SeqView};

/// Final hidden state of the backbone for one sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BehaviorEmbedding(pub Vec<f64>);

impl BehaviorEmbedding {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

/// Next-step output: a distribution over the catalog, or a predicted value.
#[derive(Debug, Clone, PartialEq)]
pub enum NextScores {
    Distribution(Vec<f64>),
    Value(f64),
}

impl NextScores {
    pub fn distribution(&self) -> Option<&[f64]> {
        match self {
            NextScores::Distribution(d) => Some(d),
            NextScores::Value(_) => None,
        }
    }

    pub fn value(&self) -> Option<f64> {
        match self {
            NextScores::Value(v) => Some(*v),
            NextScores::Distribution(_) => None,
        }
    }
}

/// One pass over an input sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct Inference {
    pub embedding: BehaviorEmbedding,
    pub next: NextScores,
}

pub trait Backbone: Send + Sync {
    fn mode(&self) -> Mode;

    fn hidden_dim(&self) -> usize;

    /// Catalog size in discrete mode.
    fn vocab_size(&self) -> Option<usize>;

    /// Embedding and next-step scores from a single forward pass.
    fn infer(&self, input: SeqView<'_>) -> Result<Inference>;

    fn embed(&self, input: SeqView<'_>) -> Result<BehaviorEmbedding> {
        Ok(self.infer(input)?.embedding)
    }

    fn score_next(&self, input: SeqView<'_>) -> Result<NextScores> {
        Ok(self.infer(input)?.next)
    }
}
