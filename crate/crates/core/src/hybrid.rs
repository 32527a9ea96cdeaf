//! Confidence-gated combination of backbone and archetype predictions.

use serde::{Deserialize, Serialize};

use crate::archetype::{ArchetypeModel, ArchetypeOutput, SoftAssignment};
use crate::backbone::{Backbone, BehaviorEmbedding, LstmBackbone, NextScores};
use crate::error::{LatticeError, Result};
use crate::evalkit::top_k;
use crate::gate::{confidence, decide_in_phase, Confidence, DistanceDistribution, GateConfig, GateDecision, GateReason, Phase};
use crate::seqcore::{Mode, SeqView, SequenceDataset, Series};

/// Normalized global item frequencies over the training corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopularityPrior(pub Vec<f64>);

impl PopularityPrior {
    pub fn fit(train: &SequenceDataset) -> Result<Self> {
        let v = train.vocab_size().ok_or(LatticeError::ModeMismatch {
            expected: "discrete",
            found: train.mode.name(),
        })?;
        let mut counts = vec![0u64; v];
        for s in &train.sequences {
            if let Series::Items(items) = &s.series {
                items.iter().for_each(|&i| counts[i] += 1);
            }
        }
        let total: u64 = counts.iter().sum();
        if total == 0 {
            return Err(LatticeError::EmptyDataset);
        }
        Ok(PopularityPrior(counts.into_iter().map(|c| c as f64 / total as f64).collect()))
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }
}

/// Which parts of the hybrid are switched on. The four ablation arms are
/// presets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ablation {
    pub archetypes: bool,
    /// When off, archetypes are mixed in whenever the phase allows it.
    pub gating: bool,
    /// When off, every sequence is treated as phase 2 and the popularity prior is unused.
    pub phases: bool,
}

impl Ablation {
    pub const LSTM_ONLY: Ablation = Ablation { archetypes: false, gating: false, phases: false };
    pub const NO_GATING: Ablation = Ablation { archetypes: true, gating: false, phases: false };
    pub const GATED: Ablation = Ablation { archetypes: true, gating: true, phases: false };
    pub const FULL: Ablation = Ablation { archetypes: true, gating: true, phases: true };

    pub const ARMS: [(&'static str, Ablation); 4] = [
        ("LSTM-only", Ablation::LSTM_ONLY),
        ("LSTM + Archetypes (no gating)", Ablation::NO_GATING),
        ("LSTM + Archetypes + Confidence Gating", Ablation::GATED),
        ("Full Lattice", Ablation::FULL),
    ];
}

impl Default for Ablation {
    fn default() -> Self {
        Ablation::FULL
    }
}

/// Everything about one input that does not depend on `theta` or the ablation
/// flags, so threshold sweeps and ablation arms can share a single backbone pass.
#[derive(Debug, Clone, PartialEq)]
pub struct Analysis {
    pub input_len: usize,
    pub backbone: NextScores,
    pub embedding: BehaviorEmbedding,
    pub confidence: Confidence,
    pub assignment: SoftAssignment,
    pub archetype: ArchetypeOutput,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub scores: NextScores,
    pub decision: GateDecision,
}

impl Prediction {
    /// Item indices by descending score; ties go to the lower index.
    pub fn topk(&self, k: usize) -> Result<Vec<usize>> {
        let d = self.scores.distribution().ok_or(LatticeError::ModeMismatch {
            expected: "discrete",
            found: "continuous",
        })?;
        if k == 0 || k > d.len() {
            return Err(LatticeError::InvalidConfig(format!("k = {k} outside 1..={}", d.len())));
        }
        Ok(top_k(d, k))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LatticePredictor<B: Backbone = LstmBackbone> {
    pub backbone: B,
    pub archetypes: ArchetypeModel,
    pub distances: DistanceDistribution,
    pub gate: GateConfig,
    /// Discrete mode only.
    pub popularity: Option<PopularityPrior>,
    /// Weight of the popularity prior in the cold-start blend.
    pub popularity_weight: f64,
    pub ablation: Ablation,
}

impl<B: Backbone> LatticePredictor<B> {
    pub fn mode(&self) -> Mode {
        self.backbone.mode()
    }

    pub fn analyze(&self, input: SeqView<'_>) -> Result<Analysis> {
        if input.is_empty() {
            return Err(LatticeError::EmptyDataset);
        }
        let inf = self.backbone.infer(input)?;
        let conf = confidence(&inf.embedding, &self.archetypes.centroids, &self.distances);
        let assignment = self.archetypes.soft_assign(&inf.embedding)?;
        let archetype = self.archetypes.score_sequence(&assignment, input)?;
        Ok(Analysis {
            input_len: input.len(),
            backbone: inf.next,
            embedding: inf.embedding,
            confidence: conf,
            assignment,
            archetype,
        })
    }

    pub fn decision(&self, a: &Analysis, theta: f64, ablation: Ablation) -> GateDecision {
        let phase = if ablation.phases { self.gate.phase(a.input_len) } else { Phase::Normal };
        let theta = if ablation.gating { theta } else { f64::NEG_INFINITY };
        let mut d = decide_in_phase(&a.confidence, phase, theta);
        if !ablation.archetypes {
            d.active = false;
            d.reason = GateReason::Disabled;
        }
        d
    }

    /// Final scores for an analyzed input under the given threshold and flags.
    pub fn combine(&self, a: &Analysis, theta: f64, ablation: Ablation) -> Prediction {
        let decision = self.decision(a, theta, ablation);
        let lambda = self.gate.lambda;
        let cold = ablation.phases && decision.phase == Phase::ColdStart;
        let warm = ablation.phases && decision.phase == Phase::WarmUp;
        let scores = match (&a.backbone, &a.archetype) {
            (b, _) if !ablation.archetypes => b.clone(),
            (NextScores::Distribution(b), ArchetypeOutput::Distribution(arch)) => {
                if cold {
                    NextScores::Distribution(self.popularity_blend(b))
                } else if !decision.active {
                    NextScores::Distribution(b.clone())
                } else {
                    let base = if warm { self.popularity_blend(b) } else { b.clone() };
                    NextScores::Distribution(
                        base.iter().zip(arch).map(|(x, y)| lambda * x + (1.0 - lambda) * y).collect(),
                    )
                }
            }
            (NextScores::Value(b), ArchetypeOutput::Value(arch)) if decision.active => {
                NextScores::Value(lambda * b + (1.0 - lambda) * arch)
            }
            (b, _) => b.clone(),
        };
        Prediction { scores, decision }
    }

    fn popularity_blend(&self, b: &[f64]) -> Vec<f64> {
        match &self.popularity {
            Some(p) => {
                let w = self.popularity_weight;
                b.iter().zip(p.probs()).map(|(x, q)| (1.0 - w) * x + w * q).collect()
            }
            None => b.to_vec(),
        }
    }

    pub fn predict(&self, input: SeqView<'_>) -> Result<Prediction> {
        let a = self.analyze(input)?;
        Ok(self.combine(&a, self.gate.theta, self.ablation))
    }

    pub fn predict_topk(&self, input: SeqView<'_>, k: usize) -> Result<Vec<usize>> {
        self.predict(input)?.topk(k)
    }

    pub fn predict_value(&self, input: SeqView<'_>) -> Result<f64> {
        self.predict(input)?.scores.value().ok_or(LatticeError::ModeMismatch {
            expected: "continuous",
            found: "discrete",
        })
    }
}
