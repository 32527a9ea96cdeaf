//! End-to-end fitting: backbone, archetypes, confidence distribution, prior.

use serde::{Deserialize, Serialize};

use crate::archetype::{fit_kmeans, fit_pattern_means, fit_transitions, ArchetypeModel, ArchetypeStructure, KMeansConfig};
use crate::backbone::{train_backbone_with, Backbone, BackboneConfig, BehaviorEmbedding, LstmBackbone, TrainingLog};
use crate::error::{LatticeError, Result};
use crate::exec::Exec;
use crate::gate::{DistanceDistribution, GateConfig};
use crate::hybrid::{Ablation, LatticePredictor, PopularityPrior};
use crate::seqcore::{Mode, SequenceDataset};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatticeConfig {
    pub backbone: BackboneConfig,
    pub num_archetypes: usize,
    /// Laplace smoothing of the transition matrices.
    pub alpha: f64,
    pub kmeans_max_iters: usize,
    pub kmeans_restarts: usize,
    pub gate: GateConfig,
    pub popularity_weight: f64,
    pub ablation: Ablation,
}

impl Default for LatticeConfig {
    fn default() -> Self {
        LatticeConfig {
            backbone: BackboneConfig::default(),
            num_archetypes: 5,
            alpha: 1.0,
            kmeans_max_iters: 300,
            kmeans_restarts: 10,
            gate: GateConfig::default(),
            popularity_weight: 0.5,
            ablation: Ablation::FULL,
        }
    }
}

impl LatticeConfig {
    pub fn validate(&self) -> Result<()> {
        self.backbone.validate()?;
        self.gate.validate()?;
        if self.num_archetypes == 0 {
            return Err(LatticeError::InvalidConfig("num_archetypes must be >= 1".into()));
        }
        if !(self.alpha > 0.0) {
            return Err(LatticeError::InvalidConfig(format!("alpha must be > 0, got {}", self.alpha)));
        }
        if !(0.0..=1.0).contains(&self.popularity_weight) {
            return Err(LatticeError::InvalidConfig("popularity_weight outside [0, 1]".into()));
        }
        Ok(())
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.backbone.seed = seed;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    pub training: TrainingLog,
    pub kmeans_inertia_trace: Vec<f64>,
    pub kmeans_iterations: usize,
}

/// Final-state embedding of every sequence, in dataset order.
pub fn embed_all<B: Backbone>(backbone: &B, ds: &SequenceDataset, exec: Exec) -> Result<Vec<BehaviorEmbedding>> {
    exec.try_map(&ds.sequences, |s| backbone.embed(s.view()))
}

/// Fit archetypes, confidence distribution and prior on top of a trained backbone.
pub fn assemble<B: Backbone>(
    backbone: B,
    train: &SequenceDataset,
    cfg: &LatticeConfig,
    exec: Exec,
) -> Result<(LatticePredictor<B>, crate::archetype::KMeansFit)> {
    let embeddings = embed_all(&backbone, train, exec)?;
    let points: Vec<Vec<f64>> = embeddings.iter().map(|e| e.0.clone()).collect();
    let km = fit_kmeans(
        &points,
        &KMeansConfig {
            max_iters: cfg.kmeans_max_iters,
            n_init: cfg.kmeans_restarts,
            ..KMeansConfig::new(cfg.num_archetypes, cfg.backbone.seed)
        },
    )?;
    let structure = match train.mode {
        Mode::Discrete => ArchetypeStructure::Transitions(fit_transitions(train, &embeddings, &km.centroids, cfg.alpha)?),
        Mode::Continuous => ArchetypeStructure::PatternMeans(fit_pattern_means(train, &embeddings, &km.centroids)?),
    };
    let distances = DistanceDistribution::fit(&embeddings, &km.centroids)?;
    let popularity = match train.mode {
        Mode::Discrete => Some(PopularityPrior::fit(train)?),
        Mode::Continuous => None,
    };
    let pred = LatticePredictor {
        backbone,
        archetypes: ArchetypeModel { centroids: km.centroids.clone(), structure },
        distances,
        gate: cfg.gate,
        popularity,
        popularity_weight: cfg.popularity_weight,
        ablation: cfg.ablation,
    };
    Ok((pred, km))
}

pub fn fit_lattice(train: &SequenceDataset, cfg: &LatticeConfig, exec: Exec) -> Result<(LatticePredictor, FitReport)> {
    cfg.validate()?;
    if train.mode != cfg.backbone.mode {
        return Err(LatticeError::ModeMismatch {
            expected: cfg.backbone.mode.name(),
            found: train.mode.name(),
        });
    }
    let (backbone, training): (LstmBackbone, TrainingLog) = train_backbone_with(train, &cfg.backbone, exec)?;
    let (pred, km) = assemble(backbone, train, cfg, exec)?;
    Ok((
        pred,
        FitReport {
            training,
            kmeans_inertia_trace: km.inertia_trace,
            kmeans_iterations: km.iterations,
        },
    ))
}
