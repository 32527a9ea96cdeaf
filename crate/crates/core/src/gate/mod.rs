//! Percentile-rank confidence and the binary archetype gate.

mod calibrate;

pub use calibrate::{calibrate_on_cases, calibrate_threshold, Calibration, CalibrationRow, ThresholdGrid};

use serde::{Deserialize, Serialize};

use crate::archetype::nearest_centroid;
use crate::backbone::BehaviorEmbedding;
use crate::error::{LatticeError, Result};

/// Minimum centroid distances of the training embeddings, ascending.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct DistanceDistribution {
    sorted: Vec<f64>,
}

impl DistanceDistribution {
    pub fn from_distances(mut d: Vec<f64>) -> Result<Self> {
        if d.is_empty() {
            return Err(LatticeError::EmptyDataset);
        }
        if d.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(LatticeError::InvalidConfig("distances must be finite and non-negative".into()));
        }
        d.sort_by(f64::total_cmp);
        Ok(DistanceDistribution { sorted: d })
    }

    /// `min_k ‖e − c_k‖` for every training embedding.
    pub fn fit(train_embeddings: &[BehaviorEmbedding], centroids: &[Vec<f64>]) -> Result<Self> {
        if centroids.is_empty() {
            return Err(LatticeError::InvalidConfig("no centroids".into()));
        }
        Self::from_distances(
            train_embeddings
                .iter()
                .map(|e| nearest_centroid(e.as_slice(), centroids).1)
                .collect(),
        )
    }

    pub fn sorted(&self) -> &[f64] {
        &self.sorted
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.sorted.iter().sum::<f64>() / self.sorted.len() as f64
    }

    /// Fraction of training distances `<= d_min`.
    pub fn percentile(&self, d_min: f64) -> f64 {
        self.sorted.partition_point(|&x| x <= d_min) as f64 / self.sorted.len() as f64
    }
}

impl TryFrom<Vec<f64>> for DistanceDistribution {
    type Error = LatticeError;

    fn try_from(d: Vec<f64>) -> Result<Self> {
        DistanceDistribution::from_distances(d)
    }
}

impl From<DistanceDistribution> for Vec<f64> {
    fn from(d: DistanceDistribution) -> Self {
        d.sorted
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Confidence {
    /// `1 − percentile(d_min)`, in `[0, 1]`.
    pub value: f64,
    pub d_min: f64,
    pub nearest: usize,
}

pub fn confidence(e: &BehaviorEmbedding, centroids: &[Vec<f64>], dist: &DistanceDistribution) -> Confidence {
    let (nearest, d_min) = nearest_centroid(e.as_slice(), centroids);
    Confidence {
        value: 1.0 - dist.percentile(d_min),
        d_min,
        nearest,
    }
}

/// Sequence-length tier of the multi-phase policy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Phase {
    /// Ultra-cold start: archetypes off regardless of confidence.
    ColdStart = 0,
    WarmUp = 1,
    Normal = 2,
}

impl Phase {
    pub fn index(self) -> u8 {
        self as u8
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GateReason {
    BelowTheta,
    Phase0,
    Active,
    /// Archetype scoring is switched off altogether.
    Disabled,
}

impl GateReason {
    pub fn name(self) -> &'static str {
        match self {
            GateReason::BelowTheta => "below_theta",
            GateReason::Phase0 => "phase0",
            GateReason::Active => "active",
            GateReason::Disabled => "disabled",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GateConfig {
    pub theta: f64,
    /// Sequences of at most this many steps are in phase 0.
    pub phase0_max_len: usize,
    /// Sequences longer than `phase0_max_len` and at most this long are in phase 1.
    pub phase1_max_len: usize,
    pub lambda: f64,
}

impl Default for GateConfig {
    fn default() -> Self {
        GateConfig {
            theta: 0.4,
            phase0_max_len: 3,
            phase1_max_len: 10,
            lambda: 0.5,
        }
    }
}

impl GateConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.theta) {
            return Err(LatticeError::InvalidConfig(format!("theta {} outside [0, 1]", self.theta)));
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(LatticeError::InvalidConfig(format!("lambda {} outside [0, 1]", self.lambda)));
        }
        if self.phase0_max_len >= self.phase1_max_len {
            return Err(LatticeError::InvalidConfig("phase0_max_len must be < phase1_max_len".into()));
        }
        Ok(())
    }

    pub fn phase(&self, seq_len: usize) -> Phase {
        if seq_len <= self.phase0_max_len {
            Phase::ColdStart
        } else if seq_len <= self.phase1_max_len {
            Phase::WarmUp
        } else {
            Phase::Normal
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GateDecision {
    pub confidence: f64,
    pub d_min: f64,
    pub nearest_archetype: usize,
    pub active: bool,
    pub phase: Phase,
    pub reason: GateReason,
}

/// Gate for a given phase: active iff phase ≥ 1 and `confidence ≥ theta`.
pub fn decide_in_phase(conf: &Confidence, phase: Phase, theta: f64) -> GateDecision {
    let reason = if phase == Phase::ColdStart {
        GateReason::Phase0
    } else if conf.value >= theta {
        GateReason::Active
    } else {
        GateReason::BelowTheta
    };
    GateDecision {
        confidence: conf.value,
        d_min: conf.d_min,
        nearest_archetype: conf.nearest,
        active: reason == GateReason::Active,
        phase,
        reason,
    }
}

pub fn decide(conf: &Confidence, seq_len: usize, cfg: &GateConfig) -> GateDecision {
    decide_in_phase(conf, cfg.phase(seq_len), cfg.theta)
}
