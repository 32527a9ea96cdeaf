use serde::{Deserialize, Serialize};

use super::evaluate::{score_cases, EvalOutcome};
use super::experiment::{fit_seed, relative_improvement, ExperimentConfig, ExperimentData};
use super::stats::{mean, sample_std};
use crate::error::{LatticeError, Result};
use crate::exec::Exec;
use crate::hybrid::Ablation;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmResult {
    pub name: String,
    pub ablation: Ablation,
    /// One outcome per seed, in seed order.
    pub outcomes: Vec<EvalOutcome>,
}

impl ArmResult {
    pub fn values(&self, metric: &str) -> Vec<f64> {
        self.outcomes.iter().map(|o| o.metrics.get(metric).unwrap_or(f64::NAN)).collect()
    }

    pub fn mean(&self, metric: &str) -> f64 {
        mean(&self.values(metric))
    }

    pub fn std(&self, metric: &str) -> f64 {
        sample_std(&self.values(metric))
    }

    pub fn activation_rate(&self) -> f64 {
        mean(&self.outcomes.iter().map(|o| o.activation_rate).collect::<Vec<_>>())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationTable {
    pub seeds: Vec<u64>,
    pub thetas: Vec<f64>,
    /// The four standard arms, LSTM-only first.
    pub arms: Vec<ArmResult>,
}

impl AblationTable {
    /// Mean per-seed relative improvement of `arm` over the first arm, in percent.
    pub fn improvement(&self, arm: usize, metric: &str, higher_is_better: bool) -> f64 {
        let base = self.arms[0].values(metric);
        let vals = self.arms[arm].values(metric);
        mean(&base.iter().zip(&vals).map(|(&b, &v)| relative_improvement(b, v, higher_is_better)).collect::<Vec<_>>())
    }
}

/// Fit once per seed and score every arm on the same backbone and test cases.
pub fn ablation_suite(data: &ExperimentData, cfg: &ExperimentConfig, seeds: &[u64], exec: Exec) -> Result<AblationTable> {
    if seeds.is_empty() {
        return Err(LatticeError::TooFewSamples(0));
    }
    let per_seed = exec.try_map(seeds, |&s| {
        let run = || -> Result<(f64, Vec<EvalOutcome>)> {
            let fit = fit_seed(data, cfg, s, exec)?;
            let outs = Ablation::ARMS
                .iter()
                .map(|(_, a)| score_cases(&fit.predictor, &fit.test_cases, fit.theta, *a))
                .collect::<Result<Vec<_>>>()?;
            Ok((fit.theta, outs))
        };
        run().map_err(|e| LatticeError::SeedRun { seed: s, source: Box::new(e) })
    })?;
    let arms = Ablation::ARMS
        .iter()
        .enumerate()
        .map(|(i, (name, a))| ArmResult {
            name: name.to_string(),
            ablation: *a,
            outcomes: per_seed.iter().map(|(_, o)| o[i]).collect(),
        })
        .collect();
    Ok(AblationTable {
        seeds: seeds.to_vec(),
        thetas: per_seed.iter().map(|(t, _)| *t).collect(),
        arms,
    })
}
