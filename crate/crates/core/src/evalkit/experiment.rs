use serde::{Deserialize, Serialize};

use super::evaluate::{analyze_cases, score_cases, Case, EvalOutcome};
use super::stats::{mean, paired_t_test, sample_std, TTest};
use crate::error::{LatticeError, Result};
use crate::exec::Exec;
use crate::gate::{calibrate_on_cases, ThresholdGrid};
use crate::hybrid::{Ablation, LatticePredictor};
use crate::pipeline::{fit_lattice, FitReport, LatticeConfig};
use crate::seqcore::SequenceDataset;

#[derive(Debug, Clone)]
pub struct ExperimentData {
    pub train: SequenceDataset,
    /// Needed when the threshold is calibrated.
    pub val: Option<SequenceDataset>,
    pub test: SequenceDataset,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExperimentConfig {
    pub lattice: LatticeConfig,
    /// Arm the lattice is compared against; shares the lattice's backbone.
    pub baseline: Ablation,
    /// Calibrate `theta` per seed on the validation data instead of using the configured value.
    pub calibrate: Option<ThresholdGrid>,
}

impl ExperimentConfig {
    pub fn new(lattice: LatticeConfig) -> Self {
        ExperimentConfig { lattice, baseline: Ablation::LSTM_ONLY, calibrate: None }
    }
}

/// A predictor fitted for one seed, with its test cases analyzed once.
pub struct SeedFit {
    pub seed: u64,
    pub predictor: LatticePredictor,
    pub theta: f64,
    pub report: FitReport,
    pub test_cases: Vec<Case>,
}

pub fn fit_seed(data: &ExperimentData, cfg: &ExperimentConfig, seed: u64, exec: Exec) -> Result<SeedFit> {
    let lattice = cfg.lattice.with_seed(seed);
    let (predictor, report) = fit_lattice(&data.train, &lattice, exec)?;
    let theta = match &cfg.calibrate {
        Some(grid) => {
            let val = data
                .val
                .as_ref()
                .ok_or_else(|| LatticeError::InvalidConfig("calibration needs validation data".into()))?;
            let cases = analyze_cases(&predictor, val, exec)?;
            calibrate_on_cases(&predictor, &cases, &grid.values()?, lattice.ablation)?.theta
        }
        None => lattice.gate.theta,
    };
    let test_cases = analyze_cases(&predictor, &data.test, exec)?;
    Ok(SeedFit { seed, predictor, theta, report, test_cases })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedResult {
    pub seed: u64,
    pub theta: f64,
    pub baseline: EvalOutcome,
    pub lattice: EvalOutcome,
    pub final_train_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub metric: String,
    pub higher_is_better: bool,
    pub baseline_mean: f64,
    pub baseline_std: f64,
    pub lattice_mean: f64,
    pub lattice_std: f64,
    /// Per-seed relative improvement in percent, positive when the lattice is better.
    pub improvement_mean: f64,
    pub improvement_std: f64,
    pub test: TTest,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub per_seed: Vec<SeedResult>,
    pub summary: Vec<MetricSummary>,
}

impl EvalReport {
    pub fn metric(&self, name: &str) -> Option<&MetricSummary> {
        self.summary.iter().find(|m| m.metric == name)
    }
}

/// Relative improvement of `new` over `base` in percent.
pub fn relative_improvement(base: f64, new: f64, higher_is_better: bool) -> f64 {
    let gain = if higher_is_better { new - base } else { base - new };
    if gain == 0.0 {
        0.0
    } else {
        100.0 * gain / base.abs()
    }
}

pub fn run_seed(data: &ExperimentData, cfg: &ExperimentConfig, seed: u64, exec: Exec) -> Result<SeedResult> {
    let fit = fit_seed(data, cfg, seed, exec)?;
    let p = &fit.predictor;
    Ok(SeedResult {
        seed,
        theta: fit.theta,
        baseline: score_cases(p, &fit.test_cases, fit.theta, cfg.baseline)?,
        lattice: score_cases(p, &fit.test_cases, fit.theta, cfg.lattice.ablation)?,
        final_train_loss: fit.report.training.epoch_losses.last().copied().unwrap_or(f64::NAN),
    })
}

/// Per-seed fits run through `exec`; results are in seed order.
pub fn multi_seed_run(data: &ExperimentData, cfg: &ExperimentConfig, seeds: &[u64], exec: Exec) -> Result<EvalReport> {
    if seeds.len() < 2 {
        return Err(LatticeError::TooFewSamples(seeds.len()));
    }
    let per_seed = exec.try_map(seeds, |&s| {
        run_seed(data, cfg, s, exec).map_err(|e| LatticeError::SeedRun { seed: s, source: Box::new(e) })
    })?;
    let summary = summarize(&per_seed)?;
    Ok(EvalReport { per_seed, summary })
}

pub fn summarize(per_seed: &[SeedResult]) -> Result<Vec<MetricSummary>> {
    let first = per_seed.first().ok_or(LatticeError::TooFewSamples(0))?;
    first
        .lattice
        .metrics
        .entries()
        .into_iter()
        .map(|(name, _, higher)| {
            let pick = |o: &EvalOutcome| o.metrics.get(name).unwrap_or(f64::NAN);
            let base: Vec<f64> = per_seed.iter().map(|r| pick(&r.baseline)).collect();
            let lat: Vec<f64> = per_seed.iter().map(|r| pick(&r.lattice)).collect();
            let imp: Vec<f64> = base.iter().zip(&lat).map(|(&b, &l)| relative_improvement(b, l, higher)).collect();
            Ok(MetricSummary {
                metric: name.to_string(),
                higher_is_better: higher,
                baseline_mean: mean(&base),
                baseline_std: sample_std(&base),
                lattice_mean: mean(&lat),
                lattice_std: sample_std(&lat),
                improvement_mean: mean(&imp),
                improvement_std: sample_std(&imp),
                test: paired_t_test(&lat, &base)?,
            })
        })
        .collect()
}
