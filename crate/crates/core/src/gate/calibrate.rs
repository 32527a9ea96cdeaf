use serde::{Deserialize, Serialize};

use crate::backbone::Backbone;
use crate::error::{LatticeError, Result};
use crate::evalkit::{analyze_cases, score_cases, Case};
use crate::exec::Exec;
use crate::hybrid::{Ablation, LatticePredictor};
use crate::seqcore::SequenceDataset;

/// Inclusive, evenly spaced threshold candidates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdGrid {
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
}

impl Default for ThresholdGrid {
    fn default() -> Self {
        ThresholdGrid { lo: 0.2, hi: 0.6, step: 0.1 }
    }
}

impl ThresholdGrid {
    pub fn values(&self) -> Result<Vec<f64>> {
        let ok = self.lo.is_finite() && self.hi.is_finite() && self.step > 0.0 && self.lo <= self.hi;
        if !ok {
            return Err(LatticeError::EmptyGrid);
        }
        let n = ((self.hi - self.lo) / self.step + 1e-9).floor() as usize + 1;
        // rounded so that 0.2 + 3·0.1 prints as 0.5
        Ok((0..n).map(|i| ((self.lo + i as f64 * self.step) * 1e9).round() / 1e9).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationRow {
    pub theta: f64,
    /// Share of validation inputs with the gate open.
    pub coverage: f64,
    /// HR@10 in discrete mode, MSE in continuous mode.
    pub metric: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub theta: f64,
    pub metric_name: String,
    pub rows: Vec<CalibrationRow>,
}

/// Sweep the grid on validation data and keep the threshold with the best
/// validation metric; ties go to the larger threshold.
pub fn calibrate_threshold<B: Backbone>(
    pred: &LatticePredictor<B>,
    val: &SequenceDataset,
    grid: &ThresholdGrid,
    exec: Exec,
) -> Result<Calibration> {
    let thetas = grid.values()?;
    let cases = analyze_cases(pred, val, exec)?;
    calibrate_on_cases(pred, &cases, &thetas, pred.ablation)
}

pub fn calibrate_on_cases<B: Backbone>(
    pred: &LatticePredictor<B>,
    cases: &[Case],
    thetas: &[f64],
    ablation: Ablation,
) -> Result<Calibration> {
    if thetas.is_empty() {
        return Err(LatticeError::EmptyGrid);
    }
    let mut rows = Vec::with_capacity(thetas.len());
    let mut best: Option<(f64, f64)> = None;
    let mut name = "";
    for &theta in thetas {
        let out = score_cases(pred, cases, theta, ablation)?;
        let (n, metric, higher) = out.metrics.headline();
        name = n;
        let quality = if higher { metric } else { -metric };
        if best.is_none_or(|(_, q)| quality >= q) {
            best = Some((theta, quality));
        }
        rows.push(CalibrationRow { theta, coverage: out.activation_rate, metric });
    }
    Ok(Calibration {
        theta: best.map(|b| b.0).unwrap_or(thetas[0]),
        metric_name: name.to_string(),
        rows,
    })
}
