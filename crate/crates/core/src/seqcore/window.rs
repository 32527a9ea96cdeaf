use serde::{Deserialize, Serialize};

use super::{Sequence, SequenceDataset};
use crate::error::{LatticeError, Result};

/// Z-score statistics of a training series (population standard deviation).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub mean: f64,
    pub std: f64,
}

impl NormStats {
    pub fn fit(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(LatticeError::EmptyDataset);
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let std = var.sqrt();
        if !(std > 1e-12) {
            return Err(LatticeError::DegenerateSeries);
        }
        Ok(NormStats { mean, std })
    }

    pub fn apply(&self, v: f64) -> f64 {
        (v - self.mean) / self.std
    }
}

fn difference(series: &[f64]) -> Vec<f64> {
    series.windows(2).map(|w| w[1] - w[0]).collect()
}

fn windows(values: &[f64], window: usize, norm: Option<NormStats>) -> Result<SequenceDataset> {
    if window < 2 {
        return Err(LatticeError::InvalidConfig(format!("window must be >= 2, got {window}")));
    }
    if values.len() < window {
        return Err(LatticeError::InvalidConfig(format!(
            "series of length {} is shorter than window {window}",
            values.len()
        )));
    }
    let values: Vec<f64> = match norm {
        Some(n) => values.iter().map(|&v| n.apply(v)).collect(),
        None => values.to_vec(),
    };
    let sequences = values
        .windows(window)
        .enumerate()
        .map(|(i, w)| Sequence::values(format!("w{i}"), w.to_vec()))
        .collect();
    SequenceDataset::continuous(sequences, norm)
}

/// Rolling windows over a training series. Differencing is applied first; the
/// z-score statistics come from the (differenced) series itself and are stored
/// in the dataset for reuse on held-out data via [`window_with_stats`].
pub fn window_continuous(series: &[f64], window: usize, normalize: bool, difference_first: bool) -> Result<SequenceDataset> {
    let values = if difference_first { difference(series) } else { series.to_vec() };
    let norm = if normalize { Some(NormStats::fit(&values)?) } else { None };
    windows(&values, window, norm)
}

/// Rolling windows over a held-out series using statistics fitted on training data.
pub fn window_with_stats(series: &[f64], window: usize, difference_first: bool, norm: Option<NormStats>) -> Result<SequenceDataset> {
    let values = if difference_first { difference(series) } else { series.to_vec() };
    windows(&values, window, norm)
}

/// Chronological split of a raw series into (train, test) at `train_frac`.
pub fn split_series(series: &[f64], train_frac: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(0.0..=1.0).contains(&train_frac) {
        return Err(LatticeError::InvalidSplit(format!("train fraction {train_frac} outside [0, 1]")));
    }
    let cut = ((series.len() as f64) * train_frac + 1e-9).floor() as usize;
    Ok((series[..cut].to_vec(), series[cut..].to_vec()))
}
