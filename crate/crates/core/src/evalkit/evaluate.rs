use serde::{Deserialize, Serialize};

use super::metrics::{continuous_metrics, rank_of, top_k, MetricSet, RankingMetrics};
use crate::backbone::{Backbone, NextScores};
use crate::error::{LatticeError, Result};
use crate::exec::Exec;
use crate::gate::{GateDecision, Phase};
use crate::hybrid::{Ablation, Analysis, LatticePredictor};
use crate::seqcore::{SequenceDataset, Series};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Target {
    Item(usize),
    /// Held-out value and the last input value before it.
    Value { value: f64, anchor: f64 },
}

/// One leave-last-out case: all but the final step is the input.
#[derive(Debug, Clone, PartialEq)]
pub struct Case {
    pub seq_index: usize,
    pub analysis: Analysis,
    pub target: Target,
}

/// Analyze every sequence with at least two steps. Output order follows the dataset.
pub fn analyze_cases<B: Backbone>(pred: &LatticePredictor<B>, ds: &SequenceDataset, exec: Exec) -> Result<Vec<Case>> {
    if ds.mode != pred.mode() {
        return Err(LatticeError::ModeMismatch {
            expected: pred.mode().name(),
            found: ds.mode.name(),
        });
    }
    let idx: Vec<usize> = (0..ds.sequences.len()).filter(|&i| ds.sequences[i].len() >= 2).collect();
    if idx.is_empty() {
        return Err(LatticeError::NoEvaluableSequences);
    }
    exec.try_map(&idx, |&i| {
        let s = &ds.sequences[i];
        let n = s.len();
        let target = match &s.series {
            Series::Items(v) => Target::Item(v[n - 1]),
            Series::Values(v) => Target::Value { value: v[n - 1], anchor: v[n - 2] },
        };
        Ok(Case {
            seq_index: i,
            analysis: pred.analyze(s.view().prefix(n - 1))?,
            target,
        })
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalOutcome {
    pub metrics: MetricSet,
    pub activation_rate: f64,
    pub mean_confidence: f64,
    pub cases: usize,
    /// Number of cases in phases 0, 1, 2.
    pub phase_counts: [usize; 3],
}

/// Metrics over pre-analyzed cases under the given threshold and flags.
pub fn score_cases<B: Backbone>(pred: &LatticePredictor<B>, cases: &[Case], theta: f64, ablation: Ablation) -> Result<EvalOutcome> {
    if cases.is_empty() {
        return Err(LatticeError::NoEvaluableSequences);
    }
    let mut ranks = Vec::new();
    let (mut preds, mut targets, mut anchors) = (Vec::new(), Vec::new(), Vec::new());
    let (mut active, mut conf) = (0usize, 0.0);
    let mut phase_counts = [0usize; 3];
    for c in cases {
        let p = pred.combine(&c.analysis, theta, ablation);
        active += p.decision.active as usize;
        conf += p.decision.confidence;
        phase_counts[p.decision.phase.index() as usize] += 1;
        match (&p.scores, c.target) {
            (NextScores::Distribution(d), Target::Item(t)) => ranks.push(RankingMetrics::from_rank(rank_of(d, t))),
            (NextScores::Value(v), Target::Value { value, anchor }) => {
                preds.push(*v);
                targets.push(value);
                anchors.push(anchor);
            }
            _ => {
                return Err(LatticeError::ModeMismatch {
                    expected: pred.mode().name(),
                    found: "mixed",
                })
            }
        }
    }
    let metrics = if ranks.is_empty() {
        MetricSet::Regression(continuous_metrics(&preds, &targets, &anchors)?)
    } else {
        MetricSet::Ranking(RankingMetrics::mean(&ranks))
    };
    let n = cases.len() as f64;
    Ok(EvalOutcome {
        metrics,
        activation_rate: active as f64 / n,
        mean_confidence: conf / n,
        cases: cases.len(),
        phase_counts,
    })
}

/// Leave-last-out evaluation with the predictor's own threshold and flags.
pub fn evaluate<B: Backbone>(pred: &LatticePredictor<B>, ds: &SequenceDataset, exec: Exec) -> Result<EvalOutcome> {
    let cases = analyze_cases(pred, ds, exec)?;
    score_cases(pred, &cases, pred.gate.theta, pred.ablation)
}

/// Fraction of leave-last-out inputs for which the gate is open.
pub fn activation_rate<B: Backbone>(pred: &LatticePredictor<B>, ds: &SequenceDataset, exec: Exec) -> Result<f64> {
    Ok(evaluate(pred, ds, exec)?.activation_rate)
}

/// One line of the optional per-case prediction dump.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionRow {
    pub seq_index: usize,
    pub decision: GateDecision,
    /// Top-10 items (discrete) or the predicted value.
    pub top: Vec<usize>,
    pub value: Option<f64>,
}

impl PredictionRow {
    pub fn phase(&self) -> Phase {
        self.decision.phase
    }
}

pub fn prediction_rows<B: Backbone>(pred: &LatticePredictor<B>, cases: &[Case], theta: f64, ablation: Ablation) -> Vec<PredictionRow> {
    cases
        .iter()
        .map(|c| {
            let p = pred.combine(&c.analysis, theta, ablation);
            let (top, value) = match &p.scores {
                NextScores::Distribution(d) => (top_k(d, 10), None),
                NextScores::Value(v) => (Vec::new(), Some(*v)),
            };
            PredictionRow { seq_index: c.seq_index, decision: p.decision, top, value }
        })
        .collect()
}
