use serde::{Deserialize, Serialize};

use crate::error::{LatticeError, Result};

/// Cutoffs reported for the ranking metrics.
pub const CUTOFFS: [usize; 3] = [5, 10, 20];

/// Indices of the `k` highest scores, descending; ties go to the lower index.
pub fn top_k(scores: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    let cmp = |a: &usize, b: &usize| scores[*b].total_cmp(&scores[*a]).then(a.cmp(b));
    let k = k.min(idx.len());
    if k < idx.len() && k > 0 {
        idx.select_nth_unstable_by(k - 1, cmp);
        idx.truncate(k);
    }
    idx.sort_by(cmp);
    idx.truncate(k);
    idx
}

/// 1-based position of `target` in the full ranking that [`top_k`] produces.
pub fn rank_of(scores: &[f64], target: usize) -> usize {
    let t = scores[target];
    1 + scores
        .iter()
        .enumerate()
        .filter(|&(j, s)| s.total_cmp(&t).is_gt() || (j < target && s.total_cmp(&t).is_eq()))
        .count()
}

fn position(ranked: &[usize], target: usize, k: usize) -> Option<usize> {
    ranked.iter().take(k).position(|&i| i == target)
}

pub fn hit_rate_at_k(ranked: &[usize], target: usize, k: usize) -> f64 {
    if position(ranked, target, k).is_some() {
        1.0
    } else {
        0.0
    }
}

pub fn ndcg_at_k(ranked: &[usize], target: usize, k: usize) -> f64 {
    position(ranked, target, k).map_or(0.0, |p| 1.0 / (p as f64 + 2.0).log2())
}

/// Reciprocal rank over the given ranking; 0 if the target is absent.
pub fn mrr(ranked: &[usize], target: usize) -> f64 {
    ranked.iter().position(|&i| i == target).map_or(0.0, |p| 1.0 / (p as f64 + 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RankingMetrics {
    /// Indexed like [`CUTOFFS`].
    pub hr: [f64; 3],
    pub ndcg: [f64; 3],
    pub mrr: f64,
}

impl RankingMetrics {
    /// Metrics for a single case whose target sits at 1-based `rank`.
    pub fn from_rank(rank: usize) -> Self {
        let mut m = RankingMetrics { mrr: 1.0 / rank as f64, ..Default::default() };
        for (i, &k) in CUTOFFS.iter().enumerate() {
            if rank <= k {
                m.hr[i] = 1.0;
                m.ndcg[i] = 1.0 / (rank as f64 + 1.0).log2();
            }
        }
        m
    }

    /// Mean over cases, summed in order.
    pub fn mean(cases: &[RankingMetrics]) -> Self {
        let n = cases.len() as f64;
        let mut m = RankingMetrics::default();
        for c in cases {
            for i in 0..3 {
                m.hr[i] += c.hr[i];
                m.ndcg[i] += c.ndcg[i];
            }
            m.mrr += c.mrr;
        }
        for i in 0..3 {
            m.hr[i] /= n;
            m.ndcg[i] /= n;
        }
        m.mrr /= n;
        m
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegressionMetrics {
    pub mse: f64,
    pub mae: f64,
    /// Share of cases where the predicted and actual moves from the last input
    /// value have the same sign (flat counts as its own sign).
    pub direction_accuracy: f64,
}

fn sign(x: f64) -> i8 {
    if x > 0.0 {
        1
    } else if x < 0.0 {
        -1
    } else {
        0
    }
}

pub fn continuous_metrics(preds: &[f64], targets: &[f64], anchors: &[f64]) -> Result<RegressionMetrics> {
    if preds.len() != targets.len() || preds.len() != anchors.len() {
        return Err(LatticeError::LengthMismatch { left: preds.len(), right: targets.len() });
    }
    if preds.is_empty() {
        return Err(LatticeError::NoEvaluableSequences);
    }
    let n = preds.len() as f64;
    let (mut se, mut ae, mut dir) = (0.0, 0.0, 0.0);
    for ((&p, &t), &a) in preds.iter().zip(targets).zip(anchors) {
        se += (p - t) * (p - t);
        ae += (p - t).abs();
        if sign(p - a) == sign(t - a) {
            dir += 1.0;
        }
    }
    Ok(RegressionMetrics {
        mse: se / n,
        mae: ae / n,
        direction_accuracy: dir / n,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum MetricSet {
    Ranking(RankingMetrics),
    Regression(RegressionMetrics),
}

impl MetricSet {
    /// `(name, value, higher_is_better)` in report order.
    pub fn entries(&self) -> Vec<(&'static str, f64, bool)> {
        match self {
            MetricSet::Ranking(m) => vec![
                ("HR@5", m.hr[0], true),
                ("HR@10", m.hr[1], true),
                ("HR@20", m.hr[2], true),
                ("NDCG@5", m.ndcg[0], true),
                ("NDCG@10", m.ndcg[1], true),
                ("NDCG@20", m.ndcg[2], true),
                ("MRR", m.mrr, true),
            ],
            MetricSet::Regression(m) => vec![
                ("MSE", m.mse, false),
                ("MAE", m.mae, false),
                ("DirAcc", m.direction_accuracy, true),
            ],
        }
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.entries().into_iter().find(|e| e.0 == name).map(|e| e.1)
    }

    /// HR@10 in discrete mode, MSE in continuous mode.
    pub fn headline(&self) -> (&'static str, f64, bool) {
        match self {
            MetricSet::Ranking(m) => ("HR@10", m.hr[1], true),
            MetricSet::Regression(m) => ("MSE", m.mse, false),
        }
    }

    pub fn ranking(&self) -> Option<&RankingMetrics> {
        match self {
            MetricSet::Ranking(m) => Some(m),
            MetricSet::Regression(_) => None,
        }
    }

    pub fn regression(&self) -> Option<&RegressionMetrics> {
        match self {
            MetricSet::Regression(m) => Some(m),
            MetricSet::Ranking(_) => None,
        }
    }
}
