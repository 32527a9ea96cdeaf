use rand::seq::SliceRandom;

use super::{BackboneConfig, LstmBackbone, Optimizer};
use crate::error::{LatticeError, Result};
use crate::exec::Exec;
use crate::rng;
use crate::seqcore::{Mode, SequenceDataset};

/// Sequences per gradient shard. Shards are summed in a fixed order, which keeps
/// training bit-identical across execution modes and thread counts.
const SHARD: usize = 8;

/// Mean per-position training loss of every epoch, measured before each update.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingLog {
    pub epoch_losses: Vec<f64>,
}

pub fn train_backbone(train: &SequenceDataset, cfg: &BackboneConfig) -> Result<(LstmBackbone, TrainingLog)> {
    train_backbone_with(train, cfg, Exec::default())
}

/// Mini-batch training with teacher forcing. Batches are bucketed by length.
pub fn train_backbone_with(train: &SequenceDataset, cfg: &BackboneConfig, exec: Exec) -> Result<(LstmBackbone, TrainingLog)> {
    cfg.validate()?;
    if train.mode != cfg.mode {
        return Err(LatticeError::ModeMismatch {
            expected: cfg.mode.name(),
            found: train.mode.name(),
        });
    }
    let vocab = match cfg.mode {
        Mode::Discrete => Some(train.vocab_size().ok_or(LatticeError::EmptyDataset)?),
        Mode::Continuous => None,
    };
    let usable: Vec<usize> = (0..train.len()).filter(|&i| train.sequences[i].len() >= 2).collect();
    if usable.is_empty() {
        return Err(LatticeError::EmptyDataset);
    }
    let mut model = LstmBackbone::init(*cfg, vocab)?;
    for s in &usable {
        model.check_input(train.sequences[*s].view())?;
    }
    let mut opt = OptimizerState::new(cfg.optimizer, model.num_params());
    let mut log = TrainingLog { epoch_losses: Vec::with_capacity(cfg.epochs) };

    for epoch in 0..cfg.epochs {
        let mut rng = rng::rng_for(cfg.seed, rng::STREAM_SHUFFLE, epoch as u64);
        let mut order = usable.clone();
        order.shuffle(&mut rng);
        order.sort_by_key(|&i| train.sequences[i].len());
        let mut batches: Vec<&[usize]> = order.chunks(cfg.batch_size).collect();
        batches.shuffle(&mut rng);

        let (mut epoch_loss, mut epoch_positions) = (0.0, 0usize);
        for batch in batches {
            let shards: Vec<&[usize]> = batch.chunks(SHARD).collect();
            let partial = exec.map(&shards, |shard| {
                let mut g = vec![0.0; model.num_params()];
                let (mut loss, mut count) = (0.0, 0);
                for &i in *shard {
                    let (l, c) = model.loss_and_grad(train.sequences[i].view(), Some(&mut g));
                    loss += l;
                    count += c;
                }
                (loss, count, g)
            });
            let mut grad = vec![0.0; model.num_params()];
            let (mut loss, mut count) = (0.0, 0usize);
            for (l, c, g) in partial {
                loss += l;
                count += c;
                grad.iter_mut().zip(&g).for_each(|(a, b)| *a += b);
            }
            if !loss.is_finite() {
                return Err(LatticeError::TrainingDiverged { epoch });
            }
            epoch_loss += loss;
            epoch_positions += count;
            let scale = 1.0 / count as f64;
            grad.iter_mut().for_each(|g| *g *= scale);
            clip(&mut grad, cfg.clip_norm);
            opt.step(&mut model.params, &grad, cfg.learning_rate);
        }
        let mean = epoch_loss / epoch_positions as f64;
        if !mean.is_finite() || model.params.iter().any(|p| !p.is_finite()) {
            return Err(LatticeError::TrainingDiverged { epoch });
        }
        log.epoch_losses.push(mean);
    }
    Ok((model, log))
}

fn clip(grad: &mut [f64], max_norm: f64) {
    if max_norm <= 0.0 {
        return;
    }
    let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
    if norm > max_norm {
        let s = max_norm / norm;
        grad.iter_mut().for_each(|g| *g *= s);
    }
}

enum OptimizerState {
    Sgd,
    Adam {
        beta1: f64,
        beta2: f64,
        eps: f64,
        t: i32,
        m: Vec<f64>,
        v: Vec<f64>,
    },
}

impl OptimizerState {
    fn new(kind: Optimizer, n: usize) -> Self {
        match kind {
            Optimizer::Sgd => OptimizerState::Sgd,
            Optimizer::Adam { beta1, beta2, eps } => OptimizerState::Adam {
                beta1,
                beta2,
                eps,
                t: 0,
                m: vec![0.0; n],
                v: vec![0.0; n],
            },
        }
    }

    fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64) {
        match self {
            OptimizerState::Sgd => params.iter_mut().zip(grad).for_each(|(p, g)| *p -= lr * g),
            OptimizerState::Adam { beta1, beta2, eps, t, m, v } => {
                *t += 1;
                let c1 = 1.0 - beta1.powi(*t);
                let c2 = 1.0 - beta2.powi(*t);
                for i in 0..params.len() {
                    m[i] = *beta1 * m[i] + (1.0 - *beta1) * grad[i];
                    v[i] = *beta2 * v[i] + (1.0 - *beta2) * grad[i] * grad[i];
                    params[i] -= lr * (m[i] / c1) / ((v[i] / c2).sqrt() + *eps);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backbone::Backbone;
    use crate::seqcore::{ItemVocab, SeqView, Sequence};

    fn cyclic_corpus() -> SequenceDataset {
        let seqs = (0..20).map(|u| Sequence::items(format!("u{u}"), vec![0, 1, 2, 0, 1, 2])).collect();
        SequenceDataset::discrete(ItemVocab::identity(3), seqs).unwrap()
    }

    fn small_cfg() -> BackboneConfig {
        BackboneConfig {
            embed_dim: 4,
            hidden_dim: 8,
            epochs: 30,
            batch_size: 8,
            learning_rate: 0.1,
            seed: 3,
            ..Default::default()
        }
    }

    #[test]
    fn loss_decreases_on_cyclic_corpus() {
        let (_, log) = train_backbone(&cyclic_corpus(), &small_cfg()).unwrap();
        assert!(log.epoch_losses.last().unwrap() < log.epoch_losses.first().unwrap());
    }

    #[test]
    fn canonical_config_still_reduces_loss() {
        let cfg = BackboneConfig { epochs: 5, ..Default::default() };
        let (_, log) = train_backbone(&cyclic_corpus(), &cfg).unwrap();
        assert_eq!(log.epoch_losses.len(), 5);
        assert!(log.epoch_losses[4] < log.epoch_losses[0]);
    }

    #[test]
    fn deterministic_and_mode_independent() {
        let ds = cyclic_corpus();
        let (a, _) = train_backbone_with(&ds, &small_cfg(), Exec::Parallel).unwrap();
        let (b, _) = train_backbone_with(&ds, &small_cfg(), Exec::Parallel).unwrap();
        let (c, _) = train_backbone_with(&ds, &small_cfg(), Exec::Sequential).unwrap();
        assert_eq!(a.params(), b.params());
        assert_eq!(a.params(), c.params());
    }

    #[test]
    fn learns_deterministic_transition() {
        let (m, _) = train_backbone(&cyclic_corpus(), &BackboneConfig { optimizer: Optimizer::adam(), learning_rate: 0.05, ..small_cfg() }).unwrap();
        let d = m.score_next(SeqView::Items(&[0])).unwrap();
        let d = d.distribution().unwrap();
        let argmax = (0..3).max_by(|&a, &b| d[a].total_cmp(&d[b])).unwrap();
        assert_eq!(argmax, 1);
    }

    #[test]
    fn continuous_training_reduces_loss() {
        let seqs = (0..30)
            .map(|u| Sequence::values(format!("w{u}"), (0..10).map(|t| ((t + u) as f64 * 0.6).sin()).collect()))
            .collect();
        let ds = SequenceDataset::continuous(seqs, None).unwrap();
        let cfg = BackboneConfig { mode: Mode::Continuous, optimizer: Optimizer::adam(), learning_rate: 0.02, ..small_cfg() };
        let (m, log) = train_backbone(&ds, &cfg).unwrap();
        assert!(log.epoch_losses.last().unwrap() < log.epoch_losses.first().unwrap());
        assert!(m.params().iter().all(|p| p.is_finite()));
    }

    #[test]
    fn divergence_is_reported() {
        let cfg = BackboneConfig { learning_rate: 1e300, clip_norm: 0.0, ..small_cfg() };
        let err = train_backbone(&cyclic_corpus(), &cfg).unwrap_err();
        assert!(matches!(err, LatticeError::TrainingDiverged { .. }));
    }

    #[test]
    fn mode_mismatch() {
        let cfg = BackboneConfig { mode: Mode::Continuous, ..small_cfg() };
        assert!(train_backbone(&cyclic_corpus(), &cfg).is_err());
    }
}
