use rand::seq::SliceRandom;

use super::{Sequence, SequenceDataset};
use crate::error::{LatticeError, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SplitStrategy {
    Temporal,
    KFold { k: usize, fold: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSpec {
    pub train_frac: f64,
    pub val_frac: f64,
    pub test_frac: f64,
    pub strategy: SplitStrategy,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec::temporal(0.8, 0.1, 0.1)
    }
}

impl SplitSpec {
    pub fn temporal(train_frac: f64, val_frac: f64, test_frac: f64) -> Self {
        SplitSpec {
            train_frac,
            val_frac,
            test_frac,
            strategy: SplitStrategy::Temporal,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fracs = [self.train_frac, self.val_frac, self.test_frac];
        if fracs.iter().any(|f| !(0.0..=1.0).contains(f)) {
            return Err(LatticeError::InvalidSplit(format!("fractions must lie in [0, 1]: {fracs:?}")));
        }
        let sum: f64 = fracs.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(LatticeError::InvalidSplit(format!("fractions sum to {sum}, not 1")));
        }
        if let SplitStrategy::KFold { k, fold } = self.strategy {
            if k < 2 || fold >= k {
                return Err(LatticeError::InvalidSplit(format!("bad fold {fold} of {k}")));
            }
        }
        Ok(())
    }

    /// Event counts (train, val, test) for a sequence of length `n`.
    ///
    /// Train takes the floor of its share, validation rounds its share with
    /// halves going down, test takes the rest. When `test_frac > 0` and
    /// `n >= 3`, test is never left empty.
    pub fn counts(&self, n: usize) -> (usize, usize, usize) {
        const EPS: f64 = 1e-9;
        let nf = n as f64;
        let train = ((nf * self.train_frac + EPS).floor() as usize).min(n);
        let val = ((nf * self.val_frac - 0.5 - EPS).ceil().max(0.0) as usize).min(n - train);
        let mut test = n - train - val;
        let (mut train, mut val) = (train, val);
        if self.test_frac > 0.0 && test == 0 && n >= 3 {
            if val > 0 {
                val -= 1;
            } else {
                train -= 1;
            }
            test = 1;
        }
        (train, val, test)
    }
}

#[derive(Debug, Clone)]
pub struct TemporalSplit {
    pub train: SequenceDataset,
    pub val: SequenceDataset,
    pub test: SequenceDataset,
}

/// Per-sequence chronological prefix split. Partitions shorter than two events
/// are dropped from that partition.
pub fn temporal_split(ds: &SequenceDataset, spec: &SplitSpec) -> Result<TemporalSplit> {
    spec.validate()?;
    let (mut train, mut val, mut test) = (Vec::new(), Vec::new(), Vec::new());
    for s in &ds.sequences {
        let (a, b, _) = spec.counts(s.len());
        let parts = [(0..a, &mut train), (a..a + b, &mut val), (a + b..s.len(), &mut test)];
        for (range, out) in parts {
            if range.len() >= 2 {
                out.push(s.slice(range));
            }
        }
    }
    if train.is_empty() {
        return Err(LatticeError::InvalidSplit("train partition is empty".into()));
    }
    Ok(TemporalSplit {
        train: ds.with_sequences(train),
        val: ds.with_sequences(val),
        test: ds.with_sequences(test),
    })
}

/// Evaluation views for a temporal split: each view sequence ends at the last
/// event of the validation (resp. test) partition and keeps all earlier events
/// as context. Sequences whose partition is empty are omitted.
pub fn history_views(ds: &SequenceDataset, spec: &SplitSpec) -> Result<(SequenceDataset, SequenceDataset)> {
    spec.validate()?;
    let (mut val, mut test) = (Vec::new(), Vec::new());
    for s in &ds.sequences {
        let (a, b, c) = spec.counts(s.len());
        if b >= 1 && a + b >= 2 {
            val.push(s.slice(0..a + b));
        }
        if c >= 1 && s.len() >= 2 {
            test.push(s.clone());
        }
    }
    Ok((ds.with_sequences(val), ds.with_sequences(test)))
}

/// Seeded k-fold partition over whole sequences. Returns (train, test) where
/// test is group `fold`.
pub fn kfold_split(ds: &SequenceDataset, k: usize, fold: usize, seed: u64) -> Result<(SequenceDataset, SequenceDataset)> {
    if k < 2 || fold >= k {
        return Err(LatticeError::InvalidSplit(format!("bad fold {fold} of {k}")));
    }
    let n = ds.len();
    if k > n {
        return Err(LatticeError::InvalidSplit(format!("k = {k} exceeds {n} sequences")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::rng_for(seed, rng::STREAM_FOLD, k as u64));
    // Group g covers order[start(g)..start(g+1)], sizes differ by at most one.
    let start = |g: usize| g * (n / k) + g.min(n % k);
    let (lo, hi) = (start(fold), start(fold + 1));
    let mut in_test = vec![false; n];
    for &i in &order[lo..hi] {
        in_test[i] = true;
    }
    let pick = |want: bool| -> Vec<Sequence> {
        ds.sequences
            .iter()
            .zip(&in_test)
            .filter(|(_, &t)| t == want)
            .map(|(s, _)| s.clone())
            .collect()
    };
    Ok((ds.with_sequences(pick(false)), ds.with_sequences(pick(true))))
}
