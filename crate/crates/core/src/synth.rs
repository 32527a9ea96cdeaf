//! Archetype-structured synthetic corpora with controllable distribution shift.
//!
//! Each sequence draws a ground-truth archetype uniformly and then walks that
//! archetype's Markov chain (discrete) or an AR(1) process around its level
//! (continuous). Ground truth comes from `structure_seed`; samples come from
//! `seed`, so train/validation/test corpora can share structure but not draws.

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{LatticeError, Result};
use crate::exec::Exec;
use crate::rng::{rng_for, STREAM_SEQUENCE, STREAM_SHIFT, STREAM_STRUCTURE};
use crate::seqcore::{ItemVocab, Mode, Sequence, SequenceDataset};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub mode: Mode,
    pub vocab_size: usize,
    pub num_archetypes: usize,
    pub num_sequences: usize,
    pub min_len: usize,
    pub max_len: usize,
    pub structure_seed: u64,
    pub seed: u64,
    /// Successors per item inside an archetype.
    pub fanout: usize,
    /// Probability mass on the archetype's successors; the rest is uniform.
    pub strength: f64,
    /// Continuous: archetype levels are spread over `[-level_spread, level_spread]`.
    pub level_spread: f64,
    pub noise: f64,
    /// AR(1) coefficient around the level.
    pub persistence: f64,
    /// Every archetype walks the whole catalog instead of its own home subset,
    /// so the archetype is only recoverable from history.
    pub shared_catalog: bool,
    /// Explicit ground-truth matrices, one `V × V` matrix per archetype.
    pub transitions: Option<Vec<Vec<Vec<f64>>>>,
}

impl Default for SynthSpec {
    /// V = 50, three archetypes, 2000 sequences of 12–30 steps.
    fn default() -> Self {
        SynthSpec {
            mode: Mode::Discrete,
            vocab_size: 50,
            num_archetypes: 3,
            num_sequences: 2000,
            min_len: 12,
            max_len: 30,
            structure_seed: 0,
            seed: 0,
            fanout: 3,
            strength: 0.85,
            level_spread: 2.0,
            noise: 0.3,
            persistence: 0.6,
            shared_catalog: false,
            transitions: None,
        }
    }
}

impl SynthSpec {
    pub fn continuous() -> Self {
        SynthSpec { mode: Mode::Continuous, ..Default::default() }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        SynthSpec { seed, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(LatticeError::InvalidConfig(m.to_string()));
        if self.num_archetypes == 0 || self.num_sequences == 0 {
            return bad("num_archetypes and num_sequences must be >= 1");
        }
        if self.min_len < 1 || self.min_len > self.max_len {
            return bad("need 1 <= min_len <= max_len");
        }
        if self.mode == Mode::Discrete {
            if self.vocab_size < 2 {
                return bad("vocab_size must be >= 2");
            }
            if !(0.0..=1.0).contains(&self.strength) || self.fanout == 0 {
                return bad("need strength in [0, 1] and fanout >= 1");
            }
            if let Some(ms) = &self.transitions {
                if ms.len() != self.num_archetypes {
                    return bad("one transition matrix per archetype");
                }
                for m in ms {
                    if m.len() != self.vocab_size || m.iter().any(|r| !is_stochastic(r, self.vocab_size)) {
                        return bad("transition matrices must be V x V and row-stochastic");
                    }
                }
            }
        } else if !(self.noise >= 0.0) || !(self.persistence.abs() < 1.0) {
            return bad("need noise >= 0 and |persistence| < 1");
        }
        Ok(())
    }
}

fn is_stochastic(row: &[f64], v: usize) -> bool {
    row.len() == v && row.iter().all(|&p| p >= 0.0) && (row.iter().sum::<f64>() - 1.0).abs() < 1e-9
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum GroundTruth {
    Markov {
        /// Start distribution per archetype.
        start: Vec<Vec<f64>>,
        /// `matrices[k][i][j]`.
        matrices: Vec<Vec<Vec<f64>>>,
    },
    Levels {
        levels: Vec<f64>,
        noise: f64,
        persistence: f64,
    },
}

pub fn ground_truth(spec: &SynthSpec) -> Result<GroundTruth> {
    spec.validate()?;
    let mut rng = rng_for(spec.structure_seed, STREAM_STRUCTURE, 0);
    let k = spec.num_archetypes;
    match spec.mode {
        Mode::Continuous => {
            let mut levels: Vec<f64> = (0..k)
                .map(|i| if k == 1 { 0.0 } else { -spec.level_spread + 2.0 * spec.level_spread * i as f64 / (k - 1) as f64 })
                .collect();
            levels.shuffle(&mut rng);
            Ok(GroundTruth::Levels { levels, noise: spec.noise, persistence: spec.persistence })
        }
        Mode::Discrete => {
            let v = spec.vocab_size;
            let mut items: Vec<usize> = (0..v).collect();
            items.shuffle(&mut rng);
            // home subsets: contiguous chunks of a shuffled catalog
            let homes: Vec<Vec<usize>> = (0..k)
                .map(|a| {
                    if spec.shared_catalog {
                        items.clone()
                    } else {
                        items[a * v / k..((a + 1) * v / k).max(a * v / k + 1).min(v)].to_vec()
                    }
                })
                .collect();
            let start = homes
                .iter()
                .map(|h| {
                    let mut s = vec![0.0; v];
                    h.iter().for_each(|&i| s[i] = 1.0 / h.len() as f64);
                    s
                })
                .collect();
            if let Some(ms) = &spec.transitions {
                return Ok(GroundTruth::Markov { start, matrices: ms.clone() });
            }
            let matrices = homes
                .iter()
                .map(|home| {
                    (0..v)
                        .map(|_| {
                            let mut row = vec![(1.0 - spec.strength) / v as f64; v];
                            let succ: Vec<usize> = home.choose_multiple(&mut rng, spec.fanout.min(home.len())).copied().collect();
                            // decreasing weights 1, 1/2, 1/3, ... so rows have a clear favorite
                            let w: Vec<f64> = (1..=succ.len()).map(|r| 1.0 / r as f64).collect();
                            let z: f64 = w.iter().sum();
                            for (j, wj) in succ.iter().zip(&w) {
                                row[*j] += spec.strength * wj / z;
                            }
                            row
                        })
                        .collect()
                })
                .collect();
            Ok(GroundTruth::Markov { start, matrices })
        }
    }
}

/// Ground truth moved by `magnitude`; `0` returns it unchanged.
///
/// Discrete: every matrix is mixed with its label-permuted copy `Π P Πᵀ` with
/// weight `m / (1 + m)`. Continuous: levels move up by `m · 3 · level_spread`
/// (one and a half training ranges, so from `m = 2/3` on no shifted level
/// overlaps the training range) and the noise is scaled by `1 + m`.
pub fn shifted_truth(spec: &SynthSpec, magnitude: f64) -> Result<GroundTruth> {
    if !(magnitude >= 0.0) || !magnitude.is_finite() {
        return Err(LatticeError::InvalidConfig(format!("shift magnitude must be >= 0, got {magnitude}")));
    }
    let truth = ground_truth(spec)?;
    if magnitude == 0.0 {
        return Ok(truth);
    }
    let w = magnitude / (1.0 + magnitude);
    Ok(match truth {
        GroundTruth::Markov { start, matrices } => {
            let v = spec.vocab_size;
            let mut perm: Vec<usize> = (0..v).collect();
            perm.shuffle(&mut rng_for(spec.structure_seed, STREAM_SHIFT, 0));
            let mix = |orig: &[f64], permuted: &dyn Fn(usize) -> f64| -> Vec<f64> {
                (0..v).map(|j| (1.0 - w) * orig[j] + w * permuted(j)).collect()
            };
            // (Π P Πᵀ)[π(i)][π(j)] = P[i][j]
            let mut inv = vec![0; v];
            perm.iter().enumerate().for_each(|(i, &p)| inv[p] = i);
            GroundTruth::Markov {
                start: start.iter().map(|s| mix(s, &|j| s[inv[j]])).collect(),
                matrices: matrices
                    .iter()
                    .map(|m| (0..v).map(|i| mix(&m[i], &|j| m[inv[i]][inv[j]])).collect())
                    .collect(),
            }
        }
        GroundTruth::Levels { levels, noise, persistence } => GroundTruth::Levels {
            levels: levels.iter().map(|l| l + magnitude * 3.0 * spec.level_spread).collect(),
            noise: noise * (1.0 + magnitude),
            persistence,
        },
    })
}

#[derive(Debug, Clone)]
pub struct SynthCorpus {
    pub dataset: SequenceDataset,
    /// Ground-truth archetype per sequence.
    pub labels: Vec<usize>,
}

fn sample_index(p: &[f64], rng: &mut impl Rng) -> usize {
    let mut r: f64 = rng.random();
    for (i, &x) in p.iter().enumerate() {
        if r < x {
            return i;
        }
        r -= x;
    }
    // rounding slack lands on the last non-zero entry
    p.iter().rposition(|&x| x > 0.0).unwrap_or(p.len() - 1)
}

fn generate(spec: &SynthSpec, truth: &GroundTruth) -> Result<SynthCorpus> {
    let k = spec.num_archetypes;
    let rows: Vec<(usize, Sequence)> = Exec::Parallel.map_range(spec.num_sequences, |n| {
        let mut rng = rng_for(spec.seed, STREAM_SEQUENCE, n as u64);
        let label = rng.random_range(0..k);
        let len = rng.random_range(spec.min_len..=spec.max_len);
        let owner = format!("s{n}");
        let seq = match truth {
            GroundTruth::Markov { start, matrices } => {
                let mut items = Vec::with_capacity(len);
                let mut cur = sample_index(&start[label], &mut rng);
                items.push(cur);
                while items.len() < len {
                    cur = sample_index(&matrices[label][cur], &mut rng);
                    items.push(cur);
                }
                Sequence::items(owner, items)
            }
            GroundTruth::Levels { levels, noise, persistence } => {
                let level = levels[label];
                let mut eps = || -> f64 { StandardNormal.sample(&mut rng) };
                let mut x = level + noise / (1.0 - persistence * persistence).sqrt() * eps();
                let mut values = Vec::with_capacity(len);
                values.push(x);
                while values.len() < len {
                    x = level + persistence * (x - level) + noise * eps();
                    values.push(x);
                }
                Sequence::values(owner, values)
            }
        };
        (label, seq)
    });
    let (labels, seqs): (Vec<usize>, Vec<Sequence>) = rows.into_iter().unzip();
    let dataset = match spec.mode {
        Mode::Discrete => SequenceDataset::discrete(ItemVocab::identity(spec.vocab_size), seqs)?,
        Mode::Continuous => SequenceDataset::continuous(seqs, None)?,
    };
    Ok(SynthCorpus { dataset, labels })
}

pub fn gen_dataset(spec: &SynthSpec) -> Result<SynthCorpus> {
    generate(spec, &ground_truth(spec)?)
}

pub fn gen_shifted(spec: &SynthSpec, magnitude: f64) -> Result<SynthCorpus> {
    generate(spec, &shifted_truth(spec, magnitude)?)
}

/// Best fraction of matching labels over all relabelings of `predicted`
/// (`k` labels, `k <= 8`).
pub fn label_agreement(truth: &[usize], predicted: &[usize], k: usize) -> Result<f64> {
    if truth.len() != predicted.len() {
        return Err(LatticeError::LengthMismatch { left: truth.len(), right: predicted.len() });
    }
    if truth.is_empty() || k == 0 || k > 8 {
        return Err(LatticeError::InvalidConfig("label agreement needs data and 1 <= k <= 8".into()));
    }
    let mut confusion = vec![vec![0usize; k]; k];
    for (&t, &p) in truth.iter().zip(predicted) {
        if t >= k || p >= k {
            return Err(LatticeError::InvalidConfig(format!("label outside 0..{k}")));
        }
        confusion[p][t] += 1;
    }
    fn best(confusion: &[Vec<usize>], row: usize, used: &mut Vec<bool>) -> usize {
        if row == confusion.len() {
            return 0;
        }
        let mut top = 0;
        for t in 0..used.len() {
            if !used[t] {
                used[t] = true;
                top = top.max(confusion[row][t] + best(confusion, row + 1, used));
                used[t] = false;
            }
        }
        top
    }
    Ok(best(&confusion, 0, &mut vec![false; k]) as f64 / truth.len() as f64)
}
