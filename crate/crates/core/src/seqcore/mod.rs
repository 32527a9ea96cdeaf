//! Sequences, vocabularies and datasets.

mod ingest;
mod split;
mod vocab;
mod window;

pub use ingest::{read_events, read_series, Event};
pub use split::{history_views, kfold_split, temporal_split, SplitSpec, SplitStrategy, TemporalSplit};
pub use vocab::ItemVocab;
pub use window::{split_series, window_continuous, window_with_stats, NormStats};

use serde::{Deserialize, Serialize};

use crate::error::{LatticeError, Result};

/// Whether a dataset holds item ids or real values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Discrete,
    Continuous,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Discrete => "discrete",
            Mode::Continuous => "continuous",
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = LatticeError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "discrete" => Ok(Mode::Discrete),
            "continuous" => Ok(Mode::Continuous),
            other => Err(LatticeError::InvalidConfig(format!("unknown mode {other:?}"))),
        }
    }
}

/// The payload of a sequence: dense item indices or real values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Series {
    Items(Vec<usize>),
    Values(Vec<f64>),
}

impl Series {
    pub fn len(&self) -> usize {
        match self {
            Series::Items(v) => v.len(),
            Series::Values(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn mode(&self) -> Mode {
        match self {
            Series::Items(_) => Mode::Discrete,
            Series::Values(_) => Mode::Continuous,
        }
    }

    pub fn view(&self) -> SeqView<'_> {
        match self {
            Series::Items(v) => SeqView::Items(v),
            Series::Values(v) => SeqView::Values(v),
        }
    }

    fn slice(&self, range: std::ops::Range<usize>) -> Series {
        match self {
            Series::Items(v) => Series::Items(v[range].to_vec()),
            Series::Values(v) => Series::Values(v[range].to_vec()),
        }
    }
}

/// Borrowed view of a sequence payload, used as model input.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SeqView<'a> {
    Items(&'a [usize]),
    Values(&'a [f64]),
}

impl<'a> SeqView<'a> {
    pub fn len(&self) -> usize {
        match self {
            SeqView::Items(v) => v.len(),
            SeqView::Values(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn mode(&self) -> Mode {
        match self {
            SeqView::Items(_) => Mode::Discrete,
            SeqView::Values(_) => Mode::Continuous,
        }
    }

    /// The first `n` steps.
    pub fn prefix(&self, n: usize) -> SeqView<'a> {
        match *self {
            SeqView::Items(v) => SeqView::Items(&v[..n]),
            SeqView::Values(v) => SeqView::Values(&v[..n]),
        }
    }

    pub fn last_item(&self) -> Option<usize> {
        match self {
            SeqView::Items(v) => v.last().copied(),
            SeqView::Values(_) => None,
        }
    }

    pub fn last_value(&self) -> Option<f64> {
        match self {
            SeqView::Values(v) => v.last().copied(),
            SeqView::Items(_) => None,
        }
    }
}

/// One user's (or one source's) ordered events.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sequence {
    pub owner: String,
    pub series: Series,
    /// Non-decreasing when present.
    pub timestamps: Option<Vec<i64>>,
}

impl Sequence {
    pub fn items(owner: impl Into<String>, items: Vec<usize>) -> Self {
        Sequence {
            owner: owner.into(),
            series: Series::Items(items),
            timestamps: None,
        }
    }

    pub fn values(owner: impl Into<String>, values: Vec<f64>) -> Self {
        Sequence {
            owner: owner.into(),
            series: Series::Values(values),
            timestamps: None,
        }
    }

    pub fn len(&self) -> usize {
        self.series.len()
    }

    pub fn is_empty(&self) -> bool {
        self.series.is_empty()
    }

    pub fn view(&self) -> SeqView<'_> {
        self.series.view()
    }

    pub(crate) fn slice(&self, range: std::ops::Range<usize>) -> Sequence {
        Sequence {
            owner: self.owner.clone(),
            timestamps: self.timestamps.as_ref().map(|t| t[range.clone()].to_vec()),
            series: self.series.slice(range),
        }
    }
}

/// A uniform-mode collection of sequences.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceDataset {
    pub mode: Mode,
    /// Present in discrete mode.
    pub vocab: Option<ItemVocab>,
    pub sequences: Vec<Sequence>,
    /// Continuous-mode normalization statistics, computed on training data only.
    pub norm: Option<NormStats>,
}

impl SequenceDataset {
    /// Discrete dataset; every item index must be below `vocab.len()`.
    pub fn discrete(vocab: ItemVocab, sequences: Vec<Sequence>) -> Result<Self> {
        let size = vocab.len();
        for s in &sequences {
            match &s.series {
                Series::Items(items) => {
                    if let Some(&bad) = items.iter().find(|&&i| i >= size) {
                        return Err(LatticeError::OutOfVocab { index: bad, size });
                    }
                }
                Series::Values(_) => {
                    return Err(LatticeError::ModeMismatch {
                        expected: "discrete",
                        found: "continuous",
                    })
                }
            }
        }
        Ok(SequenceDataset {
            mode: Mode::Discrete,
            vocab: Some(vocab),
            sequences,
            norm: None,
        })
    }

    pub fn continuous(sequences: Vec<Sequence>, norm: Option<NormStats>) -> Result<Self> {
        if sequences.iter().any(|s| s.series.mode() != Mode::Continuous) {
            return Err(LatticeError::ModeMismatch {
                expected: "continuous",
                found: "discrete",
            });
        }
        Ok(SequenceDataset {
            mode: Mode::Continuous,
            vocab: None,
            sequences,
            norm,
        })
    }

    /// Same mode/vocab/normalization, different sequences.
    pub fn with_sequences(&self, sequences: Vec<Sequence>) -> SequenceDataset {
        SequenceDataset {
            mode: self.mode,
            vocab: self.vocab.clone(),
            sequences,
            norm: self.norm,
        }
    }

    pub fn vocab_size(&self) -> Option<usize> {
        self.vocab.as_ref().map(ItemVocab::len)
    }

    pub fn len(&self) -> usize {
        self.sequences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sequences.is_empty()
    }

    /// Total number of events over all sequences.
    pub fn num_events(&self) -> usize {
        self.sequences.iter().map(Sequence::len).sum()
    }

    /// Group events per user (first-occurrence order of users), ordering each
    /// user's events by timestamp. Ties keep file order.
    pub fn from_events(events: &[Event]) -> Result<Self> {
        let vocab = ItemVocab::build(events)?;
        let mut order: Vec<&str> = Vec::new();
        let mut per_user: std::collections::HashMap<&str, Vec<(i64, usize)>> = Default::default();
        for e in events {
            let idx = vocab.index_of(&e.item).expect("vocab covers all events");
            per_user
                .entry(e.user.as_str())
                .or_insert_with(|| {
                    order.push(e.user.as_str());
                    Vec::new()
                })
                .push((e.timestamp, idx));
        }
        let sequences = order
            .into_iter()
            .map(|user| {
                let mut evs = per_user.remove(user).unwrap_or_default();
                evs.sort_by_key(|&(t, _)| t);
                Sequence {
                    owner: user.to_string(),
                    timestamps: Some(evs.iter().map(|&(t, _)| t).collect()),
                    series: Series::Items(evs.into_iter().map(|(_, i)| i).collect()),
                }
            })
            .collect();
        SequenceDataset::discrete(vocab, sequences)
    }
}
