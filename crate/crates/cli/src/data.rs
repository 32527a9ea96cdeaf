//! Loading experiment data for each input format.

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use lattice::evalkit::ExperimentData;
use lattice::rng::{derive, STREAM_SEQUENCE};
use lattice::seqcore::{
    history_views, read_events, read_series, temporal_split, window_continuous, window_with_stats, ItemVocab, Mode,
    NormStats, Sequence, SequenceDataset,
};
use lattice::synth::{gen_dataset, SynthSpec};
use lattice::LatticeError;

use crate::config::{Format, RunConfig};
use crate::{CliError, Stage};

pub struct Loaded {
    pub data: ExperimentData,
    pub vocab: Option<ItemVocab>,
    pub norm: Option<NormStats>,
}

fn open(path: &Path) -> Result<BufReader<File>, CliError> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

/// Sample seeds of the synthetic train/validation/test corpora.
pub fn synth_seeds(spec: &SynthSpec) -> [u64; 3] {
    [0, 1, 2].map(|i| derive(spec.structure_seed, STREAM_SEQUENCE, i))
}

pub fn load(cfg: &RunConfig) -> Result<Loaded, CliError> {
    match cfg.format {
        Format::Synth => {
            let [a, b, c] = synth_seeds(&cfg.synth);
            let gen = |s| gen_dataset(&cfg.synth.with_seed(s)).map(|c| c.dataset).stage("synthesize");
            let train = gen(a)?;
            Ok(Loaded {
                vocab: train.vocab.clone(),
                data: ExperimentData { train, val: Some(gen(b)?), test: gen(c)? },
                norm: None,
            })
        }
        Format::Events => {
            if cfg.mode != Mode::Discrete {
                return Err(CliError::Usage("format = events needs mode = discrete".into()));
            }
            let path = cfg.data.as_deref().expect("validated");
            let events = read_events(open(path)?).stage("read events")?;
            let ds = SequenceDataset::from_events(&events).stage("build sequences")?;
            let split = temporal_split(&ds, &cfg.split).stage("split")?;
            let (val, test) = history_views(&ds, &cfg.split).stage("split")?;
            Ok(Loaded {
                vocab: ds.vocab.clone(),
                data: ExperimentData { train: split.train, val: Some(val), test },
                norm: None,
            })
        }
        Format::Series => {
            if cfg.mode != Mode::Continuous {
                return Err(CliError::Usage("format = series needs mode = continuous".into()));
            }
            let path = cfg.data.as_deref().expect("validated");
            let series = read_series(open(path)?).stage("read series")?;
            let n = series.len();
            let cut1 = (n as f64 * cfg.split.train_frac).floor() as usize;
            let cut2 = (n as f64 * (cfg.split.train_frac + cfg.split.val_frac)).floor() as usize;
            let train = window_continuous(&series[..cut1], cfg.window, cfg.normalize, cfg.difference).stage("window")?;
            let norm = train.norm;
            // held-out windows end inside their partition and borrow earlier context
            let held_out = |lo: usize, hi: usize| {
                let start = lo.saturating_sub(cfg.window);
                window_with_stats(&series[start..hi], cfg.window, cfg.difference, norm)
            };
            let val = held_out(cut1, cut2).ok();
            let test = held_out(cut2, n).stage("window test partition")?;
            Ok(Loaded { data: ExperimentData { train, val, test }, vocab: None, norm })
        }
        Format::Sequences => {
            let path = cfg.data.as_deref().expect("validated");
            let mut rows = Vec::new();
            for (i, line) in open(path)?.lines().enumerate() {
                let line = line.map_err(|source| CliError::Io { path: path.to_path_buf(), source })?;
                let toks: Vec<String> = line.split_whitespace().map(str::to_string).collect();
                if !toks.is_empty() {
                    rows.push((i + 1, toks));
                }
            }
            let ds = sequences_dataset(cfg.mode, rows).stage("read sequences")?;
            let n = ds.len();
            let cut1 = (n as f64 * cfg.split.train_frac).floor() as usize;
            let cut2 = (n as f64 * (cfg.split.train_frac + cfg.split.val_frac)).floor() as usize;
            let part = |r: std::ops::Range<usize>| ds.with_sequences(ds.sequences[r].to_vec());
            if cut1 == 0 {
                return Err(CliError::Stage {
                    stage: "split",
                    source: LatticeError::InvalidSplit("train partition is empty".into()),
                });
            }
            Ok(Loaded {
                vocab: ds.vocab.clone(),
                norm: None,
                data: ExperimentData {
                    train: part(0..cut1),
                    val: (cut2 > cut1).then(|| part(cut1..cut2)),
                    test: part(cut2..n),
                },
            })
        }
    }
}

fn sequences_dataset(mode: Mode, rows: Vec<(usize, Vec<String>)>) -> lattice::Result<SequenceDataset> {
    match mode {
        Mode::Continuous => {
            let seqs = rows
                .into_iter()
                .map(|(line, toks)| {
                    let values = toks
                        .iter()
                        .map(|t| t.parse::<f64>().map_err(|_| LatticeError::Parse { line, msg: format!("bad value {t:?}") }))
                        .collect::<lattice::Result<Vec<f64>>>()?;
                    Ok(Sequence::values(format!("seq{line}"), values))
                })
                .collect::<lattice::Result<Vec<_>>>()?;
            SequenceDataset::continuous(seqs, None)
        }
        Mode::Discrete => {
            let mut raw: Vec<String> = Vec::new();
            let mut seen = std::collections::HashSet::new();
            for (_, toks) in &rows {
                for t in toks {
                    if seen.insert(t.clone()) {
                        raw.push(t.clone());
                    }
                }
            }
            let vocab = ItemVocab::from_raw_ids(raw)?;
            let seqs = rows
                .into_iter()
                .map(|(line, toks)| {
                    let items = toks.iter().map(|t| vocab.index_of(t).expect("just indexed")).collect();
                    Sequence::items(format!("seq{line}"), items)
                })
                .collect();
            SequenceDataset::discrete(vocab, seqs)
        }
    }
}
