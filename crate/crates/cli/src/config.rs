//! `key = value` run configuration. A config file supplies the base values and
//! command-line flags override them.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use lattice::backbone::Optimizer;
use lattice::gate::ThresholdGrid;
use lattice::hybrid::Ablation;
use lattice::pipeline::LatticeConfig;
use lattice::seqcore::{Mode, SplitSpec};
use lattice::synth::SynthSpec;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    /// `user item timestamp` lines.
    Events,
    /// One value per line.
    Series,
    /// One sequence per line, whitespace-separated values.
    Sequences,
    /// Generated from the `synth_*` keys; no data file.
    Synth,
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "events" => Ok(Format::Events),
            "series" => Ok(Format::Series),
            "sequences" => Ok(Format::Sequences),
            "synth" => Ok(Format::Synth),
            other => Err(format!("unknown format {other:?} (events, series, sequences, synth)")),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub data: Option<PathBuf>,
    pub format: Format,
    pub mode: Mode,
    pub split: SplitSpec,
    pub window: usize,
    pub normalize: bool,
    pub difference: bool,
    pub lattice: LatticeConfig,
    /// `None` means calibrate on validation data.
    pub theta: Option<f64>,
    pub grid: ThresholdGrid,
    pub seeds: Vec<u64>,
    pub out: PathBuf,
    pub synth: SynthSpec,
    /// Shift magnitudes for `stress` (default 4) and `synth` (default 0).
    pub magnitudes: Option<Vec<f64>>,
    pub baseline_only: bool,
    pub dump_predictions: bool,
}

pub const KEYS: &[&str] = &[
    "data", "format", "mode", "train_frac", "val_frac", "test_frac", "window", "normalize", "difference",
    "embed_dim", "hidden_dim", "epochs", "batch_size", "learning_rate", "optimizer", "clip_norm", "k", "alpha",
    "kmeans_restarts", "kmeans_max_iters", "theta", "lambda", "phase0_max_len", "phase1_max_len",
    "popularity_weight", "archetypes", "gating", "phases", "grid_lo", "grid_hi", "grid_step", "seed", "seeds",
    "out", "synth_vocab", "synth_archetypes", "synth_sequences", "synth_min_len", "synth_max_len",
    "synth_strength", "synth_fanout", "synth_shared_catalog", "synth_structure_seed", "synth_level_spread",
    "synth_noise", "magnitude", "baseline_only", "dump_predictions",
];

/// Parse `key = value` lines; `#` starts a comment.
pub fn parse_kv(text: &str) -> Result<BTreeMap<String, String>, CliError> {
    let mut out = BTreeMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("config line {}: expected key = value", n + 1)))?;
        out.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(out)
}

pub fn read_kv(path: &Path) -> Result<BTreeMap<String, String>, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))?;
    parse_kv(&text)
}

/// `0..29` (inclusive), `0..=29`, `3`, or `1,4,9`.
pub fn parse_seeds(s: &str) -> Result<Vec<u64>, CliError> {
    let bad = || CliError::Usage(format!("bad seed list {s:?}"));
    let s = s.trim();
    if let Some((a, b)) = s.split_once("..") {
        let b = b.strip_prefix('=').unwrap_or(b);
        let (a, b): (u64, u64) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
        if a > b {
            return Err(bad());
        }
        return Ok((a..=b).collect());
    }
    s.split(',').map(|x| x.trim().parse().map_err(|_| bad())).collect()
}

fn parse_list<T: FromStr>(key: &str, s: &str) -> Result<Vec<T>, CliError> {
    s.split(',')
        .map(|x| x.trim().parse().map_err(|_| CliError::Usage(format!("{key}: cannot parse {x:?}"))))
        .collect()
}

fn parse_bool(key: &str, s: &str) -> Result<bool, CliError> {
    match s {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        _ => Err(CliError::Usage(format!("{key}: expected a boolean, got {s:?}"))),
    }
}

impl RunConfig {
    pub fn from_map(map: &BTreeMap<String, String>) -> Result<Self, CliError> {
        if let Some(k) = map.keys().find(|k| !KEYS.contains(&k.as_str())) {
            return Err(CliError::Usage(format!("unknown config key {k:?}")));
        }
        fn get<T: FromStr>(map: &BTreeMap<String, String>, key: &str, default: T) -> Result<T, CliError> {
            match map.get(key) {
                Some(v) => v.parse().map_err(|_| CliError::Usage(format!("{key}: cannot parse {v:?}"))),
                None => Ok(default),
            }
        }
        let flag = |key: &str, default: bool| map.get(key).map_or(Ok(default), |v| parse_bool(key, v));

        let mode: Mode = match map.get("mode") {
            Some(m) => m.parse().map_err(|e: lattice::LatticeError| CliError::Usage(e.to_string()))?,
            None => Mode::Discrete,
        };
        let format: Format = match map.get("format") {
            Some(f) => f.parse().map_err(CliError::Usage)?,
            None if map.contains_key("data") => match mode {
                Mode::Discrete => Format::Events,
                Mode::Continuous => Format::Series,
            },
            None => Format::Synth,
        };

        let mut lattice = LatticeConfig::default();
        let b = &mut lattice.backbone;
        b.mode = mode;
        b.embed_dim = get(map, "embed_dim", b.embed_dim)?;
        b.hidden_dim = get(map, "hidden_dim", b.hidden_dim)?;
        b.epochs = get(map, "epochs", b.epochs)?;
        b.batch_size = get(map, "batch_size", b.batch_size)?;
        b.learning_rate = get(map, "learning_rate", b.learning_rate)?;
        b.clip_norm = get(map, "clip_norm", b.clip_norm)?;
        if let Some(o) = map.get("optimizer") {
            b.optimizer = o.parse::<Optimizer>().map_err(|e| CliError::Usage(e.to_string()))?;
        }
        lattice.num_archetypes = get(map, "k", lattice.num_archetypes)?;
        lattice.alpha = get(map, "alpha", lattice.alpha)?;
        lattice.kmeans_restarts = get(map, "kmeans_restarts", lattice.kmeans_restarts)?;
        lattice.kmeans_max_iters = get(map, "kmeans_max_iters", lattice.kmeans_max_iters)?;
        lattice.gate.lambda = get(map, "lambda", lattice.gate.lambda)?;
        lattice.gate.phase0_max_len = get(map, "phase0_max_len", lattice.gate.phase0_max_len)?;
        lattice.gate.phase1_max_len = get(map, "phase1_max_len", lattice.gate.phase1_max_len)?;
        lattice.popularity_weight = get(map, "popularity_weight", lattice.popularity_weight)?;
        lattice.ablation = Ablation {
            archetypes: flag("archetypes", true)?,
            gating: flag("gating", true)?,
            phases: flag("phases", true)?,
        };
        let theta: Option<f64> = map.get("theta").map(|_| get(map, "theta", 0.0)).transpose()?;
        if let Some(t) = theta {
            lattice.gate.theta = t;
        }

        let seeds = match (map.get("seeds"), map.get("seed")) {
            (Some(s), _) => parse_seeds(s)?,
            (None, Some(s)) => parse_seeds(s)?,
            (None, None) => vec![0],
        };
        lattice.backbone.seed = seeds[0];

        let d = SynthSpec::default();
        let synth = SynthSpec {
            mode,
            vocab_size: get(map, "synth_vocab", d.vocab_size)?,
            num_archetypes: get(map, "synth_archetypes", d.num_archetypes)?,
            num_sequences: get(map, "synth_sequences", d.num_sequences)?,
            min_len: get(map, "synth_min_len", d.min_len)?,
            max_len: get(map, "synth_max_len", d.max_len)?,
            strength: get(map, "synth_strength", d.strength)?,
            fanout: get(map, "synth_fanout", d.fanout)?,
            shared_catalog: flag("synth_shared_catalog", d.shared_catalog)?,
            structure_seed: get(map, "synth_structure_seed", d.structure_seed)?,
            level_spread: get(map, "synth_level_spread", d.level_spread)?,
            noise: get(map, "synth_noise", d.noise)?,
            ..d
        };

        let split = SplitSpec {
            train_frac: get(map, "train_frac", 0.8)?,
            val_frac: get(map, "val_frac", 0.1)?,
            test_frac: get(map, "test_frac", 0.1)?,
            ..SplitSpec::default()
        };
        let cfg = RunConfig {
            data: map.get("data").map(PathBuf::from),
            format,
            mode,
            split,
            window: get(map, "window", 50)?,
            normalize: flag("normalize", true)?,
            difference: flag("difference", false)?,
            lattice,
            theta,
            grid: ThresholdGrid {
                lo: get(map, "grid_lo", 0.2)?,
                hi: get(map, "grid_hi", 0.6)?,
                step: get(map, "grid_step", 0.1)?,
            },
            seeds,
            out: PathBuf::from(map.get("out").map_or("out", String::as_str)),
            synth,
            magnitudes: map.get("magnitude").map(|m| parse_list("magnitude", m)).transpose()?,
            baseline_only: flag("baseline_only", false)?,
            dump_predictions: flag("dump_predictions", false)?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), CliError> {
        let cfg = |e: lattice::LatticeError| CliError::Usage(e.to_string());
        self.lattice.validate().map_err(cfg)?;
        self.split.validate().map_err(cfg)?;
        self.grid.values().map_err(cfg)?;
        if self.format != Format::Synth && self.data.is_none() {
            return Err(CliError::Usage("`data` is required unless format = synth".into()));
        }
        if self.format == Format::Synth {
            self.synth.validate().map_err(cfg)?;
        }
        if self.magnitudes.iter().flatten().any(|m| !(*m >= 0.0)) {
            return Err(CliError::Usage("magnitude must be >= 0".into()));
        }
        Ok(())
    }
}
