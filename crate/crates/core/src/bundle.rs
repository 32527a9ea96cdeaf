//! Versioned single-file persistence of a fitted predictor.
//!
//! Layout: one magic line `LATTICE-BUNDLE v<version>` followed by a JSON body.
//! Floats are written with shortest round-trip formatting, so a reloaded model
//! reproduces scores bit for bit.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::archetype::ArchetypeModel;
use crate::backbone::{BackboneConfig, LstmBackbone};
use crate::error::{LatticeError, Result};
use crate::gate::{DistanceDistribution, GateConfig};
use crate::hybrid::{Ablation, LatticePredictor, PopularityPrior};
use crate::seqcore::{ItemVocab, NormStats};

pub const MAGIC: &str = "LATTICE-BUNDLE";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Bundle {
    pub predictor: LatticePredictor,
    pub vocab: Option<ItemVocab>,
    /// Normalization fitted on the training series (continuous mode).
    pub norm: Option<NormStats>,
    /// Whether `predictor.gate.theta` came from validation calibration.
    pub calibrated: bool,
}

#[derive(Serialize, Deserialize)]
struct BackboneBody {
    config: BackboneConfig,
    vocab_size: Option<usize>,
    params: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct Body {
    vocab: Option<ItemVocab>,
    vocab_fingerprint: Option<String>,
    norm: Option<NormStats>,
    calibrated: bool,
    backbone: BackboneBody,
    archetypes: ArchetypeModel,
    distances: DistanceDistribution,
    gate: GateConfig,
    popularity: Option<PopularityPrior>,
    popularity_weight: f64,
    ablation: Ablation,
}

fn header() -> String {
    format!("{MAGIC} v{VERSION}")
}

impl Bundle {
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        let p = &self.predictor;
        let body = Body {
            vocab: self.vocab.clone(),
            vocab_fingerprint: self.vocab.as_ref().map(ItemVocab::fingerprint),
            norm: self.norm,
            calibrated: self.calibrated,
            backbone: BackboneBody {
                config: *p.backbone.config(),
                vocab_size: crate::backbone::Backbone::vocab_size(&p.backbone),
                params: p.backbone.params().to_vec(),
            },
            archetypes: p.archetypes.clone(),
            distances: p.distances.clone(),
            gate: p.gate,
            popularity: p.popularity.clone(),
            popularity_weight: p.popularity_weight,
            ablation: p.ablation,
        };
        writeln!(w, "{}", header())?;
        serde_json::to_writer(&mut w, &body).map_err(|e| LatticeError::Bundle(e.to_string()))?;
        writeln!(w)?;
        Ok(())
    }

    pub fn read_from<R: BufRead>(mut r: R) -> Result<Self> {
        let mut first = String::new();
        r.read_line(&mut first)?;
        let first = first.trim_end();
        let version = first
            .strip_prefix(MAGIC)
            .and_then(|rest| rest.trim().strip_prefix('v'))
            .ok_or_else(|| LatticeError::Bundle("not a lattice bundle (bad magic header)".into()))?;
        if version != VERSION.to_string() {
            return Err(LatticeError::Bundle(format!(
                "unsupported bundle version {version}, expected {VERSION}"
            )));
        }
        let body: Body = serde_json::from_reader(r).map_err(|e| LatticeError::Bundle(e.to_string()))?;
        if let (Some(v), Some(fp)) = (&body.vocab, &body.vocab_fingerprint) {
            if &v.fingerprint() != fp {
                return Err(LatticeError::Bundle("vocabulary fingerprint mismatch".into()));
            }
        }
        let backbone = LstmBackbone::from_params(body.backbone.config, body.backbone.vocab_size, body.backbone.params)?;
        Ok(Bundle {
            predictor: LatticePredictor {
                backbone,
                archetypes: body.archetypes,
                distances: body.distances,
                gate: body.gate,
                popularity: body.popularity,
                popularity_weight: body.popularity_weight,
                ablation: body.ablation,
            },
            vocab: body.vocab,
            norm: body.norm,
            calibrated: body.calibrated,
        })
    }

    /// Writes to a sibling temp file and renames, so a crash never leaves a
    /// truncated bundle behind.
    pub fn save(&self, path: &Path) -> Result<()> {
        let tmp = path.with_extension("model.tmp");
        {
            let mut f = std::io::BufWriter::new(fs::File::create(&tmp)?);
            self.write_to(&mut f)?;
            f.flush()?;
        }
        fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_from(BufReader::new(fs::File::open(path)?))
    }
}
