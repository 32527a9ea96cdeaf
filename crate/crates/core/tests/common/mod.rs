#![allow(dead_code)]

use lattice::backbone::{BackboneConfig, Optimizer};
use lattice::evalkit::ExperimentData;
use lattice::hybrid::LatticePredictor;
use lattice::pipeline::{fit_lattice, LatticeConfig};
use lattice::seqcore::{Mode, SequenceDataset};
use lattice::synth::{gen_dataset, SynthSpec};
use lattice::Exec;

/// A backbone small enough to train in well under a second.
pub fn quick_config(mode: Mode, seed: u64) -> LatticeConfig {
    let backbone = BackboneConfig {
        mode,
        embed_dim: 8,
        hidden_dim: 16,
        epochs: 3,
        batch_size: 32,
        learning_rate: 0.01,
        seed,
        optimizer: Optimizer::adam(),
        clip_norm: 5.0,
    };
    LatticeConfig { backbone, num_archetypes: 3, ..LatticeConfig::default() }
}

pub fn small_spec(mode: Mode) -> SynthSpec {
    let base = match mode {
        Mode::Discrete => SynthSpec::default(),
        Mode::Continuous => SynthSpec::continuous(),
    };
    SynthSpec { num_sequences: 300, ..base }
}

pub fn corpus(spec: &SynthSpec, sample_seed: u64) -> SequenceDataset {
    gen_dataset(&spec.with_seed(sample_seed)).unwrap().dataset
}

pub fn small_data(mode: Mode) -> ExperimentData {
    let spec = small_spec(mode);
    ExperimentData { train: corpus(&spec, 1), val: Some(corpus(&spec, 2)), test: corpus(&spec, 3) }
}

pub type Fixture = ExperimentData;

pub fn quick_predictor(mode: Mode, seed: u64) -> (LatticePredictor, ExperimentData) {
    let data = small_data(mode);
    let (p, _) = fit_lattice(&data.train, &quick_config(mode, seed), Exec::Parallel).unwrap();
    (p, data)
}
