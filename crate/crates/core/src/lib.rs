//! Confidence-gated hybrid sequential prediction.
//!
//! A sequence model (an LSTM trained from scratch) produces next-step scores and a
//! behavior embedding for every input sequence. Training embeddings are clustered
//! into behavioral archetypes, each carrying its own transition structure. At
//! inference time the distance from a sequence's embedding to its nearest archetype
//! is turned into a percentile-rank confidence; archetype scoring is mixed into the
//! backbone scores only when that confidence clears a calibrated threshold, and the
//! backbone output is returned untouched otherwise.
//!
//! Module map:
//!
//! * [`seqcore`]: sequences, vocabularies, ingestion, temporal and k-fold splits
//! * [`backbone`]: the LSTM backbone, BPTT training and gradient checking
//! * [`archetype`]: k-means archetypes, transition matrices and pattern means
//! * [`gate`]: percentile confidence, the binary gate, threshold calibration
//! * [`hybrid`]: the assembled predictor and multi-phase policy
//! * [`evalkit`]: ranking/regression metrics, multi-seed runs, t-tests, ablations
//! * [`synth`]: archetype-structured synthetic corpora and distribution shift
//! * [`bundle`]: versioned model persistence
//!
//! Data-parallel loops (per-sequence inference, per-batch gradients, per-seed runs)
//! go through [`exec::Exec`]; with the `parallel` feature disabled every path runs
//! sequentially and produces bit-identical results.

pub mod archetype;
pub mod backbone;
pub mod bundle;
pub mod error;
pub mod evalkit;
pub mod exec;
pub mod gate;
pub mod hybrid;
pub mod pipeline;
pub mod rng;
pub mod seqcore;
pub mod synth;

pub use error::{ErrorKind, LatticeError, Result};
pub use exec::Exec;
