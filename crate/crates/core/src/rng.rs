//! Seed derivation.
//!
//! A run has one root seed. Sub-seeds are derived as
//! `derive(root, stream, index)` with a SplitMix64 finalizer, where `stream` names
//! the consumer (batch shuffling, k-means, per-sequence generation, folds...).

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const STREAM_INIT: u64 = 1;
pub const STREAM_SHUFFLE: u64 = 2;
pub const STREAM_KMEANS: u64 = 3;
pub const STREAM_SEQUENCE: u64 = 4;
pub const STREAM_STRUCTURE: u64 = 5;
pub const STREAM_SHIFT: u64 = 6;
pub const STREAM_FOLD: u64 = 7;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive(root: u64, stream: u64, index: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(root) ^ stream.wrapping_mul(0xA24B_AED4_963E_E407)) ^ index)
}

pub fn rng_for(root: u64, stream: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive(root, stream, index))
}
