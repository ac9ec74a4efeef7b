//! Seed derivation.
//!
//! A single top-level `u64` seed feeds every random decision in the
//! pipeline. Child seeds are derived with [`derive_seed`], which folds a
//! sequence of stream tags into the parent through the SplitMix64 finalizer:
//!
//! ```text
//! state = parent
//! for tag in tags: state = splitmix64(state ^ splitmix64(tag))
//! ```
//!
//! Random streams are ChaCha8 (`rand_chacha::ChaCha8Rng::seed_from_u64`),
//! whose output is fixed by its published algorithm and identical on every
//! platform.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream tags used by the pipeline stages.
pub mod stream {
    pub const SPLIT: u64 = 0x5350_4c49;
    pub const SUBSPLIT: u64 = 0x5355_4253;
    pub const PCA: u64 = 0x0050_4341;
    pub const SVM: u64 = 0x0053_564d;
    pub const WEIGHTS: u64 = 0x5747_5453;
    pub const TEXTURE: u64 = 0x5445_5854;
    pub const SAMPLE: u64 = 0x534d_504c;
}

pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn derive_seed(parent: u64, tags: &[u64]) -> u64 {
    tags.iter()
        .fold(parent, |state, &tag| splitmix64(state ^ splitmix64(tag)))
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
