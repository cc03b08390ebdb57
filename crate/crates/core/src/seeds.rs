//! Seed derivation shared by every randomized stage.
//!
//! All randomness in the crate flows from a single master seed. Sub-seeds are
//! derived with SplitMix64 so that a (stage, index) pair always maps to the
//! same stream, independent of scheduling or thread count.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// One SplitMix64 output for state `x`.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed from `parent` and a list of integer coordinates.
pub fn derive(parent: u64, path: &[u64]) -> u64 {
    path.iter().fold(splitmix64(parent), |acc, &p| {
        splitmix64(acc ^ splitmix64(p))
    })
}

/// Stage tags, so that e.g. fold 3's shuffle and fold 3's ε draws never collide.
pub mod stage {
    pub const SPLIT: u64 = 1;
    pub const PRETRAIN: u64 = 2;
    pub const FINETUNE: u64 = 3;
    pub const INIT: u64 = 4;
    pub const FOLD: u64 = 5;
    pub const REPEAT: u64 = 6;
    pub const VALIDATION: u64 = 7;
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
