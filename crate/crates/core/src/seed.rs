//! Deterministic seed derivation.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 mix of `(base, stream)`; used to give each fold, stage and
/// sub-model its own reproducible stream.
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    let mut z = base ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(0x6A09_E667_F3BC_C909);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn rng_for(base: u64, stream: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(base, stream))
}

/// Named streams so call sites never collide.
pub mod stream {
    pub const SPLIT: u64 = 1;
    pub const SPLIT_GAMMA: u64 = 2;
    pub const ENCODER_INIT: u64 = 10;
    pub const PRETRAIN: u64 = 11;
    pub const CLASSIFIER_F: u64 = 20;
    pub const CLASSIFIER_D: u64 = 21;
    pub const AGENT: u64 = 30;
    pub const ADVERSARIAL: u64 = 40;
    pub const FOLD: u64 = 1000;
}
