//! Seed derivation.
//!
//! One global seed drives the whole pipeline. Each consumer derives its own
//! stream with [`mix`] so that adding a consumer never perturbs the others:
//!
//! | consumer              | derived seed                          |
//! |-----------------------|---------------------------------------|
//! | forest tree `i`       | `mix(forest_seed, i)`                 |
//! | selection objective   | `mix(global, STREAM_SELECT)`          |
//! | final forest          | `mix(global, STREAM_TRAIN)`           |
//! | CV fold `k` forest    | `mix(objective_seed, k)`              |

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const STREAM_SELECT: u64 = 0x005e_1ec7;
pub const STREAM_TRAIN: u64 = 0x7a_a1_4e;
pub const STREAM_FOLDS: u64 = 0xf0_1d5;

/// SplitMix64 finalizer applied to `seed ^ golden * (stream + 1)`.
pub fn mix(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ 0x9e37_79b9_7f4a_7c15u64.wrapping_mul(stream.wrapping_add(1));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
