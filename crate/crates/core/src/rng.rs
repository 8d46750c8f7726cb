//! Seed derivation and reproducible random streams.
//!
//! Every consumer of randomness gets its own stream keyed by a 64-bit seed
//! and a small integer tag, so results never depend on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive an independent sub-seed from `seed` and a tag.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    mix64(mix64(seed) ^ tag.wrapping_mul(0xD6E8_FEB8_6659_FD93))
}

/// Counter-based stream: the same `(seed, stream)` pair always yields the
/// same sequence, independent of any other stream.
pub fn stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Tags for [`derive_seed`].
pub mod tags {
    pub const SOURCE_PATHS: u64 = 1;
    pub const RECEIVER_PATHS: u64 = 2;
    pub const TEST_GRID: u64 = 3;
    pub const FOLDS: u64 = 4;
    pub const INIT: u64 = 5;
    pub const SHUFFLE: u64 = 6;
    pub const DRY: u64 = 7;
    pub const PLACEMENT: u64 = 8;
}
