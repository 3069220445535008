//! Seed derivation for reproducible, chunk-independent random streams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// SplitMix64 finaliser.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives an independent sub-seed from a base seed, a stream tag and an index.
pub fn derive_seed(base: u64, tag: u64, index: u64) -> u64 {
    mix64(mix64(base ^ mix64(tag)) ^ index.rotate_left(17))
}

/// Maps a 64-bit hash to a uniform draw on `[0, 1)` using its top 53 bits.
pub fn unit_from_hash(h: u64) -> f64 {
    (h >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

pub fn rng_from(seed: u64) -> SimRng {
    SimRng::seed_from_u64(seed)
}

// Stream tags.
pub(crate) const TAG_NOISE: u64 = 1;
pub(crate) const TAG_GLOBAL_PHASE: u64 = 2;
pub(crate) const TAG_DETECT: u64 = 3;
pub(crate) const TAG_SYMBOLS: u64 = 4;
pub(crate) const TAG_BOB: u64 = 5;
pub(crate) const TAG_COIN: u64 = 6;
pub(crate) const TAG_CHUNK: u64 = 7;
pub(crate) const TAG_POINT: u64 = 8;
