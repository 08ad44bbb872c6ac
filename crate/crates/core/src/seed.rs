//! Deterministic seed derivation.
//!
//! All randomness in the toolkit flows from `ChaCha8Rng` streams seeded with
//! 64-bit values. Derived seeds (per sweep cell, per noise draw) are produced
//! by folding the inputs through the SplitMix64 finalizer, so a value depends
//! only on its coordinates and never on the order in which jobs execute.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 output function.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Fold a sequence of words into one seed.
pub fn mix(words: &[u64]) -> u64 {
    words
        .iter()
        .fold(GOLDEN, |acc, &w| splitmix64(acc ^ splitmix64(w)))
}

/// Map a 64-bit hash onto the closed unit interval `[0, 1]`.
pub fn unit_closed(h: u64) -> f64 {
    const MAX53: f64 = ((1u64 << 53) - 1) as f64;
    (h >> 11) as f64 / MAX53
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
