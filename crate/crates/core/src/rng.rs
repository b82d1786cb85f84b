//! Seeded randomness.
//!
//! Every random draw in the toolkit comes from [`RandomSource`], which is
//! ChaCha8 (`rand_chacha::ChaCha8Rng`) seeded through `SeedableRng::seed_from_u64`.
//! ChaCha8 output is fully specified and platform independent, so a seed
//! reproduces the same datasets, keys and weights on any machine built from
//! the same lock file.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type RandomSource = ChaCha8Rng;

pub fn seeded(seed: u64) -> RandomSource {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Derives an independent seed for a named sub-stream (splitmix64 finalizer).
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
