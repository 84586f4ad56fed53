//! Deterministic random streams.
//!
//! Every stream in the crate is a `Xoshiro256PlusPlus` seeded from a 64-bit
//! value. Child streams (replicates, w-field stripes) are derived by mixing
//! the parent seed with an index through SplitMix64, so the derivation is
//! independent of execution order and worker count.

use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;

pub type SmurfRng = Xoshiro256PlusPlus;

pub fn rng_from_seed(seed: u64) -> SmurfRng {
    Xoshiro256PlusPlus::seed_from_u64(seed)
}

#[inline]
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for child stream `indices` of `seed`.
pub fn derive_seed(seed: u64, indices: &[u64]) -> u64 {
    indices
        .iter()
        .fold(splitmix64(seed), |acc, &i| splitmix64(acc ^ splitmix64(i)))
}
