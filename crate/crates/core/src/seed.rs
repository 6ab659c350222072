//! Seed derivation. Every stochastic stage draws from a stream keyed by
//! (run seed, stage tag), so stages never share or perturb each other's
//! randomness.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a seed with a stage tag into an independent 64-bit seed.
pub fn derive(seed: u64, tag: &str) -> u64 {
    tag.bytes()
        .fold(splitmix64(seed), |acc, b| splitmix64(acc ^ u64::from(b)))
}

pub fn rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn stage_rng(seed: u64, tag: &str) -> Rng {
    rng(derive(seed, tag))
}
