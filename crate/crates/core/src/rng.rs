//! Seed derivation. Every random stream in a run is keyed by the run seed
//! plus a small tuple (generation, model index, purpose), so results do not
//! depend on execution order or thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The generator used throughout the crate.
pub type Rng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes `base` with each element of `stream`.
pub fn derive_seed(base: u64, stream: &[u64]) -> u64 {
    stream.iter().fold(splitmix64(base), |acc, &s| splitmix64(acc ^ splitmix64(s)))
}

pub fn rng_from(base: u64, stream: &[u64]) -> Rng {
    Rng::seed_from_u64(derive_seed(base, stream))
}
