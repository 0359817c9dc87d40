//! Keyed random streams.
//!
//! Every unit of simulation work draws from its own ChaCha stream whose seed
//! is a hash of the run seed and the unit's identifying keys, so results do
//! not depend on how work is scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a seed with a sequence of keys into a new 64-bit seed.
pub fn derive_seed(seed: u64, keys: &[u64]) -> u64 {
    keys.iter()
        .fold(splitmix64(seed), |acc, &k| splitmix64(acc ^ splitmix64(k)))
}

pub fn stream(seed: u64) -> StreamRng {
    StreamRng::seed_from_u64(seed)
}

/// Random stream for the work unit identified by `keys` under `seed`.
pub fn substream(seed: u64, keys: &[u64]) -> StreamRng {
    StreamRng::seed_from_u64(derive_seed(seed, keys))
}
