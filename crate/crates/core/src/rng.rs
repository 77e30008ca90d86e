//! Named random substreams derived from a single master seed.
//!
//! Every stage that needs randomness asks for its own stream by name (and
//! optionally an index), so adding draws in one stage never shifts another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fnv1a(name: &str) -> u64 {
    name.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01B3)
    })
}

/// Derives a child seed from `seed`, a stream name and a path of indices.
pub fn derive_seed(seed: u64, name: &str, path: &[u64]) -> u64 {
    let mut h = splitmix64(seed ^ fnv1a(name));
    for &p in path {
        h = splitmix64(h ^ splitmix64(p));
    }
    h
}

pub fn substream(seed: u64, name: &str) -> Rng {
    Rng::seed_from_u64(derive_seed(seed, name, &[]))
}

pub fn substream_at(seed: u64, name: &str, path: &[u64]) -> Rng {
    Rng::seed_from_u64(derive_seed(seed, name, path))
}
