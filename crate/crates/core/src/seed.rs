//! Seed derivation. Every stochastic stage draws from its own ChaCha stream
//! keyed by `(base seed, tag, index)` so results do not depend on call order
//! or thread count.

use std::hash::Hasher;

use fnv::FnvHasher;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a base seed with a string tag and an integer index.
pub fn derive_seed(base: u64, tag: &str, index: u64) -> u64 {
    let mut h = FnvHasher::default();
    h.write(tag.as_bytes());
    let tag_hash = h.finish();
    splitmix64(splitmix64(base ^ tag_hash).wrapping_add(index))
}

pub fn rng_for(base: u64, tag: &str, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(base, tag, index))
}
