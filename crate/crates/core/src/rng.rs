//! Seed derivation. Every random stream in the crate is a ChaCha8 generator
//! keyed by a base seed and selected by a stream id, so work can be split per
//! user and method without depending on execution order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent stream `stream` under `seed`.
pub fn stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// FNV-1a over the labels, used to turn (user, method) names into stream ids.
pub fn stream_id(labels: &[&str]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for label in labels {
        for b in label.bytes().chain(std::iter::once(0x1f)) {
            h ^= b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    h
}

/// A child seed for `labels`, for APIs that take a plain `u64`.
pub fn derive_seed(seed: u64, labels: &[&str]) -> u64 {
    use rand::RngCore;
    stream(seed, stream_id(labels)).next_u64()
}
