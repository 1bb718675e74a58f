//! Deterministic RNG streams. Every randomized stage derives an independent
//! ChaCha stream from (root seed, label, index) so corpora and training runs
//! are reproducible byte for byte.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

fn hash_label(label: &str) -> u64 {
    // FNV-1a
    let mut h: u64 = 0xcbf29ce484222325;
    for b in label.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

/// Stream for (seed, label, index), e.g. one per dialogue id.
pub fn stream(seed: u64, label: &str, index: u64) -> ChaCha8Rng {
    let s = splitmix64(seed ^ splitmix64(hash_label(label)) ^ splitmix64(index));
    ChaCha8Rng::seed_from_u64(s)
}

/// Stream for (seed, label).
pub fn labeled(seed: u64, label: &str) -> ChaCha8Rng {
    stream(seed, label, 0)
}
