//! Counter-based seeding.
//!
//! Every random draw in the crate comes from a ChaCha stream whose key is a
//! hash of `(seed, counters...)`. A replicate can therefore be regenerated in
//! isolation, and the outcome does not depend on how work is split across
//! threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer.
fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stream tags keep different consumers of the same seed apart.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    TileGroups = 1,
    Permutation = 2,
    MetaPermutation = 3,
    Simulation = 4,
    Bootstrap = 5,
    NaivePermutation = 6,
    Study = 7,
    Window = 8,
}

/// Derive a 64-bit key from a seed, a stream tag and a list of counters.
pub fn derive_key(seed: u64, stream: Stream, counters: &[u64]) -> u64 {
    let mut h = mix64(seed ^ mix64(stream as u64));
    for &c in counters {
        h = mix64(h ^ mix64(c.wrapping_add(0x632B_E59B_D9B4_E019)));
    }
    h
}

/// A ChaCha8 generator keyed on `(seed, stream, counters)`.
pub fn keyed_rng(seed: u64, stream: Stream, counters: &[u64]) -> ChaCha8Rng {
    let k0 = derive_key(seed, stream, counters);
    let mut key = [0u8; 32];
    let mut h = k0;
    for chunk in key.chunks_mut(8) {
        chunk.copy_from_slice(&h.to_le_bytes());
        h = mix64(h);
    }
    ChaCha8Rng::from_seed(key)
}
