//! Seeded random streams.
//!
//! Every sampler in the crate draws from ChaCha20 keyed by a 64-bit seed.
//! The 32-byte ChaCha key is the little-endian concatenation of four
//! consecutive splitmix64 outputs starting from the seed, so any ChaCha20
//! implementation can reproduce a corpus from the seeds recorded in it.
//! Child seeds are derived with [`derive_seed`], never by sharing a stream.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

/// Identifier recorded in corpus metadata.
pub const RNG_ALGORITHM: &str = "chacha20-splitmix64";

pub type Rng = ChaCha20Rng;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// The splitmix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn seeded(seed: u64) -> Rng {
    let mut key = [0u8; 32];
    let mut state = seed;
    for chunk in key.chunks_exact_mut(8) {
        state = state.wrapping_add(GOLDEN_GAMMA);
        chunk.copy_from_slice(&mix64(state).to_le_bytes());
    }
    ChaCha20Rng::from_seed(key)
}

/// Deterministic child seed for `(parent, label)`.
pub fn derive_seed(parent: u64, label: u64) -> u64 {
    mix64(mix64(parent ^ 0xD134_2543_DE82_EF95).wrapping_add(label.wrapping_mul(GOLDEN_GAMMA)))
}

/// Label space for child streams, kept apart so unrelated draws never share a seed.
pub(crate) mod labels {
    pub const NULL_STREAM: u64 = 1;
    pub const LAYOUT: u64 = 2;
    pub const STRENGTH: u64 = 3;
    pub const EMBED: u64 = 4;
}
