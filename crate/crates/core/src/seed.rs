//! Deterministic seed derivation.
//!
//! Every random stream in the lab is a [`ChaCha8Rng`] seeded from a 64-bit
//! value. Child seeds are derived by folding the parts of a cell key into
//! the parent with the SplitMix64 finalizer:
//!
//! ```text
//! h = base
//! for p in parts: h = splitmix64(h ^ splitmix64(p))
//! ```
//!
//! String keys (model family names) enter as their FNV-1a 64-bit hash.
//! Nothing here touches global state, so any cell of a sweep can be
//! reproduced in isolation.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type LabRng = ChaCha8Rng;

pub fn rng(seed: u64) -> LabRng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn fnv1a(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

pub fn derive_seed(base: u64, parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(base, |h, &p| splitmix64(h ^ splitmix64(p)))
}

/// Seed of one sweep cell: a pure function of (base seed, family, capacity, repeat).
pub fn cell_seed(base: u64, family: &str, capacity: u64, repeat: u64) -> u64 {
    derive_seed(base, &[fnv1a(family), capacity, repeat])
}
