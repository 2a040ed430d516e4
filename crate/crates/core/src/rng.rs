//! Seeded random streams.
//!
//! Every run has one root seed. Work that may run in parallel derives its own
//! generator from `(seed, index)`, so results never depend on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

pub type DpRng = ChaCha20Rng;

/// Root generator for a seed (stream 0).
pub fn root(seed: u64) -> DpRng {
    ChaCha20Rng::seed_from_u64(seed)
}

/// Independent child stream `index` of `seed`.
pub fn stream(seed: u64, index: u64) -> DpRng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(index.wrapping_add(1));
    rng
}

/// Mixes a label into a seed so that distinct purposes never share streams.
pub fn derive_seed(seed: u64, label: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = seed ^ label.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
