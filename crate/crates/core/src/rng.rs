//! Seed derivation helpers.
//!
//! Every stage of the pipeline (topology, per-scenario workloads, dataset
//! shuffle, weight init, random baseline) draws from its own ChaCha stream
//! whose seed is derived from the master seed and a stage label, so stages
//! can be re-run independently and adding a stage never perturbs the others.

use rand_chacha::rand_core::SeedableRng;
pub use rand_chacha::ChaCha8Rng;

/// SplitMix64 step, used to mix seeds and labels into stream seeds.
pub fn splitmix64(state: u64) -> u64 {
    let mut z = state.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Derives a sub-seed from `(master, label, index)`.
pub fn derive_seed(master: u64, label: &str, index: u64) -> u64 {
    let mut acc = splitmix64(master);
    for &b in label.as_bytes() {
        acc = splitmix64(acc ^ u64::from(b));
    }
    splitmix64(acc ^ index)
}

/// Deterministic RNG for a derived stream.
pub fn stream_rng(master: u64, label: &str, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, label, index))
}

/// Deterministic RNG seeded directly.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
