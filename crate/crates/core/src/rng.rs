//! Seeded random streams.
//!
//! All randomness comes from [`ChaCha8Rng`] seeded with a 64-bit master seed.
//! Independent sub-streams use ChaCha's 64-bit stream selector, so task `i`
//! of a run seeded with `s` always sees the same numbers no matter how many
//! threads execute the run. Reproducibility is promised within one build of
//! this crate only.

use rand::SeedableRng;
pub use rand_chacha::ChaCha8Rng;

/// The stream used for a master seed.
pub fn master(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Sub-stream `index` derived from `seed`. Stream 0 is the master stream.
pub fn substream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}
