//! Seeded random number generation.
//!
//! Every stochastic operation takes an explicit `u64` seed. Independent
//! sub-computations (EM restarts, per-G evidence runs, parallel chains) use
//! distinct ChaCha streams of the same seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Generator used throughout the crate.
pub type FinmixRng = ChaCha8Rng;

/// Name and version of the generator, recorded in run manifests.
pub const RNG_NAME: &str = "ChaCha8 (rand_chacha 0.9), seed_from_u64 + set_stream";

/// Generator for `seed` on stream 0.
pub fn rng_from_seed(seed: u64) -> FinmixRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Generator for `seed` on an independent stream.
pub fn rng_stream(seed: u64, stream: u64) -> FinmixRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
