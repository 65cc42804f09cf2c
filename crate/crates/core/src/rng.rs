//! Seeded random streams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The generator used everywhere in the crate.
pub type Rng64 = ChaCha8Rng;

pub fn seeded(seed: u64) -> Rng64 {
    Rng64::seed_from_u64(seed)
}

/// Independent stream for `(seed, stream)`; used to give parallel runs
/// disjoint, reproducible randomness.
pub fn stream(seed: u64, stream: u64) -> Rng64 {
    let mut rng = Rng64::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
