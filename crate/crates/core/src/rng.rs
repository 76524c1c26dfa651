//! Named random sub-streams derived from a single run seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    FailureSampling = 1,
    PatternSelection = 2,
    FewShot = 3,
    ValidationCarve = 4,
}

/// A generator for `(seed, stream, index)`. Distinct triples give
/// statistically independent streams.
pub fn stream(seed: u64, stream: Stream, index: u64) -> ChaCha8Rng {
    let mixed = splitmix64(splitmix64(seed ^ splitmix64(stream as u64)) ^ index);
    ChaCha8Rng::seed_from_u64(mixed)
}

/// A per-step seed, e.g. one per iteration, derived from the run seed.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    splitmix64(seed.wrapping_add(splitmix64(index)))
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
