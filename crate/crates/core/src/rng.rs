//! Seeded random streams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Generator used by every run in the crate.
pub type SmcRng = ChaCha8Rng;

/// Identification string recorded in seed manifests.
pub const RNG_NAME: &str = "rand_chacha::ChaCha8Rng";

/// Generator for a single run.
pub fn seeded_rng(seed: u64) -> SmcRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent stream for replicate `index` of a batch keyed by `seed`.
///
/// Stream 0 is reserved for [`seeded_rng`], so replicate streams never
/// coincide with the base stream.
pub fn replicate_rng(seed: u64, index: u64) -> SmcRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index.wrapping_add(1));
    rng
}
