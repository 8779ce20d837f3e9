//! Seeded random streams.
//!
//! All randomness comes from ChaCha8 seeded by a base seed, with a separate
//! stream per domain so that, for example, subsampling never shares draws
//! with data generation.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Name and version of the generator, recorded in run manifests.
pub const PRNG_NAME: &str = "chacha8/rand_chacha-0.9";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u64)]
pub enum SeedDomain {
    Structure = 1,
    Sampling = 2,
    Subsample = 3,
    TieBreak = 4,
    Repetition = 5,
}

/// A generator for `(base, domain, index)`.
pub fn stream(base: u64, domain: SeedDomain, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(base);
    rng.set_stream(((domain as u64) << 56) ^ index);
    rng
}

/// A derived 64-bit seed for `(base, domain, index)`.
pub fn derive_seed(base: u64, domain: SeedDomain, index: u64) -> u64 {
    stream(base, domain, index).next_u64()
}
