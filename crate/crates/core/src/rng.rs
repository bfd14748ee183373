//! Deterministic random streams.
//!
//! Every random draw in the crate comes from a ChaCha8 generator (a
//! counter-based stream cipher). A generator is keyed with
//! `ChaCha8Rng::seed_from_u64(seed)` and then placed on stream
//! `(domain << 56) | index`, so independent consumers (training graphs,
//! held-out graphs, weight init, ...) never share a stream and any single
//! stream can be reproduced without replaying the others.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Top byte of the ChaCha stream id.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum Domain {
    Generator = 0,
    Init = 1,
    TrainGraph = 2,
    EvalGraph = 3,
    /// Random directions and priors of gradient checks.
    Check = 4,
    /// Benchmark instances of sweeps and acceptance runs.
    Instance = 5,
}

pub fn stream(seed: u64, domain: Domain, index: u64) -> ChaCha8Rng {
    debug_assert!(index < (1 << 56));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((domain as u64) << 56) | index);
    rng
}

/// A fresh 64-bit seed taken from the head of a stream.
pub fn derive_seed(seed: u64, domain: Domain, index: u64) -> u64 {
    stream(seed, domain, index).next_u64()
}
