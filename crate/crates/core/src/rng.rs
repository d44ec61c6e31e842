//! Deterministic random streams.
//!
//! Every stream is a ChaCha8 generator whose 256-bit seed packs the
//! experiment seed together with one or two counters, so draws depend only
//! on their key and never on scheduling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn keyed(seed: u64, a: u64, b: u64, domain: u64) -> ChaCha8Rng {
    let mut bytes = [0u8; 32];
    bytes[..8].copy_from_slice(&seed.to_le_bytes());
    bytes[8..16].copy_from_slice(&a.to_le_bytes());
    bytes[16..24].copy_from_slice(&b.to_le_bytes());
    bytes[24..].copy_from_slice(&domain.to_le_bytes());
    ChaCha8Rng::from_seed(bytes)
}

/// Stream for one Monte Carlo trial.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    keyed(seed, trial, 0, 1)
}

/// Stream for one inner-loop initialization of the residue fit.
pub fn init_rng(seed: u64, outer: u64, candidate: u64) -> ChaCha8Rng {
    keyed(seed, outer, candidate, 2)
}

/// Derives a child seed from a parent seed and an index.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    keyed(seed, index, 0, 3).random()
}

/// Standard normal draw keyed by (seed, trial, sample).
pub fn counter_normal(seed: u64, trial: u64, sample: u64) -> f64 {
    let mut rng = keyed(seed, trial, sample, 4);
    // Box-Muller on (0, 1] x [0, 1).
    let u1: f64 = 1.0 - rng.random::<f64>();
    let u2: f64 = rng.random::<f64>();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}
