//! Shared fixtures for the criterion benchmarks.

use acmo::{ParamVector, Rng};

/// Deterministic pseudo-random gradient of dimension `d`.
pub fn gradient(d: usize, seed: u64) -> ParamVector {
    let mut rng = Rng::new(seed, 0);
    ParamVector::from((0..d).map(|_| rng.normal()).collect::<Vec<_>>())
}
