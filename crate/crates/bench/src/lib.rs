//! Shared fixtures for the kernel benchmarks.

use descent_core::aim::QuadraticObjective;
use descent_core::harness::quadratic_pair;
use descent_core::{EnergyConfig, LayerWeights, Matrix, RngStream, StackConfig};

/// Non-negative token matrix `n x d`.
pub fn tokens(n: usize, d: usize, seed: u64) -> Matrix {
    RngStream::new(seed, 1).normal_matrix(n, d, 1.0).map(f64::abs)
}

/// Stack with the default small-scale initialization.
pub fn stack(depth: usize, d: usize, seed: u64) -> StackConfig {
    let w = LayerWeights::random(d, 0.02, 0.1, RngStream::new(seed, 0));
    StackConfig::new(depth, w, EnergyConfig::default().with_step(0.1))
}

pub fn quadratics(n: usize, d: usize, seed: u64) -> (QuadraticObjective, QuadraticObjective) {
    quadratic_pair(n, d, 0.3, seed)
}
