use serde::{Deserialize, Serialize};

use crate::error::{dim_err, Result};
use crate::numerics::{Matrix, RngStream};

/// Extremal eigenvalue estimates of a symmetric matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralEstimate {
    pub lambda_max: f64,
    pub lambda_min: f64,
    pub iterations: usize,
    pub tol: f64,
}

const MAX_ITERATIONS: usize = 200_000;

/// Extremal eigenvalues by power iteration.
///
/// `lambda_max` comes from iterating on `M + sI` and `lambda_min` from
/// `sI - M`, where the Gershgorin radius `s` makes both shifted operators
/// positive semidefinite. Iteration stops once the eigen-residual
/// `||Mv - theta v||` drops below `tol * ||M||_F`, which bounds the distance
/// from `theta` to the spectrum by the same quantity.
pub fn spectral_bounds(m: &Matrix, tol: f64) -> Result<SpectralEstimate> {
    if !m.is_square() {
        return Err(dim_err(format!("spectral_bounds needs a square matrix, got {:?}", m.shape())));
    }
    if !m.is_symmetric(tol.max(1e-12)) {
        return Err(dim_err("spectral_bounds needs a symmetric matrix"));
    }
    let n = m.rows();
    let norm = m.norm();
    if norm == 0.0 {
        return Ok(SpectralEstimate { lambda_max: 0.0, lambda_min: 0.0, iterations: 0, tol });
    }
    let shift = gershgorin_radius(m);
    let start = RngStream::new(0x5eed_5eed, n as u64).normal_vec(n);

    let (top, it_top) = dominant(m, shift, 1.0, &start, tol * norm);
    let (bottom, it_bottom) = dominant(m, shift, -1.0, &start, tol * norm);
    Ok(SpectralEstimate {
        lambda_max: top.max(bottom),
        lambda_min: bottom.min(top),
        iterations: it_top + it_bottom,
        tol,
    })
}

/// Largest absolute Gershgorin bound, an upper bound on the spectral radius.
pub fn gershgorin_radius(m: &Matrix) -> f64 {
    m.row_iter().map(|r| r.iter().map(|x| x.abs()).sum::<f64>()).fold(0.0, f64::max)
}

// Dominant eigenpair of `shift*I + sign*M` (PSD by construction); returns the
// Rayleigh quotient of `M` at the converged vector.
fn dominant(m: &Matrix, shift: f64, sign: f64, start: &[f64], resid_tol: f64) -> (f64, usize) {
    let n = m.rows();
    let mut v = start.to_vec();
    normalize(&mut v);
    let mut mv = vec![0.0; n];
    let mut theta = 0.0;
    for it in 1..=MAX_ITERATIONS {
        apply(m, &v, &mut mv);
        theta = v.iter().zip(&mv).map(|(a, b)| a * b).sum::<f64>();
        let resid = v
            .iter()
            .zip(&mv)
            .map(|(vi, mvi)| (mvi - theta * vi).powi(2))
            .sum::<f64>()
            .sqrt();
        if resid <= resid_tol {
            return (theta, it);
        }
        for (vi, mvi) in v.iter_mut().zip(&mv) {
            *vi = shift * *vi + sign * mvi;
        }
        normalize(&mut v);
    }
    (theta, MAX_ITERATIONS)
}

fn apply(m: &Matrix, v: &[f64], out: &mut [f64]) {
    for (i, o) in out.iter_mut().enumerate() {
        *o = m.row(i).iter().zip(v).map(|(a, b)| a * b).sum();
    }
}

fn normalize(v: &mut [f64]) {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
}
