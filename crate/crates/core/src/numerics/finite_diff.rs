use crate::error::{Error, Result};
use crate::numerics::Matrix;

pub const DEFAULT_STEP: f64 = 1e-5;

/// Central-difference gradient of a scalar field, one entry at a time.
pub fn finite_diff_grad<F>(f: F, y: &Matrix, h: f64) -> Result<Matrix>
where
    F: Fn(&Matrix) -> f64,
{
    if !(h > 0.0) {
        return Err(Error::Domain(format!("finite-difference step must be positive, got {h}")));
    }
    let mut probe = y.clone();
    let mut grad = Matrix::zeros(y.rows(), y.cols());
    for k in 0..y.len() {
        let orig = probe.as_slice()[k];
        probe.as_mut_slice()[k] = orig + h;
        let fp = f(&probe);
        probe.as_mut_slice()[k] = orig - h;
        let fm = f(&probe);
        probe.as_mut_slice()[k] = orig;
        if !fp.is_finite() || !fm.is_finite() {
            return Err(Error::Evaluation(format!("f is not finite near entry {k}")));
        }
        grad.as_mut_slice()[k] = (fp - fm) / (2.0 * h);
    }
    Ok(grad)
}

/// `||g_fd - g|| / max(1, ||g||)`.
pub fn relative_error(approx: &Matrix, exact: &Matrix) -> f64 {
    (approx - exact).norm() / exact.norm().max(1.0)
}
