use serde::{Deserialize, Serialize};

use crate::energy::functions::half_sq_dist;
use crate::energy::{BetaMode, EnergyConfig, RhoKind};
use crate::error::{Error, Result};
use crate::numerics::{dot, Matrix};

/// Which formula produces the attention coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum CoefficientMode {
    /// Row-normalized `Gamma`, valid for any input.
    #[default]
    General,
    /// Closed form in the inner products `y_i . y_j`; requires unit-norm rows.
    ClosedForm,
}

const UNIT_NORM_TOL: f64 = 1e-9;

/// Row-wise softmax in the log domain. `-inf` entries get zero weight.
pub fn softmax_rows(logits: &Matrix) -> Matrix {
    let mut out = logits.clone();
    for i in 0..out.rows() {
        let row = out.row_mut(i);
        let max = row.iter().copied().filter(|v| v.is_finite()).fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = if v.is_finite() { (*v - max).exp() } else { 0.0 };
            sum += *v;
        }
        row.iter_mut().for_each(|v| *v /= sum);
    }
    out
}

/// Logits of the reweighted softmax `softmax_beta(Y Y^T)`.
///
/// For NegExp these are `y_i . y_j - ||y_j||^2 / 2` (or the bare inner
/// products in Uniform mode). The log kinds use `log rho'(z_ij)`, which
/// normalizes to the rows of `Gamma`.
pub fn attention_logits(y: &Matrix, cfg: &EnergyConfig) -> Matrix {
    let n = y.rows();
    match (cfg.rho, cfg.beta_mode) {
        (RhoKind::NegExp, BetaMode::Reweighted) => {
            let sq = y.row_norms_sq();
            Matrix::from_fn(n, n, |i, j| dot(y.row(i), y.row(j)) - 0.5 * sq[j])
        }
        (_, BetaMode::Uniform) => Matrix::from_fn(n, n, |i, j| dot(y.row(i), y.row(j))),
        (kind, BetaMode::Reweighted) => {
            Matrix::from_fn(n, n, |i, j| kind.log_prime_unchecked(half_sq_dist(y.row(i), y.row(j))))
        }
    }
}

/// Row-stochastic coefficients `a_ij`: row `i` of `Gamma` normalized to sum 1.
pub fn attention_coefficients(y: &Matrix, kind: RhoKind, mode: CoefficientMode) -> Result<Matrix> {
    match mode {
        CoefficientMode::General => {
            let n = y.rows();
            let logits = Matrix::from_fn(n, n, |i, j| {
                kind.log_prime_unchecked(half_sq_dist(y.row(i), y.row(j)))
            });
            Ok(softmax_rows(&logits))
        }
        CoefficientMode::ClosedForm => closed_form(y, kind),
    }
}

// Under unit norms z_ij = 1 - s_ij with s_ij = y_i . y_j.
fn closed_form(y: &Matrix, kind: RhoKind) -> Result<Matrix> {
    for (i, s) in y.row_norms_sq().iter().enumerate() {
        if (s.sqrt() - 1.0).abs() > UNIT_NORM_TOL {
            return Err(Error::Precondition(format!(
                "closed-form coefficients need unit-norm rows; row {i} has norm {}",
                s.sqrt()
            )));
        }
    }
    let n = y.rows();
    let s = Matrix::from_fn(n, n, |i, j| dot(y.row(i), y.row(j)));
    if kind == RhoKind::NegExp {
        return Ok(softmax_rows(&s));
    }
    let offset = if kind == RhoKind::LogPlus2 { 3.0 } else { 2.0 };
    let mut a = s.map(|sij| 1.0 / (offset - sij));
    for i in 0..n {
        let row = a.row_mut(i);
        let total: f64 = row.iter().sum();
        row.iter_mut().for_each(|v| *v /= total);
    }
    Ok(a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::gamma_weights;
    use crate::numerics::RngStream;

    fn unit_rows(y: &Matrix) -> Matrix {
        let norms = y.row_norms_sq();
        Matrix::from_fn(y.rows(), y.cols(), |i, j| y[(i, j)] / norms[i].sqrt())
    }

    #[test]
    fn equal_rows_give_uniform_weights() {
        let y = Matrix::filled(4, 3, 0.5);
        for kind in RhoKind::ALL {
            let a = attention_coefficients(&y, kind, CoefficientMode::General).unwrap();
            assert!(a.as_slice().iter().all(|&v| (v - 0.25).abs() < 1e-15));
        }
    }

    #[test]
    fn rows_are_stochastic() {
        let y = RngStream::new(1, 0).normal_matrix(7, 3, 2.0);
        for kind in RhoKind::ALL {
            let a = attention_coefficients(&y, kind, CoefficientMode::General).unwrap();
            for r in a.row_iter() {
                assert!((r.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn negexp_matches_reweighted_softmax() {
        let y = RngStream::new(2, 0).normal_matrix(6, 4, 1.5);
        let a = attention_coefficients(&y, RhoKind::NegExp, CoefficientMode::General).unwrap();
        let b = softmax_rows(&attention_logits(&y, &EnergyConfig::default()));
        assert!(a.max_abs_diff(&b) < 1e-12);
    }

    #[test]
    fn closed_form_agrees_with_general_on_unit_sphere() {
        let y = unit_rows(&RngStream::new(3, 0).normal_matrix(5, 3, 1.0));
        for kind in RhoKind::ALL {
            let a = attention_coefficients(&y, kind, CoefficientMode::General).unwrap();
            let b = attention_coefficients(&y, kind, CoefficientMode::ClosedForm).unwrap();
            assert!(a.max_abs_diff(&b) < 1e-12, "{kind:?}");
            let g = gamma_weights(&y, kind).gamma;
            let row0: f64 = g.row(0).iter().sum();
            assert!((b[(0, 1)] - g[(0, 1)] / row0).abs() < 1e-12);
        }
    }

    #[test]
    fn closed_form_rejects_off_sphere() {
        let y = Matrix::filled(2, 2, 1.0);
        let r = attention_coefficients(&y, RhoKind::LogPlus2, CoefficientMode::ClosedForm);
        assert!(matches!(r, Err(Error::Precondition(_))));
    }

    #[test]
    fn masked_softmax_row() {
        let l = Matrix::from_rows(&[vec![0.0, f64::NEG_INFINITY, 1.0]]).unwrap();
        let s = softmax_rows(&l);
        assert_eq!(s[(0, 1)], 0.0);
        assert!((s[(0, 0)] + s[(0, 2)] - 1.0).abs() < 1e-15);
    }
}
