use crate::error::{Error, Result};
use crate::numerics::Matrix;

const DEGENERATE_TOL: f64 = 1e-12;

/// `(y - mean(y) 1) / ||y - mean(y) 1||`
pub fn layernorm_steps(y: &[f64]) -> Result<Vec<f64>> {
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let centered: Vec<f64> = y.iter().map(|v| v - mean).collect();
    let norm = centered.iter().map(|v| v * v).sum::<f64>().sqrt();
    if !(norm > DEGENERATE_TOL) {
        return Err(Error::Degenerate("layernorm of a constant vector".into()));
    }
    Ok(centered.into_iter().map(|v| v / norm).collect())
}

/// The same map as two gradient steps.
///
/// Translation: step `1/(2d)` on `(sum_i y_i)^2`. Rescaling: step 1 on
/// `||u||^2 / 2 - ||u||`, whose gradient is `u - u / ||u||`.
pub fn layernorm_gradient_steps(y: &[f64]) -> Result<Vec<f64>> {
    let d = y.len() as f64;
    let s: f64 = y.iter().sum();
    let step = 1.0 / (2.0 * d);
    let u: Vec<f64> = y.iter().map(|v| v - step * 2.0 * s).collect();
    let norm = u.iter().map(|v| v * v).sum::<f64>().sqrt();
    if !(norm > DEGENERATE_TOL) {
        return Err(Error::Degenerate("layernorm of a constant vector".into()));
    }
    Ok(u.iter().map(|v| v - (v - v / norm)).collect())
}

/// Row-wise layernorm of a token matrix.
pub fn layernorm_rows(z: &Matrix) -> Result<Matrix> {
    let mut out = z.clone();
    for i in 0..z.rows() {
        let r = layernorm_steps(z.row(i))?;
        out.row_mut(i).copy_from_slice(&r);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::RngStream;

    #[test]
    fn fixed_point_on_normalized_input() {
        let y = [0.5f64.sqrt(), -(0.5f64.sqrt()), 0.0];
        let out = layernorm_steps(&y).unwrap();
        assert!(y.iter().zip(&out).all(|(a, b)| (a - b).abs() < 1e-12));
    }

    #[test]
    fn both_forms_agree() {
        for s in 0..10 {
            let y = RngStream::new(s, 0).normal_vec(7);
            let a = layernorm_steps(&y).unwrap();
            let b = layernorm_gradient_steps(&y).unwrap();
            assert!(a.iter().sum::<f64>().abs() < 1e-12);
            assert!((a.iter().map(|v| v * v).sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(a.iter().zip(&b).all(|(x, y)| (x - y).abs() < 1e-10));
        }
    }

    #[test]
    fn constant_input_rejected() {
        assert!(matches!(layernorm_steps(&[2.0; 4]), Err(Error::Degenerate(_))));
        assert!(layernorm_gradient_steps(&[2.0; 4]).is_err());
    }
}
