use crate::energy::{attention_logits, softmax_rows, EnergyConfig};
use crate::error::{Error, Result};
use crate::numerics::Matrix;
use crate::unfold::{GraphMask, LayerWeights};

/// Row-stochastic attention matrix `softmax_beta(Y Y^T)`, optionally masked.
pub fn attention_matrix(y: &Matrix, cfg: &EnergyConfig, mask: Option<&GraphMask>) -> Result<Matrix> {
    let mut logits = attention_logits(y, cfg);
    if let Some(m) = mask {
        m.check(y.rows())?;
        for i in 0..y.rows() {
            for j in 0..y.rows() {
                if !m.contains(i, j) {
                    logits[(i, j)] = f64::NEG_INFINITY;
                }
            }
        }
    }
    Ok(softmax_rows(&logits))
}

/// `Y+ = softmax_beta(Y Y^T) Y`
pub fn attention_update(y: &Matrix, cfg: &EnergyConfig) -> Matrix {
    attention_matrix(y, cfg, None).expect("unmasked").matmul(y)
}

/// `Z+ = softmax_beta(Z W_a^s Z^T) Z`, with `beta` taken from the rows of `Z W_a`.
pub fn attention_update_weighted(z: &Matrix, weights: &LayerWeights, cfg: &EnergyConfig) -> Result<Matrix> {
    weights.check_tokens(z)?;
    let y = z.matmul(&weights.w_a_raw);
    Ok(attention_matrix(&y, cfg, None)?.matmul(z))
}

/// One attention step followed by one gradient step on E2: returns `(U, U W_f^s)`.
pub fn aim_step_pair(z: &Matrix, weights: &LayerWeights, cfg: &EnergyConfig) -> Result<(Matrix, Matrix)> {
    let u = attention_update_weighted(z, weights, cfg)?;
    let next = u.matmul(&weights.w_f_s);
    Ok((u, next))
}

/// Proximal operator of the first-quadrant indicator.
pub fn prox_relu(v: &Matrix) -> Matrix {
    v.map(|x| x.max(0.0))
}

/// `ReLU[softmax_beta(Z W_a^s Z^T) Z W_f^s]`
pub fn full_layer(z: &Matrix, weights: &LayerWeights, cfg: &EnergyConfig) -> Result<Matrix> {
    let (_, v) = aim_step_pair(z, weights, cfg)?;
    Ok(prox_relu(&v))
}

/// `(1 - alpha) Y + alpha softmax_beta(Y Y^T) Y` for `alpha` in `(0, 1]`.
pub fn residual_attention_update(y: &Matrix, alpha: f64, cfg: &EnergyConfig) -> Result<Matrix> {
    check_residual_alpha(alpha)?;
    let a = attention_update(y, cfg);
    Ok(blend(y, &a, alpha))
}

/// Attention restricted to graph neighbours.
pub fn graph_masked_update(y: &Matrix, mask: &GraphMask, cfg: &EnergyConfig) -> Result<Matrix> {
    Ok(attention_matrix(y, cfg, Some(mask))?.matmul(y))
}

pub(crate) fn check_residual_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha <= 1.0 {
        Ok(())
    } else {
        Err(Error::Precondition(format!("residual alpha must lie in (0, 1], got {alpha}")))
    }
}

pub(crate) fn blend(y: &Matrix, a: &Matrix, alpha: f64) -> Matrix {
    if alpha == 1.0 {
        return a.clone();
    }
    y.zip_map(a, |yi, ai| (1.0 - alpha) * yi + alpha * ai)
}
