use serde::{Deserialize, Serialize};

use crate::energy::{BetaMode, EnergyConfig, RhoKind};
use crate::error::{dim_err, Result};
use crate::numerics::{dot, Matrix};
use crate::unfold::{GraphMask, LayerWeights};

/// Pairwise weights `Gamma_uv = rho'(||y_u - y_v||^2 / 2)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaWeights {
    pub gamma: Matrix,
}

impl GammaWeights {
    pub fn n(&self) -> usize {
        self.gamma.rows()
    }

    /// Graph Laplacian `D - Gamma`; `sum_ij gamma_ij ||y_i - y_j||^2 / 2 = tr(Y^T L Y)`.
    pub fn laplacian(&self) -> Matrix {
        let n = self.n();
        let mut l = self.gamma.scale(-1.0);
        for i in 0..n {
            let deg: f64 = self.gamma.row(i).iter().sum();
            l[(i, i)] += deg;
        }
        l
    }

    /// Zeroes entries outside the graph.
    pub fn masked(&self, mask: &GraphMask) -> Result<GammaWeights> {
        mask.check(self.n())?;
        let gamma = Matrix::from_fn(self.n(), self.n(), |i, j| {
            if mask.contains(i, j) {
                self.gamma[(i, j)]
            } else {
                0.0
            }
        });
        Ok(GammaWeights { gamma })
    }
}

/// E1, E2 and the first-quadrant indicator of one representation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyValue {
    pub e1: f64,
    pub e2: f64,
    pub feasible: bool,
    /// `e1 + e2`, present only when feasible.
    pub total: Option<f64>,
}

impl EnergyValue {
    pub fn new(e1: f64, e2: f64, feasible: bool) -> Self {
        Self { e1, e2, feasible, total: feasible.then_some(e1 + e2) }
    }

    /// `e1 + e2` ignoring feasibility.
    pub fn smooth(&self) -> f64 {
        self.e1 + self.e2
    }
}

pub(crate) fn half_sq_dist(a: &[f64], b: &[f64]) -> f64 {
    0.5 * a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>()
}

pub fn beta_weights(y: &Matrix, mode: BetaMode) -> Vec<f64> {
    match mode {
        BetaMode::Reweighted => y.row_norms_sq().into_iter().map(|s| (-0.5 * s).exp()).collect(),
        BetaMode::Uniform => vec![1.0; y.rows()],
    }
}

/// `E1(Y) = sum_i sum_j rho(||y_i - y_j||^2 / 2) + R(Y)`, over all ordered pairs.
pub fn e1(y: &Matrix, cfg: &EnergyConfig) -> Result<f64> {
    e1_masked(y, cfg, None)
}

/// E1 with the pair sum restricted to graph neighbours (self-loops included).
pub fn e1_masked(y: &Matrix, cfg: &EnergyConfig, mask: Option<&GraphMask>) -> Result<f64> {
    let n = y.rows();
    if let Some(m) = mask {
        m.check(n)?;
    }
    let mut pairs = 0.0;
    for i in 0..n {
        for j in 0..n {
            if mask.is_some_and(|m| !m.contains(i, j)) {
                continue;
            }
            pairs += cfg.rho.value_unchecked(half_sq_dist(y.row(i), y.row(j)));
        }
    }
    Ok(pairs + cfg.regularizer(y)?)
}

pub fn gamma_weights(y: &Matrix, kind: RhoKind) -> GammaWeights {
    let n = y.rows();
    let mut gamma = Matrix::zeros(n, n);
    for i in 0..n {
        gamma[(i, i)] = kind.prime_unchecked(0.0);
        for j in (i + 1)..n {
            let g = kind.prime_unchecked(half_sq_dist(y.row(i), y.row(j)));
            gamma[(i, j)] = g;
            gamma[(j, i)] = g;
        }
    }
    GammaWeights { gamma }
}

/// NegExp weights through the factorization `exp(y_u . y_v) beta_u beta_v`.
pub fn gamma_weights_factorized(y: &Matrix) -> GammaWeights {
    let beta = beta_weights(y, BetaMode::Reweighted);
    let n = y.rows();
    let gamma = Matrix::from_fn(n, n, |u, v| dot(y.row(u), y.row(v)).exp() * beta[u] * beta[v]);
    GammaWeights { gamma }
}

/// Majorizer `sum_uv gamma_uv ||y_u - y_v||^2 / 2 + R(Y)`.
pub fn tilde_e1(y: &Matrix, gamma: &GammaWeights, cfg: &EnergyConfig) -> Result<f64> {
    let n = y.rows();
    if gamma.n() != n || !gamma.gamma.is_square() {
        return Err(dim_err(format!("Gamma is {:?} for {n} tokens", gamma.gamma.shape())));
    }
    let mut s = 0.0;
    for u in 0..n {
        for v in 0..n {
            let g = gamma.gamma[(u, v)];
            if g != 0.0 {
                s += g * half_sq_dist(y.row(u), y.row(v));
            }
        }
    }
    Ok(s + cfg.regularizer(y)?)
}

/// `E2(Y) = Tr(Y W_f Y^T) / 2 + ||Y||^2 / 2`
pub fn e2(y: &Matrix, w_f: &Matrix) -> Result<f64> {
    check_square_weight(y, w_f, "W_f")?;
    Ok(0.5 * y.matmul(w_f).inner(y) + 0.5 * y.norm_sq())
}

/// First-quadrant indicator as a feasibility flag: true iff every entry is `>= 0`.
pub fn phi_indicator(y: &Matrix) -> bool {
    y.as_slice().iter().all(|&v| v >= 0.0)
}

/// `E(Z) = E1(Z W_a) + E2(Z) + phi(Z)`.
///
/// The bias lives in token space: the regularizer is `||(Z - B) W_a||^2 / 2`.
pub fn total_energy(z: &Matrix, weights: &LayerWeights, cfg: &EnergyConfig) -> Result<EnergyValue> {
    total_energy_with(z, weights, cfg, None, true)
}

pub(crate) fn total_energy_with(
    z: &Matrix,
    weights: &LayerWeights,
    cfg: &EnergyConfig,
    mask: Option<&GraphMask>,
    phi_active: bool,
) -> Result<EnergyValue> {
    weights.check_tokens(z)?;
    cfg.check_bias(z)?;
    let y = z.matmul(&weights.w_a_raw);
    let mapped = mapped_config(cfg, weights);
    let e1v = e1_masked(&y, &mapped, mask)?;
    let e2v = e2(z, &weights.w_f_raw)?;
    let feasible = !phi_active || phi_indicator(z);
    Ok(EnergyValue::new(e1v, e2v, feasible))
}

/// Copy of `cfg` with the bias carried into `Y = Z W_a` space.
pub(crate) fn mapped_config(cfg: &EnergyConfig, weights: &LayerWeights) -> EnergyConfig {
    let mut mapped = cfg.clone();
    mapped.bias_b = cfg.bias_b.as_ref().map(|b| b.matmul(&weights.w_a_raw));
    mapped
}

/// Analytic gradient of E1: `2 sum_j gamma_ij (y_i - y_j) + (y_i - b_i)`.
pub fn e1_grad(y: &Matrix, cfg: &EnergyConfig) -> Result<Matrix> {
    tilde_e1_grad(y, &gamma_weights(y, cfg.rho), cfg)
}

/// Gradient of the majorizer at fixed `Gamma`: `2 L Y + grad R`.
pub fn tilde_e1_grad(y: &Matrix, gamma: &GammaWeights, cfg: &EnergyConfig) -> Result<Matrix> {
    if gamma.n() != y.rows() {
        return Err(dim_err("Gamma does not match token count"));
    }
    let mut g = gamma.laplacian().matmul(y).scale(2.0);
    g += &cfg.regularizer_grad(y)?;
    Ok(g)
}

/// `grad E2(Y) = Y (W_f + W_f^T) / 2 + Y`
pub fn e2_grad(y: &Matrix, w_f: &Matrix) -> Result<Matrix> {
    check_square_weight(y, w_f, "W_f")?;
    Ok(&y.matmul(&w_f.symmetric_part()) + y)
}

fn check_square_weight(y: &Matrix, w: &Matrix, name: &str) -> Result<()> {
    if !w.is_square() || w.rows() != y.cols() {
        return Err(dim_err(format!("{name} is {:?} for tokens of width {}", w.shape(), y.cols())));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{finite_diff_grad, relative_error, RngStream};

    #[test]
    fn e1_small_cases() {
        let cfg = EnergyConfig::default();
        assert_eq!(e1(&Matrix::zeros(1, 1), &cfg).unwrap(), -1.0);
        assert_eq!(e1(&Matrix::zeros(2, 3), &cfg).unwrap(), -4.0);
    }

    #[test]
    fn e1_matches_naive_loop() {
        let y = RngStream::new(3, 0).normal_matrix(5, 3, 1.0);
        for rho in RhoKind::ALL {
            let cfg = EnergyConfig::default().with_rho(rho);
            let mut s = 0.0;
            for i in 0..5 {
                for j in 0..5 {
                    let mut d = 0.0;
                    for k in 0..3 {
                        d += (y[(i, k)] - y[(j, k)]).powi(2);
                    }
                    s += match rho {
                        RhoKind::NegExp => -(-(d / 2.0)).exp(),
                        RhoKind::LogPlus2 => (d / 2.0 + 2.0).ln(),
                        RhoKind::LogPlus1 => (d / 2.0 + 1.0).ln(),
                    };
                }
            }
            let r: f64 = y.as_slice().iter().map(|v| v * v).sum::<f64>() / 2.0;
            assert!((e1(&y, &cfg).unwrap() - (s + r)).abs() < 1e-12);
        }
    }

    #[test]
    fn beta_cases() {
        let y = Matrix::from_rows(&[vec![0.0, 0.0], vec![1.0, 0.0], vec![0.6, 0.8]]).unwrap();
        let b = beta_weights(&y, BetaMode::Reweighted);
        assert_eq!(b[0], 1.0);
        assert!((b[1] - (-0.5f64).exp()).abs() < 1e-15);
        assert!((b[2] - (-0.5f64).exp()).abs() < 1e-15);
        assert_eq!(beta_weights(&y, BetaMode::Uniform), vec![1.0; 3]);
    }

    #[test]
    fn gamma_forms_agree() {
        let y = RngStream::new(4, 0).normal_matrix(6, 3, 0.8);
        let a = gamma_weights(&y, RhoKind::NegExp);
        let b = gamma_weights_factorized(&y);
        assert!(a.gamma.max_abs_diff(&b.gamma) < 1e-12);
        assert!(a.gamma.is_symmetric(0.0));
        for i in 0..6 {
            assert_eq!(a.gamma[(i, i)], 1.0);
        }
    }

    #[test]
    fn gamma_identical_rows_and_logplus2() {
        let y = Matrix::filled(3, 2, 0.4);
        assert!(gamma_weights(&y, RhoKind::NegExp).gamma.as_slice().iter().all(|&g| g == 1.0));
        let y = Matrix::from_rows(&[vec![1.0, 0.0], vec![1.0, 0.0]]).unwrap();
        assert_eq!(gamma_weights(&y, RhoKind::LogPlus2).gamma[(0, 1)], 0.5);
    }

    #[test]
    fn tilde_e1_zero_gamma_is_regularizer() {
        let y = RngStream::new(5, 0).normal_matrix(4, 2, 1.0);
        let cfg = EnergyConfig::default();
        let g = GammaWeights { gamma: Matrix::zeros(4, 4) };
        assert_eq!(tilde_e1(&y, &g, &cfg).unwrap(), 0.5 * y.norm_sq());
        let bad = GammaWeights { gamma: Matrix::zeros(3, 3) };
        assert!(tilde_e1(&y, &bad, &cfg).is_err());
    }

    #[test]
    fn e2_cases() {
        let y = RngStream::new(6, 0).normal_matrix(3, 4, 1.0);
        assert_eq!(e2(&Matrix::zeros(3, 4), &Matrix::identity(4)).unwrap(), 0.0);
        assert!((e2(&y, &Matrix::identity(4)).unwrap() - y.norm_sq()).abs() < 1e-12);
        let w = RngStream::new(6, 1).normal_matrix(4, 4, 1.0);
        let mut tr = 0.0;
        for i in 0..3 {
            for a in 0..4 {
                for b in 0..4 {
                    tr += y[(i, a)] * w[(a, b)] * y[(i, b)];
                }
            }
        }
        assert!((e2(&y, &w).unwrap() - (0.5 * tr + 0.5 * y.norm_sq())).abs() < 1e-12);
        assert!(e2(&y, &Matrix::identity(3)).is_err());
    }

    #[test]
    fn phi_cases() {
        assert!(phi_indicator(&Matrix::zeros(2, 2)));
        assert!(phi_indicator(&Matrix::filled(2, 2, 3.0)));
        let mut m = Matrix::zeros(2, 2);
        m[(1, 0)] = -1e-16;
        assert!(!phi_indicator(&m));
    }

    #[test]
    fn total_energy_small_case() {
        let w = LayerWeights::new(Matrix::identity(2), Matrix::identity(2), 0.1).unwrap();
        let v = total_energy(&Matrix::zeros(2, 2), &w, &EnergyConfig::default()).unwrap();
        assert_eq!(v, EnergyValue { e1: -4.0, e2: 0.0, feasible: true, total: Some(-4.0) });
    }

    #[test]
    fn biased_regularizer_vanishes_at_bias() {
        let x = RngStream::new(8, 0).normal_matrix(4, 3, 1.0).map(f64::abs);
        let w = LayerWeights::random(3, 0.3, 0.1, RngStream::new(8, 1));
        let cfg = EnergyConfig::default().with_bias(x.clone());
        let with_bias = total_energy(&x, &w, &cfg).unwrap();
        let pairs = e1(&x.matmul(&w.w_a_raw), &EnergyConfig::default()).unwrap()
            - 0.5 * x.matmul(&w.w_a_raw).norm_sq();
        assert!((with_bias.e1 - pairs).abs() < 1e-12);
    }

    #[test]
    fn analytic_gradients_match_finite_differences() {
        for seed in 0..20 {
            let y = RngStream::new(seed, 0).normal_matrix(4, 3, 1.0);
            let b = RngStream::new(seed, 1).normal_matrix(4, 3, 1.0);
            for rho in RhoKind::ALL {
                let cfg = EnergyConfig::default().with_rho(rho).with_bias(b.clone());
                let fd = finite_diff_grad(|m| e1(m, &cfg).unwrap(), &y, 1e-5).unwrap();
                assert!(relative_error(&fd, &e1_grad(&y, &cfg).unwrap()) <= 1e-5);
            }
            let w = RngStream::new(seed, 2).normal_matrix(3, 3, 1.0);
            let fd = finite_diff_grad(|m| e2(m, &w).unwrap(), &y, 1e-5).unwrap();
            assert!(relative_error(&fd, &e2_grad(&y, &w).unwrap()) <= 1e-5);
        }
    }
}
