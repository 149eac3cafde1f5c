use serde::{Deserialize, Serialize};

use crate::aim::{optimal_points, QuadraticObjective, SmoothnessProfile};
use crate::error::{Error, Result};
use crate::numerics::Matrix;

const RATIO_FLOOR: f64 = 1e-12;

/// Noise of the alternating step on `h = f + g` at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseDelta {
    /// `grad h(y) - (alpha1/alpha2) grad f(y) - grad g(y - alpha1 grad f(y))`
    pub delta: Matrix,
    /// `||Delta|| / ||grad h||`
    pub ratio: f64,
    /// `||grad f|| / ||grad h||`, the ratio the descent certificates bound
    pub grad_ratio: f64,
}

pub fn noise_delta(
    y: &Matrix,
    f: &QuadraticObjective,
    g: &QuadraticObjective,
    alpha1: f64,
    alpha2: f64,
) -> Result<NoiseDelta> {
    let gf = f.grad(y)?;
    let mut gh = g.grad(y)?;
    gh += &gf;
    let mut u = y.clone();
    u.add_scaled(-alpha1, &gf);
    let mut delta = gh.clone();
    delta.add_scaled(-alpha1 / alpha2, &gf);
    delta -= &g.grad(&u)?;
    let hn = gh.norm();
    if !(hn > RATIO_FLOOR) {
        return Err(Error::UndefinedRatio(format!("||grad h|| = {hn:e} vanishes")));
    }
    Ok(NoiseDelta { ratio: delta.norm() / hn, grad_ratio: gf.norm() / hn, delta })
}

/// `1 - alpha1/alpha2 + alpha1 L_g`, the factor in `||Delta|| <= factor ||grad f||`.
pub fn noise_bound_factor(alpha1: f64, alpha2: f64, l_g: f64) -> f64 {
    1.0 - alpha1 / alpha2 + alpha1 * l_g
}

fn check_steps(alpha1: f64, alpha2: f64, l_g: f64) -> Result<()> {
    if !(alpha1 >= 0.0 && alpha1 <= alpha2 && alpha2 > 0.0 && l_g > 0.0) {
        return Err(Error::Precondition(format!(
            "need 0 <= alpha1 <= alpha2 and L_g > 0, got alpha1 = {alpha1}, alpha2 = {alpha2}, L_g = {l_g}"
        )));
    }
    Ok(())
}

/// `C = alpha2 / (alpha2 - alpha1 + alpha1 alpha2 L_g)`
#[allow(non_snake_case)]
pub fn bound_C(alpha1: f64, alpha2: f64, l_g: f64) -> Result<f64> {
    check_steps(alpha1, alpha2, l_g)?;
    Ok(alpha2 / (alpha2 - alpha1 + alpha1 * alpha2 * l_g))
}

/// `C' = alpha2 c_P lambda sqrt(1 - kappa) / (sqrt(2) (alpha2 - alpha1 + alpha1 alpha2 L_g))`
#[allow(non_snake_case)]
pub fn bound_Cprime(alpha1: f64, alpha2: f64, lambda: f64, kappa: f64, c_p: f64, l_g: f64) -> Result<f64> {
    check_steps(alpha1, alpha2, l_g)?;
    if !(kappa > 0.0 && kappa < 1.0) {
        return Err(Error::Precondition(format!("kappa must lie in (0, 1), got {kappa}")));
    }
    if !(lambda > 0.0 && c_p > 0.0) {
        return Err(Error::Precondition("lambda and c_P must be positive".into()));
    }
    Ok(alpha2 * c_p * lambda * (1.0 - kappa).sqrt()
        / (2f64.sqrt() * (alpha2 - alpha1 + alpha1 * alpha2 * l_g)))
}

/// Certificate constants and the three optima of one instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionSpec {
    pub c: f64,
    pub c_prime: f64,
    pub kappa: f64,
    pub y_f_star: Matrix,
    pub y_g_star: Matrix,
    pub y_h_star: Matrix,
}

impl RegionSpec {
    pub fn new(
        f: &QuadraticObjective,
        g: &QuadraticObjective,
        prof: &SmoothnessProfile,
        alpha1: f64,
        alpha2: f64,
        lambda: f64,
        kappa: f64,
    ) -> Result<Self> {
        let (y_f_star, y_g_star, y_h_star) = optimal_points(f, g)?;
        Ok(Self {
            c: bound_C(alpha1, alpha2, prof.l_g)?,
            c_prime: bound_Cprime(alpha1, alpha2, lambda, kappa, prof.c_p, prof.l_g)?,
            kappa,
            y_f_star,
            y_g_star,
            y_h_star,
        })
    }

    /// `c_h C / L_f`
    pub fn s_threshold(&self, prof: &SmoothnessProfile) -> f64 {
        prof.c_h * self.c / prof.l_f
    }
}

/// `||y - a|| / ||y - b||`
pub fn distance_ratio(y: &Matrix, a: &Matrix, b: &Matrix) -> Result<f64> {
    let den = (y - b).norm();
    if !(den > 0.0) {
        return Err(Error::UndefinedRatio("point coincides with y_h*".into()));
    }
    Ok((y - a).norm() / den)
}

/// Apollonian test `||y - y_f*|| / ||y - y_h*|| <= threshold`.
pub fn apollonian_contains(y: &Matrix, y_f: &Matrix, y_h: &Matrix, threshold: f64) -> Result<bool> {
    Ok(distance_ratio(y, y_f, y_h)? <= threshold)
}

#[allow(non_snake_case)]
pub fn region_S_contains(y: &Matrix, spec: &RegionSpec, prof: &SmoothnessProfile) -> Result<bool> {
    apollonian_contains(y, &spec.y_f_star, &spec.y_h_star, spec.s_threshold(prof))
}

/// `D(xi1, xi2) = sum_i min(xi2_i^2 - xi1_i^2, 0) / ||xi1||^2`, always in `[-1, 0]`.
pub fn d_similarity(xi1: &Matrix, xi2: &Matrix) -> Result<f64> {
    xi1.ensure_same_shape(xi2, "similarity arguments")?;
    let den = xi1.norm_sq();
    if !(den > 0.0) {
        return Err(Error::Degenerate("similarity with zero first argument".into()));
    }
    let num: f64 = xi1
        .as_slice()
        .iter()
        .zip(xi2.as_slice())
        .map(|(a, b)| (b * b - a * a).min(0.0))
        .sum();
    Ok(num / den)
}

/// `D(alpha2 grad h(y); y) >= -kappa`
#[allow(non_snake_case)]
pub fn region_T_contains(y: &Matrix, grad_h: &Matrix, alpha2: f64, kappa: f64) -> Result<bool> {
    if !(y.norm_sq() > 0.0) {
        return Err(Error::Degenerate("region T is not defined at the origin".into()));
    }
    let xi = grad_h.scale(alpha2);
    if xi.norm_sq() == 0.0 {
        return Ok(true);
    }
    Ok(d_similarity(&xi, y)? >= -kappa)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aim::Side;
    use crate::numerics::RngStream;

    #[test]
    fn constant_limits() {
        let a = 0.05;
        assert!((bound_C(a, a, 3.0).unwrap() - 1.0 / (a * 3.0)).abs() < 1e-12);
        assert!((bound_C(0.0, a, 3.0).unwrap() - 1.0).abs() < 1e-15);
        assert!(bound_C(0.2, 0.1, 1.0).is_err());
        let lam = 0.07;
        let cp = bound_Cprime(0.0, 0.1, lam, 0.5, 1.0 / lam, 2.0).unwrap();
        assert!((cp - 0.5f64.sqrt() / 2f64.sqrt()).abs() < 1e-12);
        assert!(bound_Cprime(0.01, 0.1, lam, 1.0 - 1e-15, 1.0 / lam, 2.0).unwrap() < 1e-6);
        assert!(bound_Cprime(0.01, 0.1, lam, 1.0, 1.0 / lam, 2.0).is_err());
    }

    #[test]
    fn c_non_increasing_in_l_g() {
        for i in 0..50 {
            let (l1, l2) = (0.5 + i as f64 * 0.3, 0.5 + (i + 1) as f64 * 0.3);
            assert!(bound_C(0.02, 0.05, l2).unwrap() <= bound_C(0.02, 0.05, l1).unwrap());
        }
    }

    #[test]
    fn similarity_extremes() {
        let xi = RngStream::new(1, 0).normal_matrix(3, 2, 1.0);
        assert_eq!(d_similarity(&xi, &xi).unwrap(), 0.0);
        assert!((d_similarity(&xi, &Matrix::zeros(3, 2)).unwrap() + 1.0).abs() < 1e-15);
        assert!(d_similarity(&Matrix::zeros(3, 2), &xi).is_err());
    }

    #[test]
    fn noise_with_zero_first_step() {
        let f = QuadraticObjective::random(Side::LeftTransform, 3, 3, 0.3, RngStream::new(2, 0));
        let g = QuadraticObjective::random(Side::RightTransform, 3, 3, 0.3, RngStream::new(2, 1));
        let y = RngStream::new(2, 2).normal_matrix(3, 3, 1.0);
        let nd = noise_delta(&y, &f, &g, 0.0, 0.1).unwrap();
        assert!(nd.delta.max_abs_diff(&f.grad(&y).unwrap()) < 1e-14);
        assert!((nd.ratio - nd.grad_ratio).abs() < 1e-14);
        let (_, _, yh) = optimal_points(&f, &g).unwrap();
        assert!(matches!(noise_delta(&yh, &f, &g, 0.0, 0.1), Err(Error::UndefinedRatio(_))));
    }

    #[test]
    fn s_region_cases() {
        let yf = Matrix::column(&[1.0, 0.0]).unwrap();
        let yh = Matrix::column(&[0.0, 0.0]).unwrap();
        assert!(apollonian_contains(&yf, &yf, &yh, 1e-6).unwrap());
        let far = Matrix::column(&[-50.0, 0.0]).unwrap();
        assert!(!apollonian_contains(&far, &yf, &yh, 0.7).unwrap());
        assert!(apollonian_contains(&yh, &yf, &yh, 0.7).is_err());
    }

    #[test]
    fn t_region_limits() {
        let y = Matrix::column(&[0.3, -0.2]).unwrap();
        let g = Matrix::column(&[40.0, 1.0]).unwrap();
        assert!(region_T_contains(&y, &g, 1.0, 1.0 - 1e-12).unwrap());
        assert!(region_T_contains(&y, &g, 1e-9, 0.01).unwrap());
        assert!(region_T_contains(&Matrix::zeros(2, 1), &g, 0.1, 0.5).is_err());
    }
}
