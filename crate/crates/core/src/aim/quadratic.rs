use serde::{Deserialize, Serialize};

use crate::error::{dim_err, Error, Result};
use crate::numerics::linalg::cholesky_solve;
use crate::numerics::{spectral_bounds, Matrix, RngStream};

const SPECTRAL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    /// `f(Y) = ||S Y||^2 + ||Y - B||^2`
    LeftTransform,
    /// `g(Y) = ||Y W||^2 + ||Y - B||^2`
    RightTransform,
}

/// Strongly convex test objective with an extra bias term.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadraticObjective {
    pub side: Side,
    pub transform: Matrix,
    pub bias: Matrix,
}

impl QuadraticObjective {
    pub fn new(side: Side, transform: Matrix, bias: Matrix) -> Result<Self> {
        let ok = match side {
            Side::LeftTransform => transform.cols() == bias.rows(),
            Side::RightTransform => transform.rows() == bias.cols(),
        };
        if !ok {
            return Err(dim_err(format!(
                "{side:?} transform {:?} does not act on {:?}",
                transform.shape(),
                bias.shape()
            )));
        }
        Ok(Self { side, transform, bias })
    }

    /// Square transform and bias with i.i.d. `N(0, scale^2)` entries.
    pub fn random(side: Side, rows: usize, cols: usize, scale: f64, stream: RngStream) -> Self {
        let k = match side {
            Side::LeftTransform => rows,
            Side::RightTransform => cols,
        };
        let t = stream.substream(0).normal_matrix(k, k, scale);
        let b = stream.substream(1).normal_matrix(rows, cols, scale);
        Self::new(side, t, b).expect("consistent shapes")
    }

    pub fn shape(&self) -> (usize, usize) {
        self.bias.shape()
    }

    /// `S^T S` or `W W^T`.
    pub fn gram(&self) -> Matrix {
        match self.side {
            Side::LeftTransform => self.transform.t_matmul(&self.transform),
            Side::RightTransform => self.transform.matmul_t(&self.transform),
        }
    }

    fn check(&self, y: &Matrix) -> Result<()> {
        y.ensure_same_shape(&self.bias, "quadratic objective argument")
    }

    pub fn value(&self, y: &Matrix) -> Result<f64> {
        self.check(y)?;
        let t = match self.side {
            Side::LeftTransform => self.transform.matmul(y),
            Side::RightTransform => y.matmul(&self.transform),
        };
        Ok(t.norm_sq() + (y - &self.bias).norm_sq())
    }

    /// `2 (S^T S Y + Y - B)` or `2 (Y W W^T + Y - B)`.
    pub fn grad(&self, y: &Matrix) -> Result<Matrix> {
        self.check(y)?;
        let g = self.gram();
        let mut out = match self.side {
            Side::LeftTransform => g.matmul(y),
            Side::RightTransform => y.matmul(&g),
        };
        out += y;
        out -= &self.bias;
        Ok(out.scale(2.0))
    }

    /// Half-gradient as `P Y + Y Q - B`.
    fn sylvester_terms(&self) -> (Matrix, Matrix) {
        let (n, d) = self.shape();
        let with_id = |m: Matrix| &m + &Matrix::identity(m.rows());
        match self.side {
            Side::LeftTransform => (with_id(self.gram()), Matrix::zeros(d, d)),
            Side::RightTransform => (Matrix::zeros(n, n), with_id(self.gram())),
        }
    }
}

/// `(L, c) = (2 (lambda_max + 1), 2 (lambda_min + 1))` of the Gram matrix.
pub fn quadratic_constants(obj: &QuadraticObjective) -> Result<(f64, f64)> {
    let est = spectral_bounds(&obj.gram(), SPECTRAL_TOL)?;
    Ok((2.0 * (est.lambda_max + 1.0), 2.0 * (est.lambda_min.max(0.0) + 1.0)))
}

/// Smoothness and strong-convexity constants of `f`, `g`, `h = f + g` and the proximal problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothnessProfile {
    pub l_f: f64,
    pub c_f: f64,
    pub l_g: f64,
    pub c_g: f64,
    pub l_h: f64,
    pub c_h: f64,
    pub c_p: f64,
}

impl SmoothnessProfile {
    pub fn new(f: &QuadraticObjective, g: &QuadraticObjective, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0) {
            return Err(Error::Precondition(format!("lambda must be positive, got {lambda}")));
        }
        let (l_f, c_f) = quadratic_constants(f)?;
        let (l_g, c_g) = quadratic_constants(g)?;
        Ok(Self { l_f, c_f, l_g, c_g, l_h: l_f + l_g, c_h: c_f + c_g, c_p: 1.0 / lambda })
    }
}

/// Minimizers of `f`, `g` and `h = f + g`.
pub fn optimal_points(
    f: &QuadraticObjective,
    g: &QuadraticObjective,
) -> Result<(Matrix, Matrix, Matrix)> {
    if f.shape() != g.shape() {
        return Err(dim_err("f and g act on different shapes"));
    }
    let (pf, qf) = f.sylvester_terms();
    let (pg, qg) = g.sylvester_terms();
    let yf = solve_sylvester_sym(&pf, &qf, &f.bias)?;
    let yg = solve_sylvester_sym(&pg, &qg, &g.bias)?;
    let yh = solve_sylvester_sym(&(&pf + &pg), &(&qf + &qg), &(&f.bias + &g.bias))?;
    Ok((yf, yg, yh))
}

// Solves P Y + Y Q = B for symmetric P, Q with P (+) Q positive definite,
// through the column-major vectorization (I (x) P + Q (x) I) vec Y = vec B.
fn solve_sylvester_sym(p: &Matrix, q: &Matrix, b: &Matrix) -> Result<Matrix> {
    let (n, d) = b.shape();
    let m = n * d;
    let idx = |i: usize, j: usize| i + j * n;
    let mut k = Matrix::zeros(m, m);
    for j in 0..d {
        for i in 0..n {
            for r in 0..n {
                k[(idx(i, j), idx(r, j))] += p[(i, r)];
            }
            for c in 0..d {
                k[(idx(i, j), idx(i, c))] += q[(c, j)];
            }
        }
    }
    let rhs = Matrix::from_fn(m, 1, |r, _| b[(r % n, r / n)]);
    let x = cholesky_solve(&k, &rhs).map_err(|e| Error::Internal(format!("optimal point solve: {e}")))?;
    Ok(Matrix::from_fn(n, d, |i, j| x[(idx(i, j), 0)]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constants_of_simple_transforms() {
        let b = Matrix::zeros(3, 2);
        let f = QuadraticObjective::new(Side::LeftTransform, Matrix::zeros(3, 3), b.clone()).unwrap();
        let (l, c) = quadratic_constants(&f).unwrap();
        assert!((l - 2.0).abs() < 1e-12 && (c - 2.0).abs() < 1e-12);
        let g = QuadraticObjective::new(Side::RightTransform, Matrix::identity(2), b).unwrap();
        let (l, c) = quadratic_constants(&g).unwrap();
        assert!((l - 4.0).abs() < 1e-10 && (c - 4.0).abs() < 1e-10);
    }

    #[test]
    fn optimum_without_transform_is_bias() {
        let b = RngStream::new(1, 0).normal_matrix(3, 2, 1.0);
        let f = QuadraticObjective::new(Side::LeftTransform, Matrix::zeros(3, 3), b.clone()).unwrap();
        let (yf, _, _) = optimal_points(&f, &f).unwrap();
        assert!(yf.max_abs_diff(&b) < 1e-12);
    }

    #[test]
    fn shared_objective_shares_optimum() {
        let f = QuadraticObjective::random(Side::RightTransform, 4, 3, 0.5, RngStream::new(2, 0));
        let (yf, yg, yh) = optimal_points(&f, &f).unwrap();
        assert!(yf.max_abs_diff(&yg) < 1e-12);
        assert!(yf.max_abs_diff(&yh) < 1e-10);
    }

    #[test]
    fn optimum_residuals_vanish() {
        let f = QuadraticObjective::random(Side::LeftTransform, 5, 4, 0.3, RngStream::new(3, 0));
        let g = QuadraticObjective::random(Side::RightTransform, 5, 4, 0.3, RngStream::new(3, 1));
        let (yf, yg, yh) = optimal_points(&f, &g).unwrap();
        assert!(f.grad(&yf).unwrap().norm() <= 1e-8);
        assert!(g.grad(&yg).unwrap().norm() <= 1e-8);
        assert!((&f.grad(&yh).unwrap() + &g.grad(&yh).unwrap()).norm() <= 1e-8);
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(QuadraticObjective::new(Side::LeftTransform, Matrix::zeros(2, 3), Matrix::zeros(2, 2)).is_err());
        let f = QuadraticObjective::random(Side::LeftTransform, 3, 3, 0.3, RngStream::new(4, 0));
        assert!(f.value(&Matrix::zeros(2, 3)).is_err());
    }
}
