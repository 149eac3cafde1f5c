use serde::{Deserialize, Serialize};

use crate::energy::{attention_logits, half_sq_dist, softmax_rows, BetaMode, RhoKind};
use crate::error::Result;
use crate::grad::MetaHead;
use crate::numerics::{dot, Matrix};
use crate::unfold::StackConfig;

/// Everything one layer's backward pass needs.
#[derive(Debug, Clone)]
pub struct LayerCache {
    pub z: Matrix,
    pub x: Matrix,
    /// Row norms after centering; only filled with layernorm on.
    pub ln_norms: Vec<f64>,
    pub y: Matrix,
    pub attention: Matrix,
    pub u: Matrix,
    pub v: Matrix,
}

/// Forward pass of the stack, keeping caches for every layer.
pub fn forward_cached(y0: &Matrix, stack: &StackConfig) -> Result<(Vec<LayerCache>, Matrix)> {
    stack.check_input(y0)?;
    let w = &stack.weights;
    let mut caches = Vec::with_capacity(stack.depth);
    let mut z = y0.clone();
    for _ in 0..stack.depth {
        let (x, ln_norms) = if stack.layernorm { layernorm_cached(&z)? } else { (z.clone(), Vec::new()) };
        let y = x.matmul(&w.w_a_raw);
        let mut logits = attention_logits(&y, &stack.energy);
        if let Some(m) = &stack.graph_mask {
            m.check(y.rows())?;
            for i in 0..y.rows() {
                for j in 0..y.rows() {
                    if !m.contains(i, j) {
                        logits[(i, j)] = f64::NEG_INFINITY;
                    }
                }
            }
        }
        let attention = softmax_rows(&logits);
        let ax = attention.matmul(&x);
        let a = stack.residual_alpha;
        let u = if a == 1.0 { ax } else { x.zip_map(&ax, |xi, ai| (1.0 - a) * xi + a * ai) };
        let v = u.matmul(&w.w_f_s);
        let out = if stack.use_relu { v.map(|t| t.max(0.0)) } else { v.clone() };
        caches.push(LayerCache { z, x, ln_norms, y, attention, u, v });
        z = out;
    }
    Ok((caches, z))
}

fn layernorm_cached(z: &Matrix) -> Result<(Matrix, Vec<f64>)> {
    let x = crate::unfold::layernorm_rows(z)?;
    let norms = (0..z.rows())
        .map(|i| {
            let r = z.row(i);
            let mean = r.iter().sum::<f64>() / r.len() as f64;
            r.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>().sqrt()
        })
        .collect();
    Ok((x, norms))
}

/// Gradients of the meta loss with respect to the raw parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StackGradients {
    pub loss: f64,
    pub w_a_raw: Matrix,
    pub w_f_raw: Matrix,
    pub head: Matrix,
}

impl StackGradients {
    pub fn zeros_like(stack: &StackConfig, head: &MetaHead) -> Self {
        let d = stack.weights.d();
        Self {
            loss: 0.0,
            w_a_raw: Matrix::zeros(d, d),
            w_f_raw: Matrix::zeros(d, d),
            head: Matrix::zeros(head.head_matrix.rows(), head.head_matrix.cols()),
        }
    }

    pub fn accumulate(&mut self, other: &StackGradients, scale: f64) {
        self.loss += scale * other.loss;
        self.w_a_raw.add_scaled(scale, &other.w_a_raw);
        self.w_f_raw.add_scaled(scale, &other.w_f_raw);
        self.head.add_scaled(scale, &other.head);
    }

    pub fn norm(&self) -> f64 {
        (self.w_a_raw.norm_sq() + self.w_f_raw.norm_sq() + self.head.norm_sq()).sqrt()
    }
}

/// Loss of one sample through the stack and head.
pub fn stack_loss(y0: &Matrix, stack: &StackConfig, head: &MetaHead, label: &[f64]) -> Result<f64> {
    let (_, z) = forward_cached(y0, stack)?;
    head.check(&z, label)?;
    Ok(head.loss(&head.forward(&z), label))
}

/// Reverse-mode gradient of the loss through every layer.
///
/// The weights are tied across layers, so each layer adds its share. ReLU
/// uses subgradient 0 at the kink.
pub fn stack_backward(y0: &Matrix, stack: &StackConfig, head: &MetaHead, label: &[f64]) -> Result<StackGradients> {
    let (caches, z_out) = forward_cached(y0, stack)?;
    head.check(&z_out, label)?;
    let w = &stack.weights;
    let n = z_out.rows() as f64;

    let pooled = head.pool(&z_out);
    let out = pooled.matmul(&head.head_matrix);
    let loss = head.loss(&out, label);
    let d_out = head.loss_grad(&out, label);
    let d_head = pooled.t_matmul(&d_out);
    let d_pool = d_out.matmul_t(&head.head_matrix);
    let mut dz = Matrix::from_fn(z_out.rows(), z_out.cols(), |_, j| d_pool[(0, j)] / n);

    let d = w.d();
    let mut d_wa = Matrix::zeros(d, d);
    let mut d_wfs = Matrix::zeros(d, d);
    let alpha = stack.residual_alpha;

    for c in caches.iter().rev() {
        let dv = if stack.use_relu { dz.zip_map(&c.v, |g, v| if v > 0.0 { g } else { 0.0 }) } else { dz };
        d_wfs += &c.u.t_matmul(&dv);
        let du = dv.matmul_t(&w.w_f_s);

        let mut dx = du.scale(1.0 - alpha);
        dx += &c.attention.t_matmul(&du).scale(alpha);
        let da = du.matmul_t(&c.x).scale(alpha);

        let dl = softmax_backward(&c.attention, &da);
        let dy = logits_backward(&c.y, &dl, stack.energy.rho, stack.energy.beta_mode);
        d_wa += &c.x.t_matmul(&dy);
        dx += &dy.matmul_t(&w.w_a_raw);

        dz = if stack.layernorm { layernorm_backward(&c.x, &c.ln_norms, &dx) } else { dx };
    }

    let w_f_raw = d_wfs.symmetric_part().scale(-w.alpha2);
    Ok(StackGradients { loss, w_a_raw: d_wa, w_f_raw, head: d_head })
}

fn softmax_backward(a: &Matrix, da: &Matrix) -> Matrix {
    let mut dl = Matrix::zeros(a.rows(), a.cols());
    for i in 0..a.rows() {
        let s = dot(a.row(i), da.row(i));
        for j in 0..a.cols() {
            dl[(i, j)] = a[(i, j)] * (da[(i, j)] - s);
        }
    }
    dl
}

fn logits_backward(y: &Matrix, dl: &Matrix, rho: RhoKind, beta: BetaMode) -> Matrix {
    let n = y.rows();
    match (rho, beta) {
        (_, BetaMode::Uniform) => &dl.matmul(y) + &dl.t_matmul(y),
        (RhoKind::NegExp, BetaMode::Reweighted) => {
            let mut g = &dl.matmul(y) + &dl.t_matmul(y);
            for j in 0..n {
                let col: f64 = (0..n).map(|i| dl[(i, j)]).sum();
                for k in 0..y.cols() {
                    g[(j, k)] -= col * y[(j, k)];
                }
            }
            g
        }
        (kind, BetaMode::Reweighted) => {
            // d log rho'(z) / dz for the log kinds
            let shift = if kind == RhoKind::LogPlus2 { 2.0 } else { 1.0 };
            let m = Matrix::from_fn(n, n, |i, j| {
                if dl[(i, j)] == 0.0 {
                    0.0
                } else {
                    -dl[(i, j)] / (half_sq_dist(y.row(i), y.row(j)) + shift)
                }
            });
            let s = &m + &m.transpose();
            let mut g = s.matmul(y).scale(-1.0);
            for i in 0..n {
                let r: f64 = s.row(i).iter().sum();
                for k in 0..y.cols() {
                    g[(i, k)] += r * y[(i, k)];
                }
            }
            g
        }
    }
}

fn layernorm_backward(x: &Matrix, norms: &[f64], dx: &Matrix) -> Matrix {
    let mut dz = Matrix::zeros(x.rows(), x.cols());
    for i in 0..x.rows() {
        let xr = x.row(i);
        let g = dx.row(i);
        let proj = dot(xr, g);
        let dc: Vec<f64> = xr.iter().zip(g).map(|(xv, gv)| (gv - xv * proj) / norms[i]).collect();
        let mean = dc.iter().sum::<f64>() / dc.len() as f64;
        for (o, v) in dz.row_mut(i).iter_mut().zip(&dc) {
            *o = v - mean;
        }
    }
    dz
}
