use serde::{Deserialize, Serialize};

use crate::aim::d_similarity;
use crate::energy::{gamma_weights, mapped_config, phi_indicator, total_energy_with, EnergyConfig};
use crate::error::{Error, Result};
use crate::numerics::{gershgorin_radius, Matrix};
use crate::trace::{RegionFlags, Trace};
use crate::unfold::layernorm::layernorm_rows;
use crate::unfold::update::{attention_matrix, blend, check_residual_alpha, prox_relu};
use crate::unfold::{GraphMask, LayerWeights};

fn default_alpha() -> f64 {
    1.0
}

fn default_kappa() -> f64 {
    0.5
}

/// A depth-`depth` stack of identical layers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StackConfig {
    pub depth: usize,
    pub use_relu: bool,
    #[serde(default = "default_alpha")]
    pub residual_alpha: f64,
    #[serde(default)]
    pub layernorm: bool,
    #[serde(default)]
    pub graph_mask: Option<GraphMask>,
    /// Similarity threshold used by the proximal certificate.
    #[serde(default = "default_kappa")]
    pub kappa: f64,
    pub energy: EnergyConfig,
    pub weights: LayerWeights,
}

impl StackConfig {
    pub fn new(depth: usize, weights: LayerWeights, energy: EnergyConfig) -> Self {
        Self {
            depth,
            use_relu: true,
            residual_alpha: 1.0,
            layernorm: false,
            graph_mask: None,
            kappa: default_kappa(),
            energy,
            weights,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_residual_alpha(self.residual_alpha)?;
        if !(self.kappa > 0.0 && self.kappa < 1.0) {
            return Err(Error::Config(format!("kappa must lie in (0, 1), got {}", self.kappa)));
        }
        self.energy.validate()?;
        if (self.energy.alpha2 - self.weights.alpha2).abs() > 1e-15 * self.energy.alpha2.max(1.0) {
            return Err(Error::Config(format!(
                "energy alpha2 = {} but weights were built with alpha2 = {}",
                self.energy.alpha2, self.weights.alpha2
            )));
        }
        Ok(())
    }

    pub fn check_input(&self, z: &Matrix) -> Result<()> {
        self.weights.check_tokens(z)?;
        self.energy.check_bias(z)?;
        if let Some(m) = &self.graph_mask {
            m.check(z.rows())?;
        }
        Ok(())
    }
}

/// Intermediate values of one layer.
#[derive(Debug, Clone)]
pub struct LayerOutput {
    /// Input after the optional layernorm.
    pub input: Matrix,
    pub attention: Matrix,
    pub u: Matrix,
    /// Pre-activation `U W_f^s`.
    pub v: Matrix,
    pub output: Matrix,
}

pub fn layer_forward(z: &Matrix, stack: &StackConfig) -> Result<LayerOutput> {
    let input = if stack.layernorm { layernorm_rows(z)? } else { z.clone() };
    let y = input.matmul(&stack.weights.w_a_raw);
    let attention = attention_matrix(&y, &stack.energy, stack.graph_mask.as_ref())?;
    let u = blend(&input, &attention.matmul(&input), stack.residual_alpha);
    let v = u.matmul(&stack.weights.w_f_s);
    let output = if stack.use_relu { prox_relu(&v) } else { v.clone() };
    Ok(LayerOutput { input, attention, u, v, output })
}

/// Energy of one iterate under the stack's configuration.
pub fn stack_energy(z: &Matrix, stack: &StackConfig) -> Result<crate::energy::EnergyValue> {
    total_energy_with(z, &stack.weights, &stack.energy, stack.graph_mask.as_ref(), stack.use_relu)
}

/// Runs `depth` layers from `y0`, recording energy and a descent certificate per iterate.
pub fn run_stack(y0: &Matrix, stack: &StackConfig) -> Result<Trace> {
    stack.validate()?;
    stack.check_input(y0)?;
    let mut trace = Trace::default();
    let mut z = y0.clone();
    for k in 0..=stack.depth {
        let layer = layer_forward(&z, stack)?;
        let energy = stack_energy(&z, stack)?;
        let (delta, flags) = certify_layer(&z, &layer, stack)?;
        let next = (k < stack.depth).then_some(layer.output);
        trace.push(z, energy, delta, flags);
        match next {
            Some(n) => z = n,
            None => break,
        }
    }
    Ok(trace)
}

/// Checks whether the layer applied at `z` is guaranteed not to raise the energy.
///
/// The layer is written as an inexact step `Z - alpha2 (grad h - Delta)` on
/// the smooth surrogate `h(Z) = E1~(Z W_a; Gamma(Z W_a)) + E2(Z)`, which
/// majorizes `E1(. W_a) + E2` up to a constant. Descent follows from
/// `alpha2 <= 1/L_h` and `||Delta|| <= ||grad h||` (plain step), or from the
/// tighter `sqrt((1 - kappa)/2)` ratio plus `D(alpha2 grad h; Z) >= -kappa`
/// when the ReLU projection follows.
pub fn certify_layer(z: &Matrix, layer: &LayerOutput, stack: &StackConfig) -> Result<(Option<f64>, RegionFlags)> {
    let feasible = !stack.use_relu || phi_indicator(z);
    let delta_bound = if stack.use_relu { ((1.0 - stack.kappa) / 2.0).sqrt() } else { 1.0 };
    let mut flags = RegionFlags { delta_bound, feasible, ..RegionFlags::default() };
    if stack.layernorm {
        return Ok((None, flags));
    }
    let w = &stack.weights;
    let alpha2 = w.alpha2;
    let grad = surrogate_grad(z, stack)?;
    let gnorm = grad.norm();

    let mut noise = grad.clone();
    noise.add_scaled(-1.0 / alpha2, &(z - &layer.v));

    let gamma = masked_gamma(z, stack)?;
    let lap_bound = 2.0 * gershgorin_radius(&gamma.laplacian()) + 1.0;
    let lipschitz = w.w_a_raw.norm_sq() * lap_bound + 1.0 + gershgorin_radius(&w.w_f_raw.symmetric_part());
    flags.step_ok = alpha2 * lipschitz <= 1.0;

    let delta = (gnorm > 1e-12).then(|| noise.norm() / gnorm);
    flags.delta_ok = delta.is_some_and(|d| d <= delta_bound);
    if stack.use_relu && gnorm > 1e-12 {
        let s = d_similarity(&grad.scale(alpha2), z)?;
        flags.similarity = Some(s);
        flags.similarity_ok = Some(s >= -stack.kappa);
    }
    flags.certified = flags.step_ok && flags.delta_ok && flags.feasible && flags.similarity_ok.unwrap_or(true);
    Ok((delta, flags))
}

fn masked_gamma(z: &Matrix, stack: &StackConfig) -> Result<crate::energy::GammaWeights> {
    let g = gamma_weights(&z.matmul(&stack.weights.w_a_raw), stack.energy.rho);
    match &stack.graph_mask {
        Some(m) => g.masked(m),
        None => Ok(g),
    }
}

/// Gradient of the surrogate at its expansion point; equals the gradient of `E1(Z W_a) + E2(Z)` there.
pub fn surrogate_grad(z: &Matrix, stack: &StackConfig) -> Result<Matrix> {
    let w = &stack.weights;
    let y = z.matmul(&w.w_a_raw);
    let gamma = masked_gamma(z, stack)?;
    let mapped = mapped_config(&stack.energy, w);
    let gy = crate::energy::tilde_e1_grad(&y, &gamma, &mapped)?;
    let mut g = gy.matmul_t(&w.w_a_raw);
    g += &crate::energy::e2_grad(z, &w.w_f_raw)?;
    Ok(g)
}
