//! Energy functions: E1 and its majorizer, E2, the indicator, and attention coefficients.

mod attention;
mod config;
mod functions;
mod rho;

pub use attention::{attention_coefficients, attention_logits, softmax_rows, CoefficientMode};
pub use config::{BetaMode, EnergyConfig};
pub(crate) use functions::{half_sq_dist, mapped_config, total_energy_with};
pub use functions::{
    beta_weights, e1, e1_grad, e1_masked, e2, e2_grad, gamma_weights, gamma_weights_factorized,
    phi_indicator, tilde_e1, tilde_e1_grad, total_energy, EnergyValue, GammaWeights,
};
pub use rho::{rho_eval, rho_prime, RhoKind};
