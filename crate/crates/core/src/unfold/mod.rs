//! Update rules: attention steps, AIM layer steps, the proximal ReLU and stacked layers.

mod layernorm;
mod stack;
mod update;
mod weights;

pub use layernorm::{layernorm_gradient_steps, layernorm_rows, layernorm_steps};
pub use stack::{certify_layer, layer_forward, run_stack, stack_energy, surrogate_grad, LayerOutput, StackConfig};
pub use update::{
    aim_step_pair, attention_matrix, attention_update, attention_update_weighted, full_layer,
    graph_masked_update, prox_relu, residual_attention_update,
};
pub use weights::{GraphMask, LayerWeights, DEFAULT_INIT_SCALE};
