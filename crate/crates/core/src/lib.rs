//! Transformer layers as unfolded descent steps on explicit energies.
//!
//! `energy` defines the objectives, `unfold` the layer updates that descend
//! them, `aim` the alternating-minimization theory that certifies each step,
//! `grad` backpropagation through a stack, and `harness` the experiments.

// negated comparisons reject NaN along with out-of-range values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod aim;
pub mod energy;
pub mod error;
pub mod grad;
pub mod harness;
pub mod numerics;
pub mod trace;
pub mod unfold;

pub use energy::{BetaMode, EnergyConfig, EnergyValue, RhoKind};
pub use error::{Error, Result};
pub use numerics::{Matrix, RngStream};
pub use trace::{RegionFlags, Trace};
pub use unfold::{GraphMask, LayerWeights, StackConfig};
