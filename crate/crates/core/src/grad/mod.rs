//! Reverse-mode gradients of a meta loss through the unrolled stack, and SGD.

mod backward;
mod check;
mod head;
mod train;

pub use backward::{forward_cached, stack_backward, stack_loss, LayerCache, StackGradients};
pub use check::{grad_check, GradCheckReport, ParamCheck};
pub use head::{LossKind, MetaHead, Pooling};
pub use train::{apply_step, batch_gradient, sgd_train, synthetic_binary_task, Sample, TrainResult, TrainSpec};
