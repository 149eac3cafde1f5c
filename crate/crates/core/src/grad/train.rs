use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grad::{stack_backward, MetaHead, StackGradients};
use crate::numerics::{Matrix, RngStream};
use crate::unfold::StackConfig;

/// One training example: token matrix and label vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub x: Matrix,
    pub label: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainSpec {
    pub dataset_size: usize,
    pub learning_rate: f64,
    pub steps: usize,
    pub batch: usize,
    pub seed: u64,
}

impl TrainSpec {
    pub fn validate(&self, available: usize) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!("learning rate must be non-negative, got {}", self.learning_rate)));
        }
        if self.batch == 0 || self.dataset_size == 0 || self.dataset_size > available {
            return Err(Error::Config(format!(
                "need batch >= 1 and 1 <= dataset_size <= {available}, got batch = {}, dataset_size = {}",
                self.batch, self.dataset_size
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainResult {
    pub stack: StackConfig,
    pub head: MetaHead,
    /// Mean batch loss before each update.
    pub losses: Vec<f64>,
}

/// Batch gradient averaged in sample order, independent of thread scheduling.
pub fn batch_gradient(
    samples: &[&Sample],
    stack: &StackConfig,
    head: &MetaHead,
) -> Result<StackGradients> {
    let grads: Vec<StackGradients> = samples
        .par_iter()
        .map(|s| stack_backward(&s.x, stack, head, &s.label))
        .collect::<Result<_>>()?;
    let mut total = StackGradients::zeros_like(stack, head);
    let scale = 1.0 / grads.len() as f64;
    for g in &grads {
        total.accumulate(g, scale);
    }
    Ok(total)
}

/// Plain SGD on the raw layer weights and head.
///
/// The sample order is one seeded permutation of the first `dataset_size`
/// samples, walked cyclically `batch` at a time.
pub fn sgd_train(data: &[Sample], stack: &StackConfig, head: &MetaHead, spec: &TrainSpec) -> Result<TrainResult> {
    spec.validate(data.len())?;
    stack.validate()?;
    let mut order: Vec<usize> = (0..spec.dataset_size).collect();
    order.shuffle(&mut RngStream::new(spec.seed, 0x7a11).rng());

    let mut stack = stack.clone();
    let mut head = head.clone();
    let mut losses = Vec::with_capacity(spec.steps);
    for step in 0..spec.steps {
        let batch: Vec<&Sample> = (0..spec.batch)
            .map(|b| &data[order[(step * spec.batch + b) % spec.dataset_size]])
            .collect();
        let g = batch_gradient(&batch, &stack, &head)?;
        if !g.loss.is_finite() || !g.norm().is_finite() {
            return Err(Error::Divergence { step, loss: g.loss });
        }
        losses.push(g.loss);
        apply_step(&mut stack, &mut head, &g, spec.learning_rate)?;
    }
    Ok(TrainResult { stack, head, losses })
}

pub fn apply_step(stack: &mut StackConfig, head: &mut MetaHead, g: &StackGradients, lr: f64) -> Result<()> {
    if lr == 0.0 {
        return Ok(());
    }
    let mut wa = stack.weights.w_a_raw.clone();
    let mut wf = stack.weights.w_f_raw.clone();
    wa.add_scaled(-lr, &g.w_a_raw);
    wf.add_scaled(-lr, &g.w_f_raw);
    stack.weights = stack.weights.with_raw(wa, wf)?;
    head.head_matrix.add_scaled(-lr, &g.head);
    Ok(())
}

/// Binary task on non-negative tokens: each class shifts every row by
/// `+-shift * mu` for a shared positive direction `mu`; entries are then folded to `|.|`.
pub fn synthetic_binary_task(count: usize, n: usize, d: usize, shift: f64, stream: RngStream) -> Vec<Sample> {
    use rand::Rng;
    let mu: Vec<f64> = stream.substream(0).normal_vec(d).into_iter().map(f64::abs).collect();
    let mut labels = stream.substream(1).rng();
    (0..count)
        .map(|i| {
            let lab = if labels.random_bool(0.5) { 1.0 } else { 0.0 };
            let sign = 2.0 * lab - 1.0;
            let base = stream.substream(2 + i as u64).normal_matrix(n, d, 1.0);
            let x = Matrix::from_fn(n, d, |r, c| (base[(r, c)].abs() + sign * shift * mu[c]).abs());
            Sample { x, label: vec![lab] }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::EnergyConfig;
    use crate::grad::LossKind;
    use crate::unfold::LayerWeights;

    fn setup() -> (Vec<Sample>, StackConfig, MetaHead) {
        let data = synthetic_binary_task(40, 8, 8, 0.5, RngStream::new(1, 0));
        let w = LayerWeights::random(8, 0.02, 0.1, RngStream::new(1, 1));
        let stack = StackConfig::new(2, w, EnergyConfig::default());
        let head = MetaHead::new(RngStream::new(1, 2).normal_matrix(8, 1, 0.1), LossKind::LogisticBinary);
        (data, stack, head)
    }

    #[test]
    fn zero_rate_keeps_weights() {
        let (data, stack, head) = setup();
        let spec = TrainSpec { dataset_size: 40, learning_rate: 0.0, steps: 5, batch: 2, seed: 3 };
        let r = sgd_train(&data, &stack, &head, &spec).unwrap();
        assert_eq!(r.stack.weights, stack.weights);
        assert_eq!(r.head, head);
    }

    #[test]
    fn reproducible_curve() {
        let (data, stack, head) = setup();
        let spec = TrainSpec { dataset_size: 40, learning_rate: 0.01, steps: 20, batch: 4, seed: 3 };
        let a = sgd_train(&data, &stack, &head, &spec).unwrap();
        let b = sgd_train(&data, &stack, &head, &spec).unwrap();
        assert_eq!(a.losses, b.losses);
        assert_eq!(a.stack.weights, b.stack.weights);
    }

    #[test]
    fn first_update_uses_backward_gradient() {
        let (data, stack, head) = setup();
        let spec = TrainSpec { dataset_size: 1, learning_rate: 0.01, steps: 1, batch: 1, seed: 0 };
        let r = sgd_train(&data, &stack, &head, &spec).unwrap();
        let g = stack_backward(&data[0].x, &stack, &head, &data[0].label).unwrap();
        let mut expect = stack.weights.w_a_raw.clone();
        expect.add_scaled(-0.01, &g.w_a_raw);
        assert_eq!(r.stack.weights.w_a_raw, expect);
        assert_eq!(r.losses[0], g.loss);
    }

    #[test]
    fn divergence_reports_step() {
        let (data, stack, head) = setup();
        let spec = TrainSpec { dataset_size: 40, learning_rate: 1e300, steps: 10, batch: 1, seed: 0 };
        match sgd_train(&data, &stack, &head, &spec) {
            Err(Error::Divergence { step, .. }) => assert!(step >= 1),
            other => panic!("expected divergence, got {other:?}"),
        }
    }
}
