use serde_json::json;

use crate::energy::EnergyConfig;
use crate::error::{Error, Result};
use crate::grad::{grad_check, sgd_train, synthetic_binary_task, LossKind, MetaHead, Sample, TrainResult, TrainSpec};
use crate::harness::{Assertion, CsvTable, ExperimentOutput, GradCheckParams, TrainParams};
use crate::numerics::{Matrix, RngStream};
use crate::unfold::{LayerWeights, StackConfig};

/// Untrained stack and head for the synthetic task.
pub fn initial_model(p: &TrainParams, seed: u64) -> (StackConfig, MetaHead) {
    let w = LayerWeights::random(p.d, p.weight_scale, p.alpha2, RngStream::new(seed, 0));
    let energy = EnergyConfig::default().with_beta(p.beta_mode).with_step(p.alpha2);
    let mut stack = StackConfig::new(p.depth, w, energy);
    stack.layernorm = p.layernorm;
    let head = MetaHead::new(RngStream::new(seed, 2).normal_matrix(p.d, 1, p.head_scale), LossKind::LogisticBinary);
    (stack, head)
}

/// Synthetic data plus SGD from [`initial_model`].
pub fn train_model(p: &TrainParams, seed: u64) -> Result<(Vec<Sample>, TrainResult)> {
    if p.n == 0 || p.d == 0 || p.samples == 0 {
        return Err(Error::Config("training needs n, d, samples >= 1".into()));
    }
    let data = synthetic_binary_task(p.samples, p.n, p.d, p.shift, RngStream::new(seed, 1));
    let (stack, head) = initial_model(p, seed);
    let spec = TrainSpec { dataset_size: p.samples, learning_rate: p.learning_rate, steps: p.steps, batch: p.batch, seed };
    let result = sgd_train(&data, &stack, &head, &spec)?;
    Ok((data, result))
}

/// Mean over the first and last tenth of a loss curve.
pub fn loss_ends(losses: &[f64]) -> (f64, f64) {
    let k = (losses.len() / 10).max(1);
    let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
    (mean(&losses[..k]), mean(&losses[losses.len() - k..]))
}

pub(crate) fn loss_table(losses: &[f64]) -> Result<CsvTable> {
    let mut t = CsvTable::new(["step", "loss"]);
    for (i, &l) in losses.iter().enumerate() {
        t.push(vec![i.into(), l.into()])?;
    }
    Ok(t)
}

pub fn exp_train(p: &TrainParams, seed: u64) -> Result<ExperimentOutput> {
    if p.steps < 10 {
        return Err(Error::Config("train needs steps >= 10".into()));
    }
    let (_, result) = train_model(p, seed)?;
    let (first, last) = loss_ends(&result.losses);
    Ok(ExperimentOutput {
        tables: vec![("train_loss".into(), loss_table(&result.losses)?)],
        json: vec![("weights".into(), json!({ "stack": result.stack, "head": result.head }))],
        resolved: serde_json::to_value(p)?,
        summary: json!({ "initial_loss_mean": first, "final_loss_mean": last }),
        assertions: vec![Assertion::new(
            "loss-decreases",
            last < first,
            format!("mean loss {first:.6} over the first tenth, {last:.6} over the last"),
        )],
    })
}

/// Random instance for the gradient check.
pub fn grad_check_instance(p: &GradCheckParams, seed: u64) -> Result<(Matrix, Vec<f64>, StackConfig, MetaHead)> {
    if p.n == 0 || p.d == 0 || p.outputs == 0 {
        return Err(Error::Config("grad-check needs n, d, outputs >= 1".into()));
    }
    let w = LayerWeights::random(p.d, p.weight_scale, p.alpha2, RngStream::new(seed, 0));
    let mut stack = StackConfig::new(p.depth, w, EnergyConfig::default().with_step(p.alpha2));
    stack.use_relu = p.use_relu;
    let y0 = RngStream::new(seed, 1).normal_matrix(p.n, p.d, 1.0).map(|v| v.abs() + p.input_offset);
    let head = MetaHead::new(RngStream::new(seed, 2).normal_matrix(p.d, p.outputs, 1.0), LossKind::SquaredError);
    let label = RngStream::new(seed, 3).normal_vec(p.outputs);
    Ok((y0, label, stack, head))
}

pub fn exp_grad_check(p: &GradCheckParams, seed: u64) -> Result<ExperimentOutput> {
    let (y0, label, stack, head) = grad_check_instance(p, seed)?;
    let report = grad_check(&y0, &label, &stack, &head, p.tol)?;
    let mut table = CsvTable::new(["param_index", "rel_err", "compared", "excluded"]);
    for (i, pc) in report.params.iter().enumerate() {
        table.push(vec![i.into(), pc.rel_err.into(), pc.compared.into(), pc.excluded.into()])?;
    }
    let names: Vec<&str> = report.params.iter().map(|pc| pc.name.as_str()).collect();
    Ok(ExperimentOutput {
        tables: vec![("grad_check".into(), table)],
        json: vec![],
        resolved: serde_json::to_value(p)?,
        summary: json!({
            "param_names": names, "max_rel_err": report.max_rel_err, "tol": report.tol, "excluded": report.excluded(),
        }),
        assertions: vec![Assertion::new(
            "gradient-matches-finite-differences",
            report.passed,
            format!("max relative error {:e} against tolerance {:e}", report.max_rel_err, p.tol),
        )],
    })
}
