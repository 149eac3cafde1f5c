use std::path::Path;

use rand::Rng;
use rayon::prelude::*;
use serde_json::json;

use crate::energy::EnergyConfig;
use crate::error::{dim_err, Error, Result};
use crate::harness::training::{loss_ends, loss_table, train_model};
use crate::harness::{load_embeddings, Assertion, CsvTable, CurveMode, EnergyCurveParams, ExperimentOutput};
use crate::numerics::{Matrix, RngStream};
use crate::trace::Trace;
use crate::unfold::{run_stack, LayerWeights, StackConfig};

/// Sample quantile with linear interpolation between order statistics (type 7).
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn embedding_samples(m: &Matrix, p: &EnergyCurveParams, stream: RngStream) -> Result<Vec<Matrix>> {
    if m.cols() != p.d {
        return Err(dim_err(format!("embeddings have width {}, config asks for d = {}", m.cols(), p.d)));
    }
    Ok((0..p.samples)
        .map(|s| {
            let mut rng = stream.substream(s as u64).rng();
            let rows: Vec<Vec<f64>> =
                (0..p.n).map(|_| m.row(rng.random_range(0..m.rows())).iter().map(|v| v.abs()).collect()).collect();
            Matrix::from_rows(&rows).expect("rows share the embedding width")
        })
        .collect())
}

/// Total energy of each layer output across many samples, summarised per layer.
pub fn exp_energy_curves(p: &EnergyCurveParams, seed: u64) -> Result<ExperimentOutput> {
    if p.samples == 0 || p.n == 0 || p.d == 0 || p.depth == 0 {
        return Err(Error::Config("energy-curves needs samples, n, d, depth >= 1".into()));
    }
    let mut losses = None;
    // (stack, input) per sample
    let runs: Vec<(StackConfig, Matrix)> = match p.mode {
        CurveMode::RandomInit => {
            let w = LayerWeights::random(p.d, p.weight_scale, p.alpha2, RngStream::new(seed, 0));
            let energy = EnergyConfig::default().with_rho(p.rho).with_beta(p.beta_mode).with_step(p.alpha2);
            let mut stack = StackConfig::new(p.depth, w, energy);
            stack.use_relu = p.use_relu;
            let inputs = match &p.embeddings {
                Some(path) => embedding_samples(&load_embeddings(Path::new(path))?, p, RngStream::new(seed, 1))?,
                None => (0..p.samples)
                    .map(|s| RngStream::new(seed, 1).substream(s as u64).normal_matrix(p.n, p.d, 1.0).map(f64::abs))
                    .collect(),
            };
            inputs.into_iter().map(|x| (stack.clone(), x)).collect()
        }
        CurveMode::Trained => {
            let mut tp = p.train.clone();
            tp.n = p.n;
            tp.d = p.d;
            tp.depth = p.depth;
            tp.alpha2 = p.alpha2;
            tp.weight_scale = p.weight_scale;
            tp.beta_mode = p.beta_mode;
            let (data, result) = train_model(&tp, seed)?;
            let mut stack = result.stack;
            stack.depth = p.depth;
            stack.use_relu = p.use_relu;
            losses = Some(result.losses);
            data.iter()
                .cycle()
                .take(p.samples)
                .map(|s| {
                    let mut st = stack.clone();
                    st.energy.bias_b = Some(s.x.clone());
                    (st, s.x.clone())
                })
                .collect()
        }
    };
    let traces: Vec<Trace> = runs.par_iter().map(|(st, x)| run_stack(x, st)).collect::<Result<_>>()?;

    let layers = p.depth + 1;
    let mut samples_t = CsvTable::new(["sample", "layer", "energy", "e1", "e2", "feasible", "certified"]);
    for (s, tr) in traces.iter().enumerate() {
        for l in 0..layers {
            let e = &tr.energies[l];
            samples_t.push(vec![
                s.into(), l.into(), e.smooth().into(), e.e1.into(), e.e2.into(), e.feasible.into(),
                tr.region_flags[l].certified.into(),
            ])?;
        }
    }
    let mut curve = CsvTable::new([
        "layer", "mean", "q1", "median", "q3", "min", "max", "feasible_fraction", "mean_e1", "mean_e2",
    ]);
    let count = traces.len() as f64;
    let mut means = Vec::with_capacity(layers);
    for l in 0..layers {
        let mut vals: Vec<f64> = traces.iter().map(|t| t.energies[l].smooth()).collect();
        vals.sort_by(f64::total_cmp);
        let mean = vals.iter().sum::<f64>() / count;
        let feas = traces.iter().filter(|t| t.energies[l].feasible).count() as f64 / count;
        let me1 = traces.iter().map(|t| t.energies[l].e1).sum::<f64>() / count;
        let me2 = traces.iter().map(|t| t.energies[l].e2).sum::<f64>() / count;
        means.push(mean);
        curve.push(vec![
            l.into(), mean.into(), quantile(&vals, 0.25).into(), quantile(&vals, 0.5).into(),
            quantile(&vals, 0.75).into(), vals[0].into(), vals[vals.len() - 1].into(), feas.into(), me1.into(),
            me2.into(),
        ])?;
    }
    let decreasing = means.windows(2).filter(|w| w[1] < w[0]).count();
    let non_increasing = means.windows(2).filter(|w| w[1] <= w[0]).count();
    let transitions = layers - 1;
    let mut assertions = Vec::new();
    let mut tables = vec![("energy_curves".to_string(), curve), ("energy_samples".to_string(), samples_t)];
    let mut summary = json!({ "layer_means": means, "decreasing_transitions": decreasing, "transitions": transitions });
    match p.mode {
        CurveMode::RandomInit => assertions.push(Assertion::new(
            "mean-strictly-decreasing",
            decreasing == transitions,
            format!("{decreasing} of {transitions} layer transitions lower the mean energy"),
        )),
        CurveMode::Trained => {
            let frac = non_increasing as f64 / transitions as f64;
            assertions.push(Assertion::new(
                "mean-mostly-non-increasing",
                frac >= 0.95,
                format!("{non_increasing} of {transitions} transitions do not raise the mean energy"),
            ));
            let l = losses.unwrap_or_default();
            if !l.is_empty() {
                let (first, last) = loss_ends(&l);
                assertions.push(Assertion::new(
                    "loss-decreases",
                    last < first,
                    format!("mean loss {first:.6} over the first tenth, {last:.6} over the last"),
                ));
                summary["initial_loss_mean"] = json!(first);
                summary["final_loss_mean"] = json!(last);
                tables.push(("train_loss".into(), loss_table(&l)?));
            }
        }
    }
    Ok(ExperimentOutput { tables, json: vec![], resolved: serde_json::to_value(p)?, summary, assertions })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantiles_interpolate() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile(&v, 0.0), 1.0);
        assert_eq!(quantile(&v, 1.0), 4.0);
        assert!((quantile(&v, 0.5) - 2.5).abs() < 1e-15);
        assert!((quantile(&v, 0.25) - 1.75).abs() < 1e-15);
    }
}
