use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::grad::{forward_cached, stack_backward, stack_loss, MetaHead};
use crate::numerics::Matrix;
use crate::unfold::StackConfig;

const FD_STEP: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamCheck {
    pub name: String,
    pub rel_err: f64,
    pub compared: usize,
    /// Coordinates skipped because a ReLU changed state within `+-h`.
    pub excluded: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub params: Vec<ParamCheck>,
    pub max_rel_err: f64,
    pub tol: f64,
    pub passed: bool,
}

impl GradCheckReport {
    pub fn excluded(&self) -> usize {
        self.params.iter().map(|p| p.excluded).sum()
    }
}

#[derive(Clone, Copy)]
enum Param {
    WaRaw,
    WfRaw,
    Head,
}

/// Compares `stack_backward` against central differences on every parameter entry.
///
/// Relative error per parameter is `||g_fd - g|| / max(1, ||g||)` over the
/// compared coordinates.
pub fn grad_check(
    y0: &Matrix,
    label: &[f64],
    stack: &StackConfig,
    head: &MetaHead,
    tol: f64,
) -> Result<GradCheckReport> {
    let g = stack_backward(y0, stack, head, label)?;
    let base = activation_pattern(y0, stack)?;
    let mut params = Vec::new();
    for (name, p, analytic) in [
        ("w_a_raw", Param::WaRaw, &g.w_a_raw),
        ("w_f_raw", Param::WfRaw, &g.w_f_raw),
        ("head", Param::Head, &g.head),
    ] {
        let mut diff_sq = 0.0;
        let mut ref_sq = 0.0;
        let (mut compared, mut excluded) = (0, 0);
        for k in 0..analytic.len() {
            let (sp, hp) = perturbed(stack, head, p, k, FD_STEP)?;
            let (sm, hm) = perturbed(stack, head, p, k, -FD_STEP)?;
            if stack.use_relu && (activation_pattern(y0, &sp)? != base || activation_pattern(y0, &sm)? != base) {
                excluded += 1;
                continue;
            }
            let fd = (stack_loss(y0, &sp, &hp, label)? - stack_loss(y0, &sm, &hm, label)?) / (2.0 * FD_STEP);
            let a = analytic.as_slice()[k];
            diff_sq += (fd - a) * (fd - a);
            ref_sq += a * a;
            compared += 1;
        }
        let rel_err = diff_sq.sqrt() / ref_sq.sqrt().max(1.0);
        params.push(ParamCheck { name: name.into(), rel_err, compared, excluded });
    }
    let max_rel_err = params.iter().map(|p| p.rel_err).fold(0.0, f64::max);
    Ok(GradCheckReport { params, max_rel_err, tol, passed: max_rel_err <= tol })
}

fn perturbed(stack: &StackConfig, head: &MetaHead, p: Param, k: usize, h: f64) -> Result<(StackConfig, MetaHead)> {
    let mut s = stack.clone();
    let mut hd = head.clone();
    match p {
        Param::WaRaw => {
            let mut wa = s.weights.w_a_raw.clone();
            wa.as_mut_slice()[k] += h;
            s.weights = s.weights.with_raw(wa, s.weights.w_f_raw.clone())?;
        }
        Param::WfRaw => {
            let mut wf = s.weights.w_f_raw.clone();
            wf.as_mut_slice()[k] += h;
            s.weights = s.weights.with_raw(s.weights.w_a_raw.clone(), wf)?;
        }
        Param::Head => hd.head_matrix.as_mut_slice()[k] += h,
    }
    Ok((s, hd))
}

// Sign state of every pre-activation; an exact zero counts as its own state.
fn activation_pattern(y0: &Matrix, stack: &StackConfig) -> Result<Vec<i8>> {
    let (caches, _) = forward_cached(y0, stack)?;
    Ok(caches
        .iter()
        .flat_map(|c| c.v.as_slice().iter().map(|&v| (v > 0.0) as i8 - (v < 0.0) as i8).collect::<Vec<_>>())
        .collect())
}
