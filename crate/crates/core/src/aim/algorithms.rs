use serde::{Deserialize, Serialize};

use crate::aim::{
    apollonian_contains, bound_C, bound_Cprime, d_similarity, QuadraticObjective, RegionSpec,
    SmoothnessProfile,
};
use crate::energy::{phi_indicator, EnergyValue};
use crate::error::{Error, Result};
use crate::numerics::Matrix;
use crate::trace::{RegionFlags, Trace};
use crate::unfold::prox_relu;

/// Whether step-size preconditions are enforced up front.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum StepMode {
    /// Reject `alpha1 <= alpha2 <= 1/L_h` violations.
    #[default]
    Certified,
    /// Run anyway; certificates then never fire.
    Free,
}

/// Step sizes and the proximal parameters of one run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AimSteps {
    pub alpha1: f64,
    pub alpha2: f64,
    pub lambda: f64,
    pub kappa: f64,
    pub mode: StepMode,
}

impl AimSteps {
    pub fn new(alpha1: f64, alpha2: f64) -> Self {
        Self { alpha1, alpha2, lambda: alpha2, kappa: 0.5, mode: StepMode::Certified }
    }

    fn step_ok(&self, prof: &SmoothnessProfile) -> bool {
        self.alpha1 > 0.0 && self.alpha1 <= self.alpha2 && self.alpha2 * prof.l_h <= 1.0 + 1e-12
    }

    fn check(&self, prof: &SmoothnessProfile) -> Result<()> {
        if !(self.alpha1 >= 0.0 && self.alpha2 > 0.0 && self.alpha1 <= self.alpha2) {
            return Err(Error::Precondition(format!(
                "need 0 <= alpha1 <= alpha2, got {} and {}",
                self.alpha1, self.alpha2
            )));
        }
        if self.mode == StepMode::Certified && !self.step_ok(prof) {
            return Err(Error::Precondition(format!(
                "certified mode needs alpha1 <= alpha2 <= 1/L_h = {:e}",
                1.0 / prof.l_h
            )));
        }
        Ok(())
    }
}

fn energy(f: &QuadraticObjective, g: &QuadraticObjective, y: &Matrix, phi_active: bool) -> Result<EnergyValue> {
    Ok(EnergyValue::new(f.value(y)?, g.value(y)?, !phi_active || phi_indicator(y)))
}

// Ratio of the grad-f part of the noise to grad h; None at the optimum.
fn grad_ratio(gf: &Matrix, gh: &Matrix) -> Option<f64> {
    let hn = gh.norm();
    (hn > 1e-12).then(|| gf.norm() / hn)
}

/// Alternating steps `u = y - alpha1 grad f(y)`, `y+ = u - alpha2 grad g(u)`.
///
/// Each iterate is certified when the steps are admissible and
/// `||grad f|| / ||grad h|| <= C`; from there `h` cannot increase.
/// `in_region` records membership of the Apollonian region.
pub fn run_algorithm1(
    f: &QuadraticObjective,
    g: &QuadraticObjective,
    y0: &Matrix,
    steps: &AimSteps,
    iterations: usize,
) -> Result<Trace> {
    let prof = SmoothnessProfile::new(f, g, steps.alpha2)?;
    steps.check(&prof)?;
    let c = bound_C(steps.alpha1, steps.alpha2, prof.l_g)?;
    let spec = RegionSpec::new(f, g, &prof, steps.alpha1, steps.alpha2, steps.alpha2, 0.5)?;
    let threshold = spec.s_threshold(&prof);
    let step_ok = steps.step_ok(&prof);

    let mut trace = Trace::default();
    let mut y = y0.clone();
    for t in 0..=iterations {
        let gf = f.grad(&y)?;
        let gh = &gf + &g.grad(&y)?;
        let delta = grad_ratio(&gf, &gh);
        let delta_ok = delta.is_some_and(|d| d <= c);
        let flags = RegionFlags {
            step_ok,
            delta_ok,
            delta_bound: c,
            in_region: apollonian_contains(&y, &spec.y_f_star, &spec.y_h_star, threshold).ok(),
            feasible: true,
            certified: step_ok && delta_ok,
            ..RegionFlags::default()
        };
        let e = energy(f, g, &y, false)?;
        let next = (t < iterations).then(|| {
            let mut u = y.clone();
            u.add_scaled(-steps.alpha1, &gf);
            g.grad(&u).map(|gu| {
                u.add_scaled(-steps.alpha2, &gu);
                u
            })
        });
        trace.push(y, e, delta, flags);
        match next {
            Some(n) => y = n?,
            None => break,
        }
    }
    Ok(trace)
}

/// Alternating steps followed by the proximal ReLU: `y+ = ReLU(u - alpha2 grad g(u))`.
///
/// Certified when steps are admissible, `||grad f|| / ||grad h|| <= C'`,
/// `D(alpha2 grad h; y) >= -kappa` and `y` is feasible; then `h + phi` cannot increase.
pub fn run_algorithm2(
    f: &QuadraticObjective,
    g: &QuadraticObjective,
    y0: &Matrix,
    steps: &AimSteps,
    iterations: usize,
) -> Result<Trace> {
    if !phi_indicator(y0) {
        return Err(Error::Precondition("initial point must be entrywise non-negative".into()));
    }
    if !(steps.lambda > 0.0 && steps.lambda <= steps.alpha2) {
        return Err(Error::Precondition(format!(
            "need 0 < lambda <= alpha2, got lambda = {}",
            steps.lambda
        )));
    }
    let prof = SmoothnessProfile::new(f, g, steps.lambda)?;
    steps.check(&prof)?;
    let cp = bound_Cprime(steps.alpha1, steps.alpha2, steps.lambda, steps.kappa, prof.c_p, prof.l_g)?;
    let step_ok = steps.step_ok(&prof);

    let mut trace = Trace::default();
    let mut y = y0.clone();
    for t in 0..=iterations {
        let gf = f.grad(&y)?;
        let gh = &gf + &g.grad(&y)?;
        let delta = grad_ratio(&gf, &gh);
        let delta_ok = delta.is_some_and(|d| d <= cp);
        let similarity = if gh.norm() > 1e-12 { Some(d_similarity(&gh.scale(steps.alpha2), &y)?) } else { None };
        let similarity_ok = similarity.map(|s| s >= -steps.kappa);
        let feasible = phi_indicator(&y);
        let flags = RegionFlags {
            step_ok,
            delta_ok,
            delta_bound: cp,
            similarity,
            similarity_ok,
            in_region: None,
            feasible,
            certified: step_ok && delta_ok && feasible && similarity_ok.unwrap_or(false),
        };
        let e = energy(f, g, &y, true)?;
        let next = if t < iterations { Some(algorithm2_turn(f, g, &y, steps)?) } else { None };
        trace.push(y, e, delta, flags);
        match next {
            Some(n) => y = n,
            None => break,
        }
    }
    Ok(trace)
}

/// Pre-projection point `v = u - alpha2 grad g(u)` of one proximal alternating turn.
pub fn algorithm2_preimage(f: &QuadraticObjective, g: &QuadraticObjective, y: &Matrix, steps: &AimSteps) -> Result<Matrix> {
    let mut u = y.clone();
    u.add_scaled(-steps.alpha1, &f.grad(y)?);
    let gu = g.grad(&u)?;
    u.add_scaled(-steps.alpha2, &gu);
    Ok(u)
}

pub fn algorithm2_turn(f: &QuadraticObjective, g: &QuadraticObjective, y: &Matrix, steps: &AimSteps) -> Result<Matrix> {
    Ok(prox_relu(&algorithm2_preimage(f, g, y, steps)?))
}

/// `||z - v||^2 / (2 lambda) + phi(z)`, with `None` standing for `+inf`.
pub fn proximal_objective(z: &Matrix, v: &Matrix, lambda: f64) -> Option<f64> {
    phi_indicator(z).then(|| (z - v).norm_sq() / (2.0 * lambda))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aim::{optimal_points, Side};
    use crate::numerics::RngStream;

    fn instance(seed: u64) -> (QuadraticObjective, QuadraticObjective) {
        let f = QuadraticObjective::random(Side::LeftTransform, 4, 4, 0.3, RngStream::new(seed, 0));
        let g = QuadraticObjective::random(Side::RightTransform, 4, 4, 0.3, RngStream::new(seed, 1));
        (f, g)
    }

    #[test]
    fn shared_objective_converges() {
        let (f, _) = instance(1);
        let prof = SmoothnessProfile::new(&f, &f, 1.0).unwrap();
        let a = 1.0 / prof.l_h;
        let y0 = RngStream::new(1, 2).normal_matrix(4, 4, 3.0);
        let t = run_algorithm1(&f, &f, &y0, &AimSteps::new(a, a), 10_000).unwrap();
        let (yf, _, _) = optimal_points(&f, &f).unwrap();
        assert!((t.last().unwrap() - &yf).norm() <= 1e-6);
    }

    #[test]
    fn certified_steps_descend() {
        for seed in 0..10 {
            let (f, g) = instance(seed);
            let prof = SmoothnessProfile::new(&f, &g, 1.0).unwrap();
            let a2 = 1.0 / prof.l_h;
            let y0 = RngStream::new(seed, 2).normal_matrix(4, 4, 5.0);
            let t = run_algorithm1(&f, &g, &y0, &AimSteps::new(0.5 * a2, a2), 300).unwrap();
            assert!(t.region_flags.iter().any(|fl| fl.certified));
            assert!(t.conditional_violations(1e-9).is_empty());
            let y0 = y0.map(f64::abs);
            let t = run_algorithm2(&f, &g, &y0, &AimSteps::new(0.5 * a2, a2), 300).unwrap();
            assert!(t.iterates.iter().all(phi_indicator));
            assert!(t.conditional_violations(1e-9).is_empty());
        }
    }

    #[test]
    fn preconditions() {
        let (f, g) = instance(3);
        let y0 = Matrix::filled(4, 4, 1.0);
        assert!(run_algorithm1(&f, &g, &y0, &AimSteps::new(0.5, 0.5), 10).is_err());
        let mut free = AimSteps::new(0.5, 0.5);
        free.mode = StepMode::Free;
        assert!(run_algorithm1(&f, &g, &y0, &free, 3).is_ok());
        let neg = Matrix::filled(4, 4, -1.0);
        assert!(run_algorithm2(&f, &g, &neg, &AimSteps::new(0.01, 0.01), 3).is_err());
    }
}
