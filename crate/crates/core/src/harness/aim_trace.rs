use serde_json::json;

use crate::aim::{bound_C, noise_delta, optimal_points, run_algorithm1, AimSteps, QuadraticObjective, Side, SmoothnessProfile};
use crate::error::{Error, Result};
use crate::harness::{AimTraceParams, Assertion, CsvTable, ExperimentOutput};
use crate::numerics::{pca_project, RngStream};

pub const DESCENT_TOL: f64 = 1e-9;

/// Random left/right quadratic pair of the alternating-minimization experiment.
pub fn quadratic_pair(n: usize, d: usize, scale: f64, seed: u64) -> (QuadraticObjective, QuadraticObjective) {
    let f = QuadraticObjective::random(Side::LeftTransform, n, d, scale, RngStream::new(seed, 0));
    let g = QuadraticObjective::random(Side::RightTransform, n, d, scale, RngStream::new(seed, 1));
    (f, g)
}

/// Alternating steps on a random pair, with certificates, distances and a PCA projection.
pub fn exp_aim_trace(p: &AimTraceParams, seed: u64) -> Result<ExperimentOutput> {
    if p.n == 0 || p.d == 0 || p.steps < 10 {
        return Err(Error::Config("aim-trace needs n, d >= 1 and steps >= 10".into()));
    }
    let (f, g) = quadratic_pair(p.n, p.d, p.scale, seed);
    let prof = SmoothnessProfile::new(&f, &g, 1.0)?;
    let alpha2 = p.alpha2_factor / prof.l_h;
    let alpha1 = p.alpha1_ratio * alpha2;
    let steps = AimSteps::new(alpha1, alpha2);
    let c = bound_C(alpha1, alpha2, prof.l_g)?;
    let (_, _, yh) = optimal_points(&f, &g)?;
    let y0 = &yh + &RngStream::new(seed, 2).normal_matrix(p.n, p.d, p.init_scale);
    let trace = run_algorithm1(&f, &g, &y0, &steps, p.steps)?;

    let mut points: Vec<Vec<f64>> = trace.iterates.iter().map(|m| m.as_slice().to_vec()).collect();
    points.push(yh.as_slice().to_vec());
    let proj = pca_project(&points, 2)?;

    let mut table = CsvTable::new([
        "step", "h", "f", "g", "delta", "delta_defined", "delta_noise", "C", "s_flag", "certified", "dist", "pca_x",
        "pca_y",
    ]);
    let mut dist = Vec::with_capacity(trace.len());
    for (t, y) in trace.iterates.iter().enumerate() {
        let e = &trace.energies[t];
        let fl = &trace.region_flags[t];
        let noise = noise_delta(y, &f, &g, alpha1, alpha2).map(|nd| nd.ratio).unwrap_or(0.0);
        let dd = (y - &yh).norm();
        dist.push(dd);
        table.push(vec![
            t.into(),
            e.smooth().into(),
            e.e1.into(),
            e.e2.into(),
            trace.deltas[t].unwrap_or(0.0).into(),
            trace.deltas[t].is_some().into(),
            noise.into(),
            c.into(),
            fl.in_region.unwrap_or(false).into(),
            fl.certified.into(),
            dd.into(),
            proj[t][0].into(),
            proj[t][1].into(),
        ])?;
    }

    let h: Vec<f64> = trace.energies.iter().map(|e| e.smooth()).collect();
    let violations: Vec<usize> = (0..p.steps)
        .filter(|&t| trace.region_flags[t].certified && h[t + 1] > h[t] + DESCENT_TOL)
        .collect();
    let bound_violations = (0..trace.len())
        .filter(|&t| trace.region_flags[t].in_region == Some(true) && trace.deltas[t].is_some_and(|d| d > c + DESCENT_TOL))
        .count();
    let m = trace.len();
    let head_min = dist[..(m / 10).max(1)].iter().copied().fold(f64::INFINITY, f64::min);
    let tail_max = dist[m - (m / 4).max(1)..].iter().copied().fold(0.0, f64::max);
    let certified = trace.region_flags.iter().filter(|f| f.certified).count();

    let assertions = vec![
        Assertion::new("certified-descent", violations.is_empty(), format!("{} violations over {certified} certified steps", violations.len())),
        Assertion::new("region-implies-bound", bound_violations == 0, format!("{bound_violations} members with delta above C")),
        Assertion::new("distance-band", tail_max < head_min, format!("max over last quarter {tail_max:e} vs min over first tenth {head_min:e}")),
    ];
    let opt = &proj[m];
    Ok(ExperimentOutput {
        tables: vec![("aim_trace".into(), table)],
        json: vec![],
        resolved: serde_json::to_value(p)?,
        summary: json!({
            "L_f": prof.l_f, "c_f": prof.c_f, "L_g": prof.l_g, "c_g": prof.c_g, "L_h": prof.l_h, "c_h": prof.c_h,
            "alpha1": alpha1, "alpha2": alpha2, "C": c,
            "certified_steps": certified,
            "violations": violations.len(),
            "optimum_pca": [opt[0], opt[1]],
            "head_min_dist": head_min, "tail_max_dist": tail_max,
        }),
        assertions,
    })
}
