use rand::Rng;
use serde_json::json;

use crate::aim::{optimal_points, run_algorithm1, run_algorithm2, AimSteps, SmoothnessProfile};
use crate::energy::{EnergyConfig, RhoKind};
use crate::error::{Error, Result};
use crate::harness::aim_trace::quadratic_pair;
use crate::harness::{Assertion, AuditParams, Cell, CsvTable, ExperimentOutput};
use crate::numerics::RngStream;
use crate::trace::Trace;
use crate::unfold::{run_stack, GraphMask, LayerWeights, StackConfig};

pub const AUDIT_COLUMNS: [&str; 17] = [
    "step", "energy_before", "energy_after", "energy_change", "totals_defined", "delta", "delta_defined",
    "delta_bound", "delta_ok", "similarity", "similarity_defined", "similarity_ok", "step_ok", "feasible",
    "certified", "increased", "violation",
];

fn audit_rows(trace: &Trace, tol: f64) -> Vec<Vec<Cell>> {
    (0..trace.len().saturating_sub(1))
        .map(|k| {
            let fl = &trace.region_flags[k];
            let (a, b) = (trace.energies[k].total, trace.energies[k + 1].total);
            let defined = a.is_some() && b.is_some();
            let (ea, eb) = (a.unwrap_or(0.0), b.unwrap_or(0.0));
            let increased = defined && eb > ea + tol;
            vec![
                k.into(),
                ea.into(),
                eb.into(),
                (eb - ea).into(),
                defined.into(),
                trace.deltas[k].unwrap_or(0.0).into(),
                trace.deltas[k].is_some().into(),
                fl.delta_bound.into(),
                fl.delta_ok.into(),
                fl.similarity.unwrap_or(0.0).into(),
                fl.similarity.is_some().into(),
                fl.similarity_ok.unwrap_or(false).into(),
                fl.step_ok.into(),
                fl.feasible.into(),
                fl.certified.into(),
                increased.into(),
                (increased && fl.certified).into(),
            ]
        })
        .collect()
}

/// One row per transition with the certificate at its start and whether the energy rose.
pub fn descent_audit(trace: &Trace, tol: f64) -> Result<CsvTable> {
    let mut t = CsvTable::new(AUDIT_COLUMNS);
    for row in audit_rows(trace, tol) {
        t.push(row)?;
    }
    Ok(t)
}

fn random_mask(n: usize, choice: usize, stream: RngStream) -> Option<GraphMask> {
    match choice {
        1 => Some(GraphMask::complete(n)),
        2 => Some(GraphMask::self_only(n)),
        3 => Some(GraphMask::star(n)),
        4 => {
            let mut rng = stream.rng();
            let edges: Vec<(usize, usize)> =
                (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).filter(|_| rng.random_bool(0.5)).collect();
            GraphMask::from_edges(n, &edges).ok()
        }
        _ => None,
    }
}

/// Randomized stack configuration number `r`.
pub fn audit_stack(p: &AuditParams, seed: u64, r: usize) -> Result<(StackConfig, crate::numerics::Matrix)> {
    let stream = RngStream::new(seed, 0x00a0_0000 + r as u64);
    let mut rng = stream.substream(0).rng();
    let n = rng.random_range(1..=p.n_max);
    let d = rng.random_range(1..=p.d_max);
    let w = LayerWeights::random(d, p.weight_scale, p.alpha2, stream.substream(1));
    let mut energy = EnergyConfig::default().with_rho(RhoKind::ALL[r % 3]).with_step(p.alpha2);
    let y0 = stream.substream(2).normal_matrix(n, d, 1.0).map(f64::abs);
    if r.is_multiple_of(7) {
        energy = energy.with_bias(stream.substream(3).normal_matrix(n, d, 1.0));
    }
    let mut stack = StackConfig::new(p.depth, w, energy);
    stack.use_relu = r.is_multiple_of(2);
    stack.residual_alpha = [1.0, 0.5, 0.25, 0.75][r % 4];
    stack.graph_mask = random_mask(n, r % 5, stream.substream(4));
    stack.kappa = p.kappa;
    Ok((stack, y0))
}

/// Checks that no certified transition raises the energy, across randomized stacks and AIM runs.
pub fn exp_audit(p: &AuditParams, seed: u64) -> Result<ExperimentOutput> {
    if p.runs == 0 || p.n_max == 0 || p.d_max == 0 {
        return Err(Error::Config("audit needs runs, n_max, d_max >= 1".into()));
    }
    let tol = 1e-9;
    let mut header = vec!["source".to_string(), "run".into()];
    header.extend(AUDIT_COLUMNS.iter().map(|s| s.to_string()));
    let mut table = CsvTable::new(header);
    let (mut certified, mut violations, mut transitions) = (0usize, 0usize, 0usize);
    let mut per_source = serde_json::Map::new();
    let mut record = |source: usize, run: usize, trace: &Trace, table: &mut CsvTable| -> Result<()> {
        let rows = audit_rows(trace, tol);
        let mut c = 0;
        for row in rows {
            c += row[14].as_f64() as usize;
            violations += row[16].as_f64() as usize;
            transitions += 1;
            let mut full: Vec<Cell> = vec![source.into(), run.into()];
            full.extend(row);
            table.push(full)?;
        }
        certified += c;
        let key = ["stack", "aim1", "aim2"][source];
        let e = per_source.entry(key).or_insert(json!(0));
        *e = json!(e.as_u64().unwrap_or(0) + c as u64);
        Ok(())
    };
    for r in 0..p.runs {
        let (stack, y0) = audit_stack(p, seed, r)?;
        record(0, r, &run_stack(&y0, &stack)?, &mut table)?;
    }
    if p.include_aim {
        for r in 0..(p.runs / 25).max(1) {
            let inst = seed.wrapping_add(0x00b0_0000 + r as u64);
            let n = 1 + r % p.n_max.max(2);
            let d = 1 + (r / 2) % p.d_max.max(2);
            let (f, g) = quadratic_pair(n, d, 0.3, inst);
            let prof = SmoothnessProfile::new(&f, &g, 1.0)?;
            let alpha2 = 1.0 / prof.l_h;
            let steps = AimSteps { kappa: p.kappa, ..AimSteps::new(0.5 * alpha2, alpha2) };
            let (_, _, yh) = optimal_points(&f, &g)?;
            let y1 = &yh + &RngStream::new(inst, 2).normal_matrix(n, d, 3.0);
            record(1, r, &run_algorithm1(&f, &g, &y1, &steps, p.aim_steps)?, &mut table)?;
            let y2 = RngStream::new(inst, 3).normal_matrix(n, d, 1.0).map(f64::abs);
            record(2, r, &run_algorithm2(&f, &g, &y2, &steps, p.aim_steps)?, &mut table)?;
        }
    }
    let summary = json!({
        "transitions": transitions, "certified": certified, "violations": violations,
        "certified_by_source": per_source, "sources": ["stack", "aim1", "aim2"], "tol": tol,
    });
    Ok(ExperimentOutput {
        tables: vec![("descent_audit".into(), table)],
        json: vec![],
        resolved: serde_json::to_value(p)?,
        summary,
        assertions: vec![
            Assertion::new(
                "no-certified-increase",
                violations == 0,
                format!("{violations} violations over {certified} certified of {transitions} transitions"),
            ),
            Assertion::new("certificates-non-vacuous", certified > 0, format!("{certified} certified transitions")),
        ],
    })
}
