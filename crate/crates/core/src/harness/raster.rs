use serde_json::json;

use crate::aim::{d_similarity, distance_ratio, optimal_points, quadratic_constants, QuadraticObjective, Side};
use crate::error::{Error, Result};
use crate::harness::{Assertion, Cell, CsvTable, ExperimentOutput, RasterSParams, RasterTParams};
use crate::numerics::{Matrix, RngStream};

fn grid_coords(grid: usize, window: f64) -> Result<Vec<f64>> {
    if grid < 3 || !(window > 0.0) {
        return Err(Error::Config("raster needs grid >= 3 and a positive window".into()));
    }
    Ok((0..grid).map(|i| -window + 2.0 * window * i as f64 / (grid - 1) as f64).collect())
}

fn nearest_cell(coords: &[f64], v: f64) -> usize {
    let step = coords[1] - coords[0];
    (((v - coords[0]) / step).round().max(0.0) as usize).min(coords.len() - 1)
}

fn threshold_label(t: f64) -> String {
    format!("member_{t}")
}

/// Left-form 2-D pair `f, g` whose biases are rescaled so that every
/// bounded Apollonian region of the given thresholds sits inside 80% of the window.
pub fn raster_s_instance(
    p: &RasterSParams,
    seed: u64,
) -> Result<(QuadraticObjective, QuadraticObjective, Matrix, Matrix)> {
    let s = RngStream::new(seed, 0).normal_matrix(2, 2, p.scale);
    let t = RngStream::new(seed, 1).normal_matrix(2, 2, p.scale);
    let b1 = RngStream::new(seed, 2).normal_matrix(2, 1, 1.0);
    let b2 = RngStream::new(seed, 3).normal_matrix(2, 1, 1.0);
    let build = |k: f64| -> Result<(QuadraticObjective, QuadraticObjective)> {
        Ok((
            QuadraticObjective::new(Side::LeftTransform, s.clone(), b1.scale(k))?,
            QuadraticObjective::new(Side::LeftTransform, t.clone(), b2.scale(k))?,
        ))
    };
    let (f, g) = build(1.0)?;
    let (yf, _, yh) = optimal_points(&f, &g)?;
    let dist = (&yf - &yh).norm();
    if !(dist > 0.0) {
        return Err(Error::Degenerate("optima of f and h coincide".into()));
    }
    // Apollonian circle of ratio k: centre (yf - k^2 yh)/(1 - k^2), radius k D / |1 - k^2|.
    let mut extent = yf.max_abs().max(yh.max_abs());
    for &k in &p.thresholds {
        if (k - 1.0).abs() < 1e-9 || k <= 0.0 {
            continue;
        }
        let k2 = k * k;
        let centre = (&yf - &yh.scale(k2)).scale(1.0 / (1.0 - k2));
        extent = extent.max(centre.max_abs() + k * dist / (1.0 - k2).abs());
    }
    let rescale = 0.8 * p.window / extent;
    let (f, g) = build(rescale)?;
    let (yf, _, yh) = optimal_points(&f, &g)?;
    Ok((f, g, yf, yh))
}

/// Membership raster of the Apollonian region for several thresholds.
pub fn exp_raster_s(p: &RasterSParams, seed: u64) -> Result<ExperimentOutput> {
    if p.thresholds.is_empty() {
        return Err(Error::Config("raster-s needs at least one threshold".into()));
    }
    let coords = grid_coords(p.grid, p.window)?;
    let (_, _, yf, yh) = raster_s_instance(p, seed)?;
    let mut thresholds = p.thresholds.clone();
    thresholds.sort_by(f64::total_cmp);

    let mut header = vec!["ix".to_string(), "iy".into(), "x".into(), "y".into(), "ratio".into(), "ratio_defined".into()];
    header.extend(thresholds.iter().map(|&t| threshold_label(t)));
    let mut table = CsvTable::new(header);
    let g = p.grid;
    let mut member = vec![vec![false; g * g]; thresholds.len()];
    for iy in 0..g {
        for ix in 0..g {
            let pt = Matrix::column(&[coords[ix], coords[iy]])?;
            let ratio = distance_ratio(&pt, &yf, &yh).ok();
            let mut row: Vec<Cell> = vec![
                ix.into(),
                iy.into(),
                coords[ix].into(),
                coords[iy].into(),
                ratio.unwrap_or(0.0).into(),
                ratio.is_some().into(),
            ];
            for (k, &t) in thresholds.iter().enumerate() {
                let m = ratio.is_some_and(|r| r <= t);
                member[k][iy * g + ix] = m;
                row.push(m.into());
            }
            table.push(row)?;
        }
    }

    let border = |i: usize| {
        let (ix, iy) = (i % g, i / g);
        ix == 0 || iy == 0 || ix == g - 1 || iy == g - 1
    };
    let cell_of = |y: &Matrix| nearest_cell(&coords, y[(1, 0)]) * g + nearest_cell(&coords, y[(0, 0)]);
    let (cf, ch) = (cell_of(&yf), cell_of(&yh));
    let mut assertions = Vec::new();
    let mut topo = Vec::new();
    for (k, &t) in thresholds.iter().enumerate() {
        let set = &member[k];
        let border_members = (0..g * g).filter(|&i| border(i) && set[i]).count();
        let border_outside = (0..g * g).filter(|&i| border(i) && !set[i]).count();
        let count = set.iter().filter(|&&m| m).count();
        topo.push(json!({
            "threshold": t, "members": count, "border_members": border_members,
            "border_non_members": border_outside, "contains_y_f": set[cf], "contains_y_h": set[ch],
        }));
        if t < 1.0 {
            let ok = border_members == 0 && set[cf] && !set[ch];
            assertions.push(Assertion::new(
                &format!("bounded-ball@{t}"),
                ok,
                format!("{border_members} border members, y_f inside = {}, y_h inside = {}", set[cf], set[ch]),
            ));
        } else if t > 1.0 {
            let ok = border_outside == 0 && !set[ch] && set[cf];
            assertions.push(Assertion::new(
                &format!("bounded-complement@{t}"),
                ok,
                format!("{border_outside} border non-members, y_h outside = {}", !set[ch]),
            ));
        }
    }
    let nested = (1..thresholds.len()).all(|k| (0..g * g).all(|i| !member[k - 1][i] || member[k][i]));
    assertions.push(Assertion::new("nested-in-threshold", nested, "member sets grow with the threshold"));

    Ok(ExperimentOutput {
        tables: vec![("raster_s".into(), table)],
        json: vec![],
        resolved: serde_json::to_value(p)?,
        summary: json!({
            "y_f_star": yf.as_slice(), "y_h_star": yh.as_slice(), "thresholds": thresholds, "topology": topo,
        }),
        assertions,
    })
}

/// Membership raster of the similarity region on `h(y) = ||W y||^2 + ||y - b||^2`.
pub fn exp_raster_t(p: &RasterTParams, seed: u64) -> Result<ExperimentOutput> {
    if p.kappas.is_empty() || p.kappas.iter().any(|&k| !(k > 0.0 && k < 1.0)) {
        return Err(Error::Config("raster-t needs kappas in (0, 1)".into()));
    }
    let coords = grid_coords(p.grid, p.window)?;
    let w = RngStream::new(seed, 0).normal_matrix(2, 2, p.scale);
    let b = RngStream::new(seed, 1).normal_matrix(2, 1, p.scale);
    let h = QuadraticObjective::new(Side::LeftTransform, w, b)?;
    let (l_h, _) = quadratic_constants(&h)?;
    let alpha2 = p.alpha2_factor / l_h;
    let mut kappas = p.kappas.clone();
    kappas.sort_by(f64::total_cmp);

    let mut header = vec![
        "ix".to_string(), "iy".into(), "x".into(), "y".into(), "similarity".into(), "defined".into(), "far".into(),
    ];
    header.extend(kappas.iter().map(|&k| format!("member_{k}")));
    let mut table = CsvTable::new(header);
    let g = p.grid;
    let mut far_count = 0usize;
    let mut members = vec![0usize; kappas.len()];
    let mut near_origin_members = vec![0usize; kappas.len()];
    let (ox, oy) = (nearest_cell(&coords, 0.0), nearest_cell(&coords, 0.0));
    for iy in 0..g {
        for ix in 0..g {
            let y = Matrix::column(&[coords[ix], coords[iy]])?;
            let xi = h.grad(&y)?.scale(alpha2);
            // the origin is outside the region's domain and recorded as non-member
            let sim = if y.norm_sq() == 0.0 {
                None
            } else if xi.norm_sq() == 0.0 {
                Some(0.0)
            } else {
                Some(d_similarity(&xi, &y)?)
            };
            let far = y.norm() > p.origin_radius;
            far_count += far as usize;
            let adjacent = ix.abs_diff(ox) <= 1 && iy.abs_diff(oy) <= 1 && !(ix == ox && iy == oy);
            let mut row: Vec<Cell> = vec![
                ix.into(), iy.into(), coords[ix].into(), coords[iy].into(),
                sim.unwrap_or(0.0).into(), sim.is_some().into(), far.into(),
            ];
            for (k, &kappa) in kappas.iter().enumerate() {
                let m = sim.is_some_and(|s| s >= -kappa);
                if m && far {
                    members[k] += 1;
                }
                if m && adjacent {
                    near_origin_members[k] += 1;
                }
                row.push(m.into());
            }
            table.push(row)?;
        }
    }
    let fractions: Vec<f64> = members.iter().map(|&m| m as f64 / far_count.max(1) as f64).collect();
    let monotone = fractions.windows(2).all(|w| w[0] <= w[1]);
    let mut assertions = vec![Assertion::new("monotone-in-kappa", monotone, format!("fractions {fractions:?}"))];
    if let Some(k) = kappas.iter().position(|&k| k >= 0.99) {
        assertions.push(Assertion::new(
            "nearly-whole-space",
            fractions[k] > 0.99,
            format!("member fraction {} at kappa = {} outside radius {}", fractions[k], kappas[k], p.origin_radius),
        ));
    }
    Ok(ExperimentOutput {
        tables: vec![("raster_t".into(), table)],
        json: vec![],
        resolved: serde_json::to_value(p)?,
        summary: json!({ "alpha2": alpha2, "L_h": l_h, "kappas": kappas, "member_fractions": fractions, "origin_neighbour_members": near_origin_members }),
        assertions,
    })
}
