use crate::error::{dim_err, Result};
use crate::numerics::linalg::symmetric_eigen;
use crate::numerics::Matrix;

/// Projects mean-centered points onto their top-`k` principal axes.
///
/// Uses whichever of the covariance (`p x p`) or Gram (`m x m`) matrix is
/// smaller. Each axis is sign-normalized so that its largest-magnitude
/// component is positive, which makes the output deterministic.
pub fn pca_project(points: &[Vec<f64>], k: usize) -> Result<Vec<Vec<f64>>> {
    if points.len() < 2 {
        return Err(dim_err("pca_project needs at least two points"));
    }
    let p = points[0].len();
    if points.iter().any(|v| v.len() != p) {
        return Err(dim_err("pca_project: points have different lengths"));
    }
    if k > p {
        return Err(dim_err(format!("pca_project: k = {k} exceeds dimension {p}")));
    }
    let m = points.len();
    let mut x = Matrix::zeros(m, p);
    for (i, v) in points.iter().enumerate() {
        x.row_mut(i).copy_from_slice(v);
    }
    let mean = x.column_means();
    for i in 0..m {
        for (a, b) in x.row_mut(i).iter_mut().zip(mean.as_slice()) {
            *a -= b;
        }
    }

    let axes: Matrix = if p <= m {
        let (_, vecs) = symmetric_eigen(&x.t_matmul(&x))?;
        Matrix::from_fn(p, k, |r, c| vecs[(r, c)])
    } else {
        let (vals, vecs) = symmetric_eigen(&x.matmul_t(&x))?;
        // right singular vectors v = X^T u / sigma
        let mut axes = Matrix::zeros(p, k);
        for c in 0..k.min(m) {
            let sigma = vals[c].max(0.0).sqrt();
            if sigma <= 1e-300 {
                continue;
            }
            for r in 0..p {
                let s: f64 = (0..m).map(|i| x[(i, r)] * vecs[(i, c)]).sum();
                axes[(r, c)] = s / sigma;
            }
        }
        axes
    };

    let mut axes = axes;
    for c in 0..k {
        let mut best = 0.0f64;
        for r in 0..p {
            if axes[(r, c)].abs() > best.abs() + 1e-12 {
                best = axes[(r, c)];
            }
        }
        if best < 0.0 {
            for r in 0..p {
                axes[(r, c)] = -axes[(r, c)];
            }
        }
    }

    let proj = x.matmul(&axes);
    Ok(proj.row_iter().map(|r| r.to_vec()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn collinear_points_have_flat_second_axis() {
        let pts: Vec<Vec<f64>> = (0..6).map(|t| vec![t as f64, 2.0 * t as f64, -(t as f64)]).collect();
        let proj = pca_project(&pts, 2).unwrap();
        assert!(proj.iter().all(|v| v[1].abs() < 1e-10));
    }

    #[test]
    fn planar_points_keep_distances() {
        let pts: Vec<Vec<f64>> = (0..8)
            .map(|i| {
                let (a, b) = ((i as f64).sin() * 3.0, (i as f64 * 0.7).cos());
                vec![a + b, a - b, 0.0, 2.0 * b]
            })
            .collect();
        let proj = pca_project(&pts, 2).unwrap();
        for i in 0..pts.len() {
            for j in 0..pts.len() {
                let d0: f64 = pts[i].iter().zip(&pts[j]).map(|(a, b)| (a - b).powi(2)).sum();
                let d1: f64 = proj[i].iter().zip(&proj[j]).map(|(a, b)| (a - b).powi(2)).sum();
                assert!((d0.sqrt() - d1.sqrt()).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn rejects_large_k() {
        let pts = vec![vec![0.0, 1.0], vec![1.0, 0.0]];
        assert!(pca_project(&pts, 3).is_err());
        assert!(pca_project(&pts[..1], 1).is_err());
    }
}
