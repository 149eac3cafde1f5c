use serde::{Deserialize, Serialize};

use crate::error::{dim_err, Error, Result};
use crate::numerics::{Matrix, RngStream};

pub const DEFAULT_INIT_SCALE: f64 = 0.02;

/// Raw layer parameters together with the symmetric matrices the energy view uses.
///
/// `w_a_s = W_a W_a^T` and `w_f_s = (1 - alpha2) I - alpha2 (W_f + W_f^T) / 2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerWeights {
    pub w_a_raw: Matrix,
    pub w_f_raw: Matrix,
    pub w_a_s: Matrix,
    pub w_f_s: Matrix,
    pub alpha2: f64,
}

impl LayerWeights {
    pub fn new(w_a_raw: Matrix, w_f_raw: Matrix, alpha2: f64) -> Result<Self> {
        if !w_a_raw.is_square() || !w_f_raw.same_shape(&w_a_raw) {
            return Err(dim_err(format!(
                "W_a {:?} and W_f {:?} must be the same square size",
                w_a_raw.shape(),
                w_f_raw.shape()
            )));
        }
        if !(alpha2 > 0.0 && alpha2.is_finite()) {
            return Err(Error::Config(format!("alpha2 must be positive, got {alpha2}")));
        }
        let w_a_s = w_a_raw.matmul_t(&w_a_raw);
        let w_f_s = w_f_sym(&w_f_raw, alpha2);
        Ok(Self { w_a_raw, w_f_raw, w_a_s, w_f_s, alpha2 })
    }

    /// i.i.d. `N(0, scale^2)` raw entries.
    pub fn random(d: usize, scale: f64, alpha2: f64, stream: RngStream) -> Self {
        let w_a = stream.substream(0).normal_matrix(d, d, scale);
        let w_f = stream.substream(1).normal_matrix(d, d, scale);
        Self::new(w_a, w_f, alpha2).expect("square weights and positive step")
    }

    pub fn identity(d: usize, alpha2: f64) -> Result<Self> {
        Self::new(Matrix::identity(d), Matrix::zeros(d, d), alpha2)
    }

    pub fn d(&self) -> usize {
        self.w_a_raw.rows()
    }

    /// Rebuilds the derived matrices after the raw ones changed.
    pub fn with_raw(&self, w_a_raw: Matrix, w_f_raw: Matrix) -> Result<Self> {
        Self::new(w_a_raw, w_f_raw, self.alpha2)
    }

    pub fn check_tokens(&self, z: &Matrix) -> Result<()> {
        if z.cols() != self.d() {
            return Err(dim_err(format!("tokens have width {} but weights are {}x{}", z.cols(), self.d(), self.d())));
        }
        Ok(())
    }
}

pub(crate) fn w_f_sym(w_f: &Matrix, alpha2: f64) -> Matrix {
    let d = w_f.rows();
    let mut s = w_f.symmetric_part().scale(-alpha2);
    for i in 0..d {
        s[(i, i)] += 1.0 - alpha2;
    }
    s
}

/// Undirected attention graph over tokens; every token attends to itself.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphMask {
    n: usize,
    adjacency: Vec<bool>,
}

impl GraphMask {
    /// From a full boolean adjacency; must be symmetric. Self-loops are forced on.
    pub fn from_adjacency(rows: &[Vec<bool>]) -> Result<Self> {
        let n = rows.len();
        if n == 0 || rows.iter().any(|r| r.len() != n) {
            return Err(dim_err("adjacency must be a non-empty square table"));
        }
        let mut adjacency: Vec<bool> = rows.iter().flatten().copied().collect();
        for i in 0..n {
            for j in 0..n {
                if adjacency[i * n + j] != adjacency[j * n + i] {
                    return Err(Error::Precondition(format!("adjacency not symmetric at ({i}, {j})")));
                }
            }
            adjacency[i * n + i] = true;
        }
        Ok(Self { n, adjacency })
    }

    /// From an undirected edge list.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut m = Self::self_only(n);
        for &(u, v) in edges {
            if u >= n || v >= n {
                return Err(dim_err(format!("edge ({u}, {v}) out of range for {n} tokens")));
            }
            m.adjacency[u * n + v] = true;
            m.adjacency[v * n + u] = true;
        }
        Ok(m)
    }

    pub fn complete(n: usize) -> Self {
        Self { n, adjacency: vec![true; n * n] }
    }

    pub fn self_only(n: usize) -> Self {
        let mut adjacency = vec![false; n * n];
        for i in 0..n {
            adjacency[i * n + i] = true;
        }
        Self { n, adjacency }
    }

    /// Token 0 connected to every other token.
    pub fn star(n: usize) -> Self {
        let edges: Vec<_> = (1..n).map(|v| (0, v)).collect();
        Self::from_edges(n, &edges).expect("in-range edges")
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.adjacency[i * self.n + j]
    }

    pub fn degree(&self, i: usize) -> usize {
        (0..self.n).filter(|&j| self.contains(i, j)).count()
    }

    pub fn check(&self, n: usize) -> Result<()> {
        if self.n != n {
            return Err(dim_err(format!("mask is for {} tokens, got {n}", self.n)));
        }
        Ok(())
    }

    /// Relabels vertices so that new vertex `i` is old vertex `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let n = self.n;
        let mut adjacency = vec![false; n * n];
        for i in 0..n {
            for j in 0..n {
                adjacency[i * n + j] = self.contains(perm[i], perm[j]);
            }
        }
        Self { n, adjacency }
    }
}
