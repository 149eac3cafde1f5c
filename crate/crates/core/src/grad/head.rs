use serde::{Deserialize, Serialize};

use crate::error::{dim_err, Result};
use crate::numerics::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Pooling {
    #[default]
    MeanOverTokens,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LossKind {
    /// `sum_k (out_k - label_k)^2 / 2`
    SquaredError,
    /// `sum_k softplus(out_k) - label_k out_k`, labels in `{0, 1}`
    LogisticBinary,
}

/// Output map applied to the final representation, plus the per-sample loss.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetaHead {
    pub pooling: Pooling,
    /// `d x k`
    pub head_matrix: Matrix,
    pub loss_kind: LossKind,
}

impl MetaHead {
    pub fn new(head_matrix: Matrix, loss_kind: LossKind) -> Self {
        Self { pooling: Pooling::MeanOverTokens, head_matrix, loss_kind }
    }

    pub fn outputs(&self) -> usize {
        self.head_matrix.cols()
    }

    pub fn check(&self, z: &Matrix, label: &[f64]) -> Result<()> {
        if self.head_matrix.rows() != z.cols() {
            return Err(dim_err(format!(
                "head is {:?} for tokens of width {}",
                self.head_matrix.shape(),
                z.cols()
            )));
        }
        if label.len() != self.outputs() {
            return Err(dim_err(format!("label has {} entries, head has {}", label.len(), self.outputs())));
        }
        Ok(())
    }

    pub fn pool(&self, z: &Matrix) -> Matrix {
        match self.pooling {
            Pooling::MeanOverTokens => z.column_means(),
        }
    }

    /// `pool(Z) H` as a `1 x k` row.
    pub fn forward(&self, z: &Matrix) -> Matrix {
        self.pool(z).matmul(&self.head_matrix)
    }

    pub fn loss(&self, out: &Matrix, label: &[f64]) -> f64 {
        let o = out.as_slice();
        match self.loss_kind {
            LossKind::SquaredError => o.iter().zip(label).map(|(a, b)| 0.5 * (a - b) * (a - b)).sum(),
            LossKind::LogisticBinary => o.iter().zip(label).map(|(a, y)| softplus(*a) - y * a).sum(),
        }
    }

    /// Derivative of the loss with respect to the head output.
    pub fn loss_grad(&self, out: &Matrix, label: &[f64]) -> Matrix {
        let k = out.cols();
        let o = out.as_slice();
        match self.loss_kind {
            LossKind::SquaredError => Matrix::from_fn(1, k, |_, j| o[j] - label[j]),
            LossKind::LogisticBinary => Matrix::from_fn(1, k, |_, j| sigmoid(o[j]) - label[j]),
        }
    }
}

pub(crate) fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
