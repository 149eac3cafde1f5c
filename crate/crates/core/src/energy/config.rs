use serde::{Deserialize, Serialize};

use crate::energy::RhoKind;
use crate::error::{dim_err, Error, Result};
use crate::numerics::Matrix;

/// Per-token multipliers inside the softmax.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub enum BetaMode {
    /// `beta_i = exp(-||y_i||^2 / 2)`
    #[default]
    Reweighted,
    /// `beta_i = 1`, the canonical softmax
    Uniform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnergyConfig {
    pub rho: RhoKind,
    /// Regularizer bias; `R(Y) = ||Y - B||^2 / 2`, or `||Y||^2 / 2` when absent.
    #[serde(default)]
    pub bias_b: Option<Matrix>,
    pub alpha1: f64,
    pub alpha2: f64,
    pub lambda: f64,
    #[serde(default)]
    pub beta_mode: BetaMode,
}

impl Default for EnergyConfig {
    fn default() -> Self {
        Self {
            rho: RhoKind::NegExp,
            bias_b: None,
            alpha1: 0.1,
            alpha2: 0.1,
            lambda: 0.1,
            beta_mode: BetaMode::Reweighted,
        }
    }
}

impl EnergyConfig {
    pub fn with_rho(mut self, rho: RhoKind) -> Self {
        self.rho = rho;
        self
    }

    pub fn with_bias(mut self, b: Matrix) -> Self {
        self.bias_b = Some(b);
        self
    }

    pub fn with_beta(mut self, mode: BetaMode) -> Self {
        self.beta_mode = mode;
        self
    }

    /// Sets `alpha1 = alpha2 = lambda = alpha`.
    pub fn with_step(mut self, alpha: f64) -> Self {
        self.alpha1 = alpha;
        self.alpha2 = alpha;
        self.lambda = alpha;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.alpha1, self.alpha2, self.lambda].iter().all(|x| x.is_finite());
        if !finite || !(self.alpha1 > 0.0) || self.alpha1 > self.alpha2 {
            return Err(Error::Config(format!(
                "need 0 < alpha1 <= alpha2, got alpha1 = {}, alpha2 = {}",
                self.alpha1, self.alpha2
            )));
        }
        if !(self.lambda > 0.0) || self.lambda > self.alpha2 {
            return Err(Error::Config(format!(
                "need 0 < lambda <= alpha2, got lambda = {}",
                self.lambda
            )));
        }
        if let Some(b) = &self.bias_b {
            if !b.is_finite() {
                return Err(Error::Config("bias contains non-finite entries".into()));
            }
        }
        Ok(())
    }

    /// Checks that the bias, when present, matches the token matrix.
    pub fn check_bias(&self, y: &Matrix) -> Result<()> {
        match &self.bias_b {
            Some(b) if !b.same_shape(y) => Err(dim_err(format!(
                "bias is {:?} but tokens are {:?}",
                b.shape(),
                y.shape()
            ))),
            _ => Ok(()),
        }
    }

    /// `R(Y)`
    pub fn regularizer(&self, y: &Matrix) -> Result<f64> {
        self.check_bias(y)?;
        Ok(match &self.bias_b {
            Some(b) => 0.5 * (y - b).norm_sq(),
            None => 0.5 * y.norm_sq(),
        })
    }

    /// `grad R(Y) = Y - B`
    pub fn regularizer_grad(&self, y: &Matrix) -> Result<Matrix> {
        self.check_bias(y)?;
        Ok(match &self.bias_b {
            Some(b) => y - b,
            None => y.clone(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation() {
        assert!(EnergyConfig::default().validate().is_ok());
        let mut c = EnergyConfig::default();
        c.alpha1 = 0.2;
        assert!(c.validate().is_err());
        let mut c = EnergyConfig::default();
        c.lambda = 0.5;
        assert!(c.validate().is_err());
        let mut c = EnergyConfig::default();
        c.alpha1 = 0.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn bias_shape_checked() {
        let c = EnergyConfig::default().with_bias(Matrix::zeros(2, 2));
        assert!(c.regularizer(&Matrix::zeros(3, 2)).is_err());
        assert_eq!(c.regularizer(&Matrix::filled(2, 2, 1.0)).unwrap(), 2.0);
    }
}
