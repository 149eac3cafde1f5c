use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Concave, non-decreasing pair potential `rho` applied to `z = ||y_i - y_j||^2 / 2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub enum RhoKind {
    /// `rho(z) = -exp(-z)`
    #[default]
    NegExp,
    /// `rho(z) = log(z + 2)`
    LogPlus2,
    /// `rho(z) = log(z + 1)`
    LogPlus1,
}

impl RhoKind {
    pub const ALL: [RhoKind; 3] = [RhoKind::NegExp, RhoKind::LogPlus2, RhoKind::LogPlus1];

    pub fn value(self, z: f64) -> Result<f64> {
        check_domain(z)?;
        Ok(self.value_unchecked(z))
    }

    pub fn prime(self, z: f64) -> Result<f64> {
        check_domain(z)?;
        Ok(self.prime_unchecked(z))
    }

    /// Second derivative; non-positive for every kind.
    pub fn second(self, z: f64) -> Result<f64> {
        check_domain(z)?;
        Ok(match self {
            RhoKind::NegExp => -(-z).exp(),
            RhoKind::LogPlus2 => -1.0 / ((z + 2.0) * (z + 2.0)),
            RhoKind::LogPlus1 => -1.0 / ((z + 1.0) * (z + 1.0)),
        })
    }

    /// `log rho'(z)`, the attention logit for the pair.
    pub fn log_prime(self, z: f64) -> Result<f64> {
        check_domain(z)?;
        Ok(self.log_prime_unchecked(z))
    }

    // Pair distances are non-negative by construction, so internal callers skip the check.
    pub(crate) fn value_unchecked(self, z: f64) -> f64 {
        match self {
            RhoKind::NegExp => -(-z).exp(),
            RhoKind::LogPlus2 => (z + 2.0).ln(),
            RhoKind::LogPlus1 => z.ln_1p(),
        }
    }

    pub(crate) fn prime_unchecked(self, z: f64) -> f64 {
        match self {
            RhoKind::NegExp => (-z).exp(),
            RhoKind::LogPlus2 => 1.0 / (z + 2.0),
            RhoKind::LogPlus1 => 1.0 / (z + 1.0),
        }
    }

    pub(crate) fn log_prime_unchecked(self, z: f64) -> f64 {
        match self {
            RhoKind::NegExp => -z,
            RhoKind::LogPlus2 => -(z + 2.0).ln(),
            RhoKind::LogPlus1 => -z.ln_1p(),
        }
    }
}

fn check_domain(z: f64) -> Result<()> {
    if z >= 0.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("rho is defined on z >= 0, got {z}")))
    }
}

pub fn rho_eval(kind: RhoKind, z: f64) -> Result<f64> {
    kind.value(z)
}

pub fn rho_prime(kind: RhoKind, z: f64) -> Result<f64> {
    kind.prime(z)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn values_at_zero() {
        assert_eq!(rho_eval(RhoKind::NegExp, 0.0).unwrap(), -1.0);
        assert_eq!(rho_prime(RhoKind::NegExp, 0.0).unwrap(), 1.0);
        assert!((rho_eval(RhoKind::LogPlus2, 0.0).unwrap() - 2f64.ln()).abs() < 1e-15);
        assert_eq!(rho_eval(RhoKind::LogPlus1, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn negative_argument_rejected() {
        for k in RhoKind::ALL {
            assert!(matches!(k.value(-1e-9), Err(Error::Domain(_))));
            assert!(k.prime(-1.0).is_err());
            assert!(k.prime(f64::NAN).is_err());
        }
    }

    #[test]
    fn derivative_matches_central_difference() {
        let h = 1e-5;
        for k in RhoKind::ALL {
            let z = 0.7;
            let fd = (k.value(z + h).unwrap() - k.value(z - h).unwrap()) / (2.0 * h);
            let d = k.prime(z).unwrap();
            assert!(((fd - d) / d).abs() <= 1e-8, "{k:?}");
            let fd2 = (k.prime(z + h).unwrap() - k.prime(z - h).unwrap()) / (2.0 * h);
            assert!((fd2 - k.second(z).unwrap()).abs() <= 1e-8);
            assert!((k.log_prime(z).unwrap() - d.ln()).abs() < 1e-14);
        }
    }

    #[test]
    fn concave_and_non_decreasing_on_grid() {
        for k in RhoKind::ALL {
            for i in 0..2000 {
                let z = i as f64 * 0.01;
                assert!(k.prime(z).unwrap() > 0.0);
                assert!(k.second(z).unwrap() <= 0.0);
            }
        }
    }
}
