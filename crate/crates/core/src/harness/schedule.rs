use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// ε(N) = λ (-log ζ_N)^{-1/(4(2+δ))} / log(e - log ζ_N).
///
/// The trailing logarithm makes ε(N) (-log ζ_N)^{1/(4(2+δ))} → 0, realizing the
/// little-o in the rate condition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsSchedule {
    delta: f64,
    lambda: f64,
}

impl EpsSchedule {
    pub fn new(delta: f64, lambda: f64) -> Result<Self> {
        if !(delta >= 0.0 && delta.is_finite()) {
            return Err(invalid(format!("schedule delta must be finite and >= 0, got {delta}")));
        }
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(invalid(format!("schedule prefactor must be positive, got {lambda}")));
        }
        Ok(EpsSchedule { delta, lambda })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// 1 / (4 (2 + δ)).
    pub fn exponent(&self) -> f64 {
        1.0 / (4.0 * (2.0 + self.delta))
    }

    pub fn eps_of_zeta(&self, zeta: f64) -> Result<f64> {
        if !(zeta > 0.0 && zeta < 1.0) {
            return Err(Error::ScheduleDomain(zeta));
        }
        let l = -zeta.ln();
        Ok(self.lambda * l.powf(-self.exponent()) / (std::f64::consts::E + l).ln())
    }
}
