use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Interaction coefficients of the predator-prey system.
///
/// `alpha1`, `alpha2` act on the prey, `beta1`, `beta2` on the predator and
/// `gamma` scales the predator pressure in the prey diffusion `1 + gamma v`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    pub alpha1: f64,
    pub alpha2: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub gamma: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            alpha1: 1.0,
            alpha2: 1.0,
            beta1: 1.0,
            beta2: 1.0,
            gamma: 0.5,
        }
    }
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("alpha1", self.alpha1), ("beta1", self.beta1)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Invalid(format!("{name} must be positive and finite, got {v}")));
            }
        }
        // Cross terms may vanish: the decoupled limits are legitimate inputs.
        for (name, v) in [
            ("alpha2", self.alpha2),
            ("beta2", self.beta2),
            ("gamma", self.gamma),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Invalid(format!(
                    "{name} must be nonnegative and finite, got {v}"
                )));
            }
        }
        Ok(())
    }
}
