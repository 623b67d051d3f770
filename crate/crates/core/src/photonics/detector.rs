use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhotodetectorModel {
    pub responsivity_a_per_w: f64,
    pub bias_voltage: f64,
    /// Additive Gaussian current noise, RMS amperes.
    #[serde(default)]
    pub noise_sigma_a: f64,
}

impl Default for PhotodetectorModel {
    fn default() -> Self {
        Self {
            responsivity_a_per_w: 0.65,
            bias_voltage: 2.0,
            noise_sigma_a: 0.0,
        }
    }
}

impl PhotodetectorModel {
    pub fn validate(&self) -> crate::Result<()> {
        if !(self.responsivity_a_per_w > 0.0) {
            return Err(crate::Error::param("responsivity", "must be positive"));
        }
        if !(self.noise_sigma_a >= 0.0) {
            return Err(crate::Error::param("noise_sigma", "must be nonnegative"));
        }
        Ok(())
    }

    /// Noiseless photocurrent in mA for an optical power in mW.
    pub fn photocurrent_ma(&self, power_mw: f64) -> f64 {
        self.responsivity_a_per_w * power_mw
    }

    pub fn with_extra_noise(&self, sigma_a: f64) -> Self {
        Self {
            noise_sigma_a: self.noise_sigma_a.hypot(sigma_a),
            ..*self
        }
    }
}

/// Balanced detection: `R (plus - minus)` in mA plus seeded Gaussian noise.
pub fn balanced_detect(pd: &PhotodetectorModel, plus_mw: f64, minus_mw: f64, seed: u64) -> f64 {
    let clean = pd.photocurrent_ma(plus_mw - minus_mw);
    if pd.noise_sigma_a == 0.0 {
        return clean;
    }
    let z: f64 = seed::rng(seed).sample(StandardNormal);
    clean + pd.noise_sigma_a * 1e3 * z
}
