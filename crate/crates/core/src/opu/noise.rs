use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Baud-dependent output noise. `sigma` is an RMS error expressed as a
/// fraction of the output full scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseModel {
    pub sigma_ref: f64,
    pub reference_baud_ghz: f64,
    pub alpha: f64,
    #[serde(default)]
    pub seed: u64,
}

impl Default for NoiseModel {
    /// Roughly 7 bits at 10 GBd falling by 1.5 bits at 50 GBd. The reference
    /// sigma is 0.0984 on a 0..14 output range.
    fn default() -> Self {
        Self {
            sigma_ref: 0.0984 / 14.0,
            reference_baud_ghz: 10.0,
            alpha: 1.5 * std::f64::consts::LN_2 / 5f64.ln(),
            seed: 0,
        }
    }
}

impl NoiseModel {
    /// Fits the power law through two `(enob, baud)` points.
    pub fn from_enob_anchors(
        enob_ref: f64,
        baud_ref_ghz: f64,
        enob_hi: f64,
        baud_hi_ghz: f64,
    ) -> Result<Self> {
        if !(baud_ref_ghz > 0.0 && baud_hi_ghz > 0.0) || baud_ref_ghz == baud_hi_ghz {
            return Err(Error::param(
                "baud",
                "anchors need two distinct positive baud rates",
            ));
        }
        let alpha =
            (enob_ref - enob_hi) * std::f64::consts::LN_2 / (baud_hi_ghz / baud_ref_ghz).ln();
        Ok(Self {
            sigma_ref: 2f64.powf(-enob_ref),
            reference_baud_ghz: baud_ref_ghz,
            alpha,
            seed: 0,
        })
    }

    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_ref >= 0.0) || !self.sigma_ref.is_finite() {
            return Err(Error::param("sigma_ref", "must be finite and nonnegative"));
        }
        if !(self.reference_baud_ghz > 0.0) {
            return Err(Error::param("reference_baud", "must be positive"));
        }
        if !self.alpha.is_finite() {
            return Err(Error::param("alpha", "must be finite"));
        }
        Ok(())
    }
}

pub fn noise_sigma(model: &NoiseModel, baud_ghz: f64) -> f64 {
    model.sigma_ref * (baud_ghz / model.reference_baud_ghz).powf(model.alpha)
}

/// `log2(full_scale / rms(errors))`; `+inf` when every error is zero.
pub fn measure_enob(errors: &[f64], full_scale: f64) -> Result<f64> {
    if errors.len() < 2 {
        return Err(Error::param("errors", "need at least two samples"));
    }
    if !(full_scale > 0.0) {
        return Err(Error::param("full_scale", "must be positive"));
    }
    let rms = (errors.iter().map(|e| e * e).sum::<f64>() / errors.len() as f64).sqrt();
    if rms == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok((full_scale / rms).log2())
}

/// Uniform mid-rise quantizer over `[lo, hi]`, clamping outside.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quantizer {
    pub bits: u32,
    pub lo: f64,
    pub hi: f64,
}

impl Quantizer {
    pub fn new(bits: u32, lo: f64, hi: f64) -> Result<Self> {
        if !(1..=30).contains(&bits) {
            return Err(Error::param("bits", "must be in 1..=30"));
        }
        if !(hi > lo) {
            return Err(Error::param("range", "hi must exceed lo"));
        }
        Ok(Self { bits, lo, hi })
    }

    pub fn levels(&self) -> u64 {
        1u64 << self.bits
    }

    pub fn step(&self) -> f64 {
        (self.hi - self.lo) / self.levels() as f64
    }

    pub fn quantize(&self, v: f64) -> f64 {
        let step = self.step();
        let code = ((v - self.lo) / step)
            .floor()
            .clamp(0.0, (self.levels() - 1) as f64);
        self.lo + (code + 0.5) * step
    }
}
