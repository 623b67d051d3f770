use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::comb::db_to_linear;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransferMode {
    /// `T = clamp((v + bias) / v_pi, 0, 1)`: a linearized modulator.
    Linear,
    /// `T = sin²(π (v + bias) / (2 v_pi))`.
    Sinusoidal,
}

/// Mach-Zehnder intensity modulator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MzmModel {
    pub v_pi: f64,
    pub bias_voltage: f64,
    /// Peak-to-peak drive swing used to map data in [0, 1] onto volts.
    pub v_pp: f64,
    /// 3 dB bandwidth of the drive path; infinite disables filtering.
    pub bandwidth_ghz: f64,
    pub delay_ps: f64,
    pub insertion_loss_db: f64,
    pub transfer_mode: TransferMode,
}

impl Default for MzmModel {
    /// Linearized modulator at quadrature with full-swing drive.
    fn default() -> Self {
        Self {
            v_pi: 3.0,
            bias_voltage: 1.5,
            v_pp: 3.0,
            bandwidth_ghz: f64::INFINITY,
            delay_ps: 0.0,
            insertion_loss_db: 0.0,
            transfer_mode: TransferMode::Linear,
        }
    }
}

impl MzmModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.v_pi > 0.0) {
            return Err(Error::param("v_pi", "must be positive"));
        }
        if !(self.bandwidth_ghz > 0.0) {
            return Err(Error::param("bandwidth", "must be positive"));
        }
        if !(self.insertion_loss_db >= 0.0) {
            return Err(Error::param("insertion_loss", "must be nonnegative"));
        }
        if !self.delay_ps.is_finite() || !self.bias_voltage.is_finite() || !self.v_pp.is_finite() {
            return Err(Error::param("mzm", "bias, v_pp and delay must be finite"));
        }
        Ok(())
    }

    /// Quadrature bias for the configured `v_pi`.
    pub fn quadrature(v_pi: f64, transfer_mode: TransferMode) -> Self {
        Self {
            v_pi,
            bias_voltage: v_pi / 2.0,
            v_pp: v_pi,
            transfer_mode,
            ..Self::default()
        }
    }

    /// Intensity transmission at drive voltage `v`, excluding insertion loss.
    pub fn transmission(&self, v: f64) -> f64 {
        let total = v + self.bias_voltage;
        match self.transfer_mode {
            TransferMode::Linear => (total / self.v_pi).clamp(0.0, 1.0),
            TransferMode::Sinusoidal => (PI * total / (2.0 * self.v_pi)).sin().powi(2),
        }
    }

    /// Drive voltage for a data value in [0, 1], centered on the bias point.
    pub fn drive_for(&self, x: f64) -> f64 {
        (x - 0.5) * self.v_pp
    }

    pub fn loss_factor(&self) -> f64 {
        db_to_linear(-self.insertion_loss_db)
    }
}

/// Modulates a CW input with a sampled drive waveform. The drive is delayed,
/// low-pass filtered by the modulator bandwidth, then mapped through the
/// transfer curve.
pub fn mzm_modulate(
    model: &MzmModel,
    input_power_mw: f64,
    drive: &[f64],
    sample_rate_gsps: f64,
) -> Vec<f64> {
    debug_assert!(input_power_mw >= 0.0);
    let delayed = fractional_delay(drive, model.delay_ps * 1e-3 * sample_rate_gsps);
    let filtered = low_pass(&delayed, model.bandwidth_ghz, sample_rate_gsps);
    let scale = input_power_mw * model.loss_factor();
    filtered
        .iter()
        .map(|&v| scale * model.transmission(v))
        .collect()
}

fn pole(cutoff_ghz: f64, sample_rate_gsps: f64) -> f64 {
    1.0 - (-2.0 * PI * cutoff_ghz / sample_rate_gsps).exp()
}

/// Single-pole low-pass, `y[n] = y[n-1] + a (x[n] - y[n-1])`, started in
/// steady state at `x[0]`.
pub fn low_pass(samples: &[f64], cutoff_ghz: f64, sample_rate_gsps: f64) -> Vec<f64> {
    if cutoff_ghz.is_infinite() || samples.is_empty() {
        return samples.to_vec();
    }
    let a = pole(cutoff_ghz, sample_rate_gsps);
    let mut y = samples[0];
    samples
        .iter()
        .map(|&x| {
            y += a * (x - y);
            y
        })
        .collect()
}

/// Inverts [`low_pass`]. The derivative boost is capped at `max_boost` so
/// the high-frequency gain stays bounded for very low cutoffs.
pub fn inverse_low_pass(
    samples: &[f64],
    cutoff_ghz: f64,
    sample_rate_gsps: f64,
    max_boost: f64,
) -> Vec<f64> {
    if cutoff_ghz.is_infinite() || samples.is_empty() {
        return samples.to_vec();
    }
    let a = pole(cutoff_ghz, sample_rate_gsps);
    let boost = ((1.0 - a) / a).min(max_boost);
    let mut prev = samples[0];
    samples
        .iter()
        .map(|&y| {
            let x = y + boost * (y - prev);
            prev = y;
            x
        })
        .collect()
}

/// Shifts a waveform later by `delay` samples (fractional, linear
/// interpolation); edges hold the first/last sample.
pub fn fractional_delay(samples: &[f64], delay: f64) -> Vec<f64> {
    if delay == 0.0 || samples.is_empty() {
        return samples.to_vec();
    }
    let last = samples.len() - 1;
    (0..samples.len())
        .map(|n| {
            let t = n as f64 - delay;
            if t <= 0.0 {
                samples[0]
            } else if t >= last as f64 {
                samples[last]
            } else {
                let i = t.floor() as usize;
                let frac = t - i as f64;
                samples[i] * (1.0 - frac) + samples[i + 1] * frac
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sinusoidal() -> MzmModel {
        MzmModel {
            bias_voltage: 0.0,
            ..MzmModel::quadrature(4.0, TransferMode::Sinusoidal)
        }
    }

    #[test]
    fn sinusoidal_peak_and_quadrature() {
        let m = sinusoidal();
        let out = mzm_modulate(&m, 2.0, &[4.0, 2.0, 0.0], 80.0);
        assert!((out[0] - 2.0).abs() < 1e-12);
        assert!((out[1] - 1.0).abs() < 1e-12);
        assert!(out[2].abs() < 1e-12);
    }

    #[test]
    fn linear_mode_quarter_drive() {
        let m = MzmModel {
            bias_voltage: 0.0,
            ..MzmModel::quadrature(2.0, TransferMode::Linear)
        };
        let out = mzm_modulate(&m, 4.0, &[0.5, -1.0, 9.0], 80.0);
        assert_eq!(out, vec![1.0, 0.0, 4.0]);
    }

    #[test]
    fn default_linear_drive_maps_data_to_transmission() {
        let m = MzmModel::default();
        for x in [0.0, 0.25, 0.6, 1.0] {
            assert!((m.transmission(m.drive_for(x)) - x).abs() < 1e-12);
        }
    }

    #[test]
    fn insertion_loss_scales_output() {
        let m = MzmModel {
            insertion_loss_db: 10.0,
            ..MzmModel::default()
        };
        let out = mzm_modulate(&m, 1.0, &[m.drive_for(1.0)], 10.0);
        assert!((out[0] - 0.1).abs() < 1e-12);
    }

    #[test]
    fn transmission_bounded_for_any_voltage() {
        let m = sinusoidal();
        for i in -200..200 {
            let t = m.transmission(i as f64 * 0.173);
            assert!((0.0..=1.0).contains(&t));
        }
    }

    #[test]
    fn quadrature_slope_matches_analytic_derivative() {
        // d/dv sin²(π v / (2 v_pi)) at v = v_pi / 2 is π / (2 v_pi).
        let m = sinusoidal();
        let v0 = m.v_pi / 2.0;
        let h = 1e-5;
        let slope = (m.transmission(v0 + h) - m.transmission(v0 - h)) / (2.0 * h);
        assert!((slope - PI / (2.0 * m.v_pi)).abs() < 1e-6);
    }

    #[test]
    fn low_pass_and_inverse_round_trip() {
        let x: Vec<f64> = (0..64).map(|i| ((i * 7919) % 13) as f64 / 13.0).collect();
        let y = low_pass(&x, 10.0, 80.0);
        let back = inverse_low_pass(&y, 10.0, 80.0, 1e9);
        for (a, b) in x.iter().zip(&back) {
            assert!((a - b).abs() < 1e-9);
        }
        assert_eq!(low_pass(&x, f64::INFINITY, 80.0), x);
    }

    #[test]
    fn delay_shifts_later() {
        let x = [0.0, 1.0, 2.0, 3.0, 4.0];
        assert_eq!(fractional_delay(&x, 1.0), vec![0.0, 0.0, 1.0, 2.0, 3.0]);
        assert_eq!(fractional_delay(&x, 0.5), vec![0.0, 0.5, 1.5, 2.5, 3.5]);
        assert_eq!(fractional_delay(&x, -1.0), vec![1.0, 2.0, 3.0, 4.0, 4.0]);
    }

    #[test]
    fn validation() {
        assert!(MzmModel {
            v_pi: 0.0,
            ..MzmModel::default()
        }
        .validate()
        .is_err());
        assert!(MzmModel::default().validate().is_ok());
    }
}
