//! MZM array nulling. Every modulator after the first is driven with the
//! inverted pattern and tuned until its output cancels the reference, so
//! that the summed power has no AC component.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::photonics::{inverse_low_pass, low_pass, mzm_modulate, MzmModel};
use crate::seed;

/// Deviation of one modulator from the nominal model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MzmMismatch {
    pub bias_offset_v: f64,
    pub vpp_ratio: f64,
    pub delay_ps: f64,
}

impl Default for MzmMismatch {
    fn default() -> Self {
        Self {
            bias_offset_v: 0.0,
            vpp_ratio: 1.0,
            delay_ps: 0.0,
        }
    }
}

impl MzmMismatch {
    /// Uniform draw within `±fraction` of the nominal bias, swing, and one
    /// symbol period.
    pub fn random<R: Rng>(rng: &mut R, nominal: &MzmModel, symbol_ps: f64, fraction: f64) -> Self {
        let mut u = || rng.random_range(-fraction..=fraction);
        Self {
            bias_offset_v: u() * nominal.bias_voltage,
            vpp_ratio: 1.0 + u(),
            delay_ps: u() * symbol_ps,
        }
    }

    fn apply(&self, nominal: &MzmModel, correction: &MzmCorrection) -> MzmModel {
        MzmModel {
            bias_voltage: nominal.bias_voltage + self.bias_offset_v + correction.bias_v,
            v_pp: nominal.v_pp * self.vpp_ratio * correction.vpp_scale,
            delay_ps: nominal.delay_ps + self.delay_ps + correction.delay_ps,
            ..*nominal
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MzmCorrection {
    pub bias_v: f64,
    pub vpp_scale: f64,
    pub delay_ps: f64,
}

impl Default for MzmCorrection {
    fn default() -> Self {
        Self {
            bias_v: 0.0,
            vpp_scale: 1.0,
            delay_ps: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationSettings {
    pub baud_ghz: f64,
    pub samples_per_symbol: usize,
    pub symbols: usize,
    /// Target residual, relative to the reference signal RMS.
    pub tolerance: f64,
    pub max_sweeps: usize,
    pub seed: u64,
}

impl Default for CalibrationSettings {
    fn default() -> Self {
        Self {
            baud_ghz: 10.0,
            samples_per_symbol: 8,
            symbols: 128,
            tolerance: 1e-4,
            max_sweeps: 100,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    /// Index 0 is the reference and always carries the identity correction.
    pub corrections: Vec<MzmCorrection>,
    pub initial_residuals: Vec<f64>,
    pub residuals: Vec<f64>,
    pub sweeps: Vec<usize>,
}

impl CalibrationReport {
    pub fn worst_residual(&self) -> f64 {
        self.residuals.iter().copied().fold(0.0, f64::max)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

struct Pattern {
    drive_ref: Vec<f64>,
    /// Inverted data, `1 - x`.
    inverted: Vec<f64>,
    fs: f64,
}

impl Pattern {
    fn new(settings: &CalibrationSettings) -> Self {
        let mut rng = seed::rng(settings.seed);
        let sps = settings.samples_per_symbol;
        let held: Vec<f64> = (0..settings.symbols)
            .flat_map(|_| {
                let v: f64 = rng.random();
                std::iter::repeat_n(v, sps)
            })
            .collect();
        let fs = settings.baud_ghz * sps as f64;
        let data = low_pass(&held, settings.baud_ghz, fs);
        Self {
            inverted: data.iter().map(|x| 1.0 - x).collect(),
            drive_ref: data,
            fs,
        }
    }
}

fn ac_rms(v: &[f64]) -> f64 {
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / v.len() as f64).sqrt()
}

fn golden_section(lo: f64, hi: f64, iters: usize, mut f: impl FnMut(f64) -> f64) -> (f64, f64) {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..iters {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    if fc < fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Nulls each modulator against modulator 0. `mismatches[i]` is the
/// (unknown to the procedure) deviation of modulator `i`; the nominal model
/// should be sinusoidal and biased at quadrature.
pub fn calibrate_mzm_array(
    nominal: &MzmModel,
    mismatches: &[MzmMismatch],
    settings: &CalibrationSettings,
) -> Result<CalibrationReport> {
    nominal.validate()?;
    if mismatches.is_empty() {
        return Err(Error::param(
            "mismatches",
            "need at least the reference modulator",
        ));
    }
    if settings.samples_per_symbol == 0 || settings.symbols < 2 || !(settings.baud_ghz > 0.0) {
        return Err(Error::param(
            "settings",
            "need a positive baud and a non-trivial pattern",
        ));
    }

    let pattern = Pattern::new(settings);
    let symbol_ps = 1e3 / settings.baud_ghz;
    let reference_model = mismatches[0].apply(nominal, &MzmCorrection::default());
    let drive =
        |m: &MzmModel, data: &[f64]| -> Vec<f64> { data.iter().map(|&x| m.drive_for(x)).collect() };
    let p_ref = mzm_modulate(
        &reference_model,
        1.0,
        &drive(&reference_model, &pattern.drive_ref),
        pattern.fs,
    );
    let signal_rms = ac_rms(&p_ref);
    if signal_rms == 0.0 {
        return Err(Error::param(
            "pattern",
            "reference output has no AC component",
        ));
    }

    let residual = |mismatch: &MzmMismatch, c: &MzmCorrection| -> f64 {
        let model = mismatch.apply(nominal, c);
        let p = mzm_modulate(&model, 1.0, &drive(&model, &pattern.inverted), pattern.fs);
        let sum: Vec<f64> = p_ref.iter().zip(&p).map(|(a, b)| a + b).collect();
        ac_rms(&sum) / signal_rms
    };

    let mut report = CalibrationReport {
        corrections: vec![MzmCorrection::default()],
        initial_residuals: vec![0.0],
        residuals: vec![0.0],
        sweeps: vec![0],
    };
    const ITERS: usize = 48;
    for mismatch in &mismatches[1..] {
        let mut c = MzmCorrection::default();
        let mut r = residual(mismatch, &c);
        report.initial_residuals.push(r);
        let mut sweeps = 0;
        while r > settings.tolerance && sweeps < settings.max_sweeps {
            sweeps += 1;
            let before = r;
            let half = 0.5 * nominal.v_pi;
            let (v, _) = golden_section(-half, half, ITERS, |b| {
                residual(mismatch, &MzmCorrection { bias_v: b, ..c })
            });
            c.bias_v = v;
            let (v, _) = golden_section(0.5, 1.5, ITERS, |s| {
                residual(mismatch, &MzmCorrection { vpp_scale: s, ..c })
            });
            c.vpp_scale = v;
            let (v, rv) = golden_section(-0.5 * symbol_ps, 0.5 * symbol_ps, ITERS, |d| {
                residual(mismatch, &MzmCorrection { delay_ps: d, ..c })
            });
            c.delay_ps = v;
            r = rv;
            if before - r < 1e-3 * settings.tolerance {
                break;
            }
        }
        if r > settings.tolerance {
            return Err(Error::CalibrationFailed { residual: r });
        }
        report.corrections.push(c);
        report.residuals.push(r);
        report.sweeps.push(sweeps);
    }
    Ok(report)
}

/// Cap on the derivative boost of [`predistort`].
pub const MAX_PREDISTORTION_BOOST: f64 = 8.0;

/// Pre-emphasis that undoes a single-pole response with 3 dB cutoff
/// `cutoff_ghz`.
pub fn predistort(drive: &[f64], cutoff_ghz: f64, sample_rate_gsps: f64) -> Result<Vec<f64>> {
    if !(cutoff_ghz > 0.0) || !(sample_rate_gsps > 0.0) {
        return Err(Error::param(
            "cutoff",
            "cutoff and sample rate must be positive",
        ));
    }
    Ok(inverse_low_pass(
        drive,
        cutoff_ghz,
        sample_rate_gsps,
        MAX_PREDISTORTION_BOOST,
    ))
}
