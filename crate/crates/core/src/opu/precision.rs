use rand::Rng;
use serde::{Deserialize, Serialize};

use super::noise::measure_enob;
use super::unit::{ElementaryOp, Opu, OpuConfig};
use crate::error::{Error, Result};
use crate::seed;

/// Taps of the MAC test vector.
pub const MAC_TAPS: usize = 3;

/// Operands and exact result of one elementary-op trial.
#[derive(Debug, Clone, PartialEq)]
pub struct OpTrial {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub ideal: f64,
    pub measured: f64,
}

fn level(rng: &mut impl Rng) -> f64 {
    rng.random_range(0..8) as f64 / 7.0
}

/// Draws operands for `op`: 8-level values in [0, 1] for the scalar ops;
/// for MAC, 8-level inputs against uniform weights in [-1, 1].
pub fn draw_operands(op: ElementaryOp, rng: &mut impl Rng) -> (Vec<f64>, Vec<f64>) {
    match op {
        ElementaryOp::Mac => (
            (0..MAC_TAPS).map(|_| level(rng)).collect(),
            (0..MAC_TAPS)
                .map(|_| rng.random_range(-1.0..=1.0))
                .collect(),
        ),
        _ => (vec![level(rng)], vec![level(rng)]),
    }
}

/// Runs `trials` random instances of `op`; trial `t` uses noise stream `t`.
pub fn op_trials(opu: &Opu, op: ElementaryOp, trials: usize, seed: u64) -> Result<Vec<OpTrial>> {
    let mut rng = seed::rng(seed);
    (0..trials)
        .map(|t| {
            let (a, b) = draw_operands(op, &mut rng);
            let (x, kernel, fs) = op.lower(&a, &b)?;
            let loaded = opu.load(&kernel)?.with_full_scale(fs);
            let measured = loaded.run(&x, seed::derive(seed, &[t as u64]))?[0];
            Ok(OpTrial {
                ideal: op.reference(&a, &b),
                measured,
                a,
                b,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OpPrecision {
    pub op: ElementaryOp,
    pub baud_ghz: f64,
    pub trials: usize,
    /// RMS error as a fraction of the full scale.
    pub relative_rms: f64,
    pub enob: f64,
}

/// ENOB of `op` on an OPU built from `config`. Errors are taken relative
/// to each trial's full scale.
pub fn op_precision(
    config: &OpuConfig,
    op: ElementaryOp,
    trials: usize,
    seed: u64,
) -> Result<OpPrecision> {
    if trials < 2 {
        return Err(Error::param("trials", "need at least two"));
    }
    let opu = Opu::new(config.clone())?;
    let rel: Vec<f64> = op_trials(&opu, op, trials, seed)?
        .into_iter()
        .map(|t| {
            let fs = op.lower(&t.a, &t.b).map(|l| l.2).unwrap_or(1.0);
            (t.measured - t.ideal) / fs
        })
        .collect();
    let relative_rms = (rel.iter().map(|e| e * e).sum::<f64>() / rel.len() as f64).sqrt();
    Ok(OpPrecision {
        op,
        baud_ghz: config.baud_ghz,
        trials,
        relative_rms,
        enob: measure_enob(&rel, 1.0)?,
    })
}
