//! Nulls a mismatched array of eight modulators against the first one.

use optocloud::opu::{calibrate_mzm_array, CalibrationSettings, MzmMismatch};
use optocloud::photonics::{MzmModel, TransferMode};
use optocloud::seed;

fn main() -> optocloud::Result<()> {
    let nominal = MzmModel::quadrature(3.0, TransferMode::Sinusoidal);
    let settings = CalibrationSettings::default();
    let mut rng = seed::rng(3);
    let mismatches: Vec<MzmMismatch> = (0..8)
        .map(|i| {
            if i == 0 {
                MzmMismatch::default()
            } else {
                MzmMismatch::random(&mut rng, &nominal, 100.0, 0.1)
            }
        })
        .collect();
    let report = calibrate_mzm_array(&nominal, &mismatches, &settings)?;
    println!("mzm  residual before  after   sweeps");
    for i in 1..mismatches.len() {
        println!(
            "{i:>3}  {:>15.4}  {:.1e}  {}",
            report.initial_residuals[i], report.residuals[i], report.sweeps[i]
        );
    }
    println!("worst residual {:.2e}", report.worst_residual());
    Ok(())
}
