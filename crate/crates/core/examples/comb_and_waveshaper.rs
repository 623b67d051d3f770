//! Builds the 84 GHz comb from a 21 GHz source, flattens it with a
//! waveshaper and splits signal from weight teeth with a microring.

use optocloud::photonics::{
    apply_waveshaper, decimate_comb, equalize_comb, generate_comb, linear_to_db, microring_split,
    write_spectrum_csv,
};

fn main() -> optocloud::Result<()> {
    let fine = generate_comb(64, 21.0, 193.4, 0.3)?;
    let comb = decimate_comb(&fine, 4)?;
    let flat = apply_waveshaper(&comb, &equalize_comb(&comb)?)?;
    let p = flat.powers();
    println!(
        "{} teeth at {} GHz, ripple before {:.2} dB, after {:.2} dB",
        comb.len(),
        comb.grid().spacing_ghz,
        ripple(comb.powers()),
        ripple(p)
    );

    let even: Vec<usize> = (0..flat.len()).step_by(2).collect();
    let (dropped, through) = microring_split(&flat, &even)?;
    println!(
        "microring drops {:.3} mW, passes {:.3} mW of {:.3} mW",
        dropped.total_power(),
        through.total_power(),
        flat.total_power()
    );
    write_spectrum_csv(&flat, std::io::stdout())
}

fn ripple(p: &[f64]) -> f64 {
    let lit: Vec<f64> = p.iter().copied().filter(|&v| v > 0.0).collect();
    let max = lit.iter().copied().fold(f64::MIN, f64::max);
    let min = lit.iter().copied().fold(f64::MAX, f64::min);
    linear_to_db(max / min)
}
