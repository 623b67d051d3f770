//! Convolves a signal with a signed kernel on one OPU, ideal and noisy,
//! and prints the wavelength plan used to carry the weights.

use optocloud::opu::{normalize_kernel, Kernel, Opu, OpuConfig};

fn main() -> optocloud::Result<()> {
    let x = [0.2, 0.9, 0.4, 0.1, 0.7, 0.5, 0.3, 0.8];
    let (kernel, scale) = normalize_kernel(&Kernel::new(vec![1.5, -3.0, 0.75])?)?;

    let ideal = Opu::new(OpuConfig::new(8))?;
    let noisy = Opu::new(OpuConfig::new(8).noisy(10.0))?;
    let loaded = ideal.load(&kernel)?;
    let plan = loaded.plan();
    println!(
        "positive teeth {:?}, negative teeth {:?}",
        plan.positive_teeth, plan.negative_teeth
    );
    println!("signal teeth {:?}", plan.signal_teeth);

    let a = ideal.convolve(&kernel, &x, 0)?;
    let b = noisy.convolve(&kernel, &x, 1)?;
    println!("port   ideal    noisy");
    for (q, (u, v)) in a.iter().zip(&b).enumerate() {
        println!("{q:>4} {:>8.4} {:>8.4}", u * scale, v * scale);
    }
    Ok(())
}
