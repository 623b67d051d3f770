//! Runs the ten standard 3x3 image kernels over an MNIST digit on three
//! noisy OPUs, one per kernel row.

use optocloud::convnet::{conv2d_via_opus, correlate2d_valid, load_mnist, standard_kernels, Split};
use optocloud::opu::{Opu, OpuConfig};
use optocloud::runner::bundled_mnist_dir;

fn main() -> optocloud::Result<()> {
    let test = load_mnist(&bundled_mnist_dir(), Split::Test)?;
    let img = test.images[0].as_map();
    let opus: Vec<Opu> = (0..3)
        .map(|_| Opu::new(OpuConfig::new(8).noisy(10.0)))
        .collect::<optocloud::Result<_>>()?;
    println!("{:<16} {:>10}", "kernel", "rmse/sum|k|");
    for (i, k) in standard_kernels().iter().enumerate() {
        let want = correlate2d_valid(img.data(), 28, 28, &k.weights)?;
        let got = conv2d_via_opus(&opus, img.data(), 28, 28, &k.weights, i as u64)?;
        let mse = got
            .iter()
            .zip(&want)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            / want.len() as f64;
        println!("{:<16} {:>10.4}", k.name, mse.sqrt() / k.weights.abs_sum());
    }
    Ok(())
}
