//! Trains the toy CNN on the bundled MNIST subset, then evaluates it in
//! float, at several injected precisions, and with the first layer on an
//! OPU pool.
//!
//!     cargo run --release --example mnist_toy_cnn

use std::path::Path;
use std::time::Instant;

use optocloud::convnet::{
    evaluate_classifier, load_mnist, train_toy_cnn, ModelExecution, Split, TrainConfig,
};
use optocloud::opu::{Opu, OpuConfig};

fn main() -> optocloud::Result<()> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/mnist");
    let train = load_mnist(&dir, Split::Train)?;
    let test = load_mnist(&dir, Split::Test)?;
    println!("train {} / test {} images", train.len(), test.len());

    let t = Instant::now();
    let model = train_toy_cnn(&train, &TrainConfig::default())?;
    println!("trained in {:.1?}", t.elapsed());

    let float = evaluate_classifier(&model, &test, ModelExecution::Float)?;
    println!("float      {:.2}%", 100.0 * float.accuracy);
    for bits in 2..=8 {
        let mean: f64 = (0..5)
            .map(|seed| {
                evaluate_classifier(&model, &test, ModelExecution::Bits { bits, seed })
                    .map(|e| e.accuracy)
            })
            .sum::<optocloud::Result<f64>>()?
            / 5.0;
        println!("{bits} bits     {:.2}%", 100.0 * mean);
    }

    let opus: Vec<Opu> = (0..3)
        .map(|_| Opu::new(OpuConfig::new(8).noisy(10.0)))
        .collect::<optocloud::Result<_>>()?;
    let t = Instant::now();
    let optical = evaluate_classifier(
        &model,
        &test.take(200),
        ModelExecution::Opu {
            opus: &opus,
            seed: 0,
        },
    )?;
    println!(
        "opu 10 GBd {:.2}% on 200 images ({:.1?})",
        100.0 * optical.accuracy,
        t.elapsed()
    );

    println!("confusion (float):");
    for row in &float.confusion {
        println!(
            "  {}",
            row.iter().map(|c| format!("{c:4}")).collect::<String>()
        );
    }
    Ok(())
}
