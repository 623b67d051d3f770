use optocloud::convnet::{
    conv2d_via_opus, correlate2d_valid, decompose_conv2d, evaluate_classifier, load_mnist,
    recompose, standard_kernels, synthetic_blobs, train_toy_cnn, Kernel2d, ModelExecution, Split,
    TrainConfig,
};
use optocloud::opu::{noise_sigma, NoiseModel, Opu, OpuConfig};
use optocloud::runner::bundled_mnist_dir;
use optocloud::seed;
use rand::Rng;

fn brute_force_2d(img: &[f64], h: usize, w: usize, k: &[f64], ks: usize) -> Vec<f64> {
    let mut out = Vec::new();
    for y in 0..=h - ks {
        for x in 0..=w - ks {
            let mut acc = 0.0;
            for dy in 0..ks {
                for dx in 0..ks {
                    acc += k[dy * ks + dx] * img[(y + dy) * w + x + dx];
                }
            }
            out.push(acc);
        }
    }
    out
}

fn random(rng: &mut impl Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(lo..=hi)).collect()
}

#[test]
fn row_decomposition_recomposes_for_all_sizes() {
    let mut rng = seed::rng(21);
    for ks in [1usize, 2, 3, 5] {
        let k = Kernel2d::new(ks, random(&mut rng, ks * ks, -1.0, 1.0)).unwrap();
        let tasks = decompose_conv2d(&k);
        assert_eq!(tasks.len(), ks);
        for (r, t) in tasks.iter().enumerate() {
            assert_eq!((t.source_row_offset, t.assigned_opu), (r, r));
            assert_eq!(t.row_kernel.weights(), k.row(r));
        }
        let img = random(&mut rng, 11 * 13, 0.0, 1.0);
        let got = recompose(&tasks, &img, 11, 13, |t, _, row| {
            let kw = t.row_kernel.weights();
            Ok((0..=row.len() - kw.len())
                .map(|i| kw.iter().enumerate().map(|(d, w)| w * row[i + d]).sum())
                .collect())
        })
        .unwrap();
        let want = brute_force_2d(&img, 11, 13, k.weights(), ks);
        assert_eq!(got.len(), want.len());
        for (a, b) in got.iter().zip(&want) {
            assert!((a - b).abs() < 1e-9);
        }
    }
}

#[test]
fn three_opu_ideal_convolution_matches_oracle() {
    let opus: Vec<Opu> = (0..3)
        .map(|_| Opu::new(OpuConfig::new(8)).unwrap())
        .collect();
    let mut rng = seed::rng(22);
    for case in 0..50 {
        let k = Kernel2d::new(3, random(&mut rng, 9, -2.0, 2.0)).unwrap();
        let img = random(&mut rng, 256, 0.0, 1.0);
        let got = conv2d_via_opus(&opus, &img, 16, 16, &k, case).unwrap();
        let want = brute_force_2d(&img, 16, 16, k.weights(), 3);
        let err = got
            .iter()
            .zip(&want)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-9, "case {case}: {err}");
    }
}

#[test]
fn fixture_kernels_stay_within_three_sigma() {
    let test = load_mnist(&bundled_mnist_dir(), Split::Test).unwrap();
    let img = test.images[0].as_map();
    let opus: Vec<Opu> = (0..3)
        .map(|_| Opu::new(OpuConfig::new(8).noisy(10.0)).unwrap())
        .collect();
    let sigma = noise_sigma(&NoiseModel::default(), 10.0);
    let kernels = standard_kernels();
    assert_eq!(kernels.len(), 10);
    for (i, nk) in kernels.iter().enumerate() {
        let want = correlate2d_valid(img.data(), 28, 28, &nk.weights).unwrap();
        let got = conv2d_via_opus(&opus, img.data(), 28, 28, &nk.weights, i as u64).unwrap();
        let rmse = (got
            .iter()
            .zip(&want)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            / want.len() as f64)
            .sqrt();
        let normalized = rmse / nk.weights.abs_sum();
        assert!(
            normalized <= 3.0 * sigma,
            "{}: {normalized} > {}",
            nk.name,
            3.0 * sigma
        );
        assert!(normalized > 0.0);
    }
}

#[test]
fn bundled_mnist_subset_loads() {
    let train = load_mnist(&bundled_mnist_dir(), Split::Train).unwrap();
    let test = load_mnist(&bundled_mnist_dir(), Split::Test).unwrap();
    assert_eq!((train.len(), test.len()), (5000, 1000));
    assert_eq!(train.images[0].height(), 28);
    assert!(test.class_counts().iter().all(|&c| c > 50));
}

#[test]
fn classification_properties_on_blobs() {
    let train = synthetic_blobs(200, 12, 1).unwrap();
    let test = synthetic_blobs(100, 12, 2).unwrap();
    let model = train_toy_cnn(
        &train,
        &TrainConfig {
            epochs: 2,
            ..TrainConfig::default()
        },
    )
    .unwrap();
    let float = evaluate_classifier(&model, &test, ModelExecution::Float).unwrap();
    let rows: Vec<usize> = float.confusion.iter().map(|r| r.iter().sum()).collect();
    assert_eq!(rows, test.class_counts());
    let fine =
        evaluate_classifier(&model, &test, ModelExecution::Bits { bits: 24, seed: 0 }).unwrap();
    assert_eq!(fine.accuracy, float.accuracy);
    let coarse =
        evaluate_classifier(&model, &test, ModelExecution::Bits { bits: 1, seed: 0 }).unwrap();
    assert!(coarse.accuracy <= float.accuracy);
}
