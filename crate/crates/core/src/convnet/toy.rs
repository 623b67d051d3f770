//! Small classifier: 3×3 conv with 8 channels, ReLU, 2×2 average pool, and
//! a dense layer written as a convolution whose kernel covers the whole
//! pooled map.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dataset::Dataset;
use super::layer::{layer_forward, Activation, Execution, LayerSpec};
use super::tensor::{FeatureMap, Kernel2d};
use crate::error::{Error, Result};
use crate::opu::Opu;
use crate::seed;

pub const CONV_CHANNELS: usize = 8;
pub const CONV_SIZE: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyCnn {
    pub input_size: usize,
    pub classes: usize,
    pub conv: LayerSpec,
    pub classifier: LayerSpec,
}

/// Execution of a whole model.
#[derive(Debug, Clone, Copy)]
pub enum ModelExecution<'a> {
    Float,
    /// Every layer in float with noise injected at `bits`.
    Bits {
        bits: u32,
        seed: u64,
    },
    /// First layer on the OPU pool, the classifier in float.
    Opu {
        opus: &'a [Opu],
        seed: u64,
    },
}

impl ToyCnn {
    fn pooled(input_size: usize) -> usize {
        (input_size - CONV_SIZE).div_ceil(2)
    }

    /// He-initialized weights, zero biases.
    pub fn init(input_size: usize, classes: usize, seed: u64) -> Result<Self> {
        if input_size < CONV_SIZE + 1 {
            return Err(Error::param(
                "input_size",
                "too small for a 3x3 conv and 2x2 pool",
            ));
        }
        if classes < 2 {
            return Err(Error::param("classes", "need at least two"));
        }
        let mut rng = seed::rng(seed);
        let mut normal = |n: usize, std: f64| -> Vec<f64> {
            (0..n)
                .map(|_| std * rng.sample::<f64, _>(StandardNormal))
                .collect()
        };
        let p = Self::pooled(input_size);
        let conv_kernels = (0..CONV_CHANNELS)
            .map(|_| {
                Kernel2d::new(
                    CONV_SIZE,
                    normal(CONV_SIZE * CONV_SIZE, (2.0 / 9.0f64).sqrt()),
                )
            })
            .collect::<Result<Vec<_>>>()?;
        let fan_in = (CONV_CHANNELS * p * p) as f64;
        let dense = (0..classes * CONV_CHANNELS)
            .map(|_| Kernel2d::new(p, normal(p * p, (2.0 / fan_in).sqrt())))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            input_size,
            classes,
            conv: LayerSpec::new(
                CONV_CHANNELS,
                1,
                conv_kernels,
                vec![0.0; CONV_CHANNELS],
                Activation::Relu,
            )?,
            classifier: LayerSpec::new(
                classes,
                CONV_CHANNELS,
                dense,
                vec![0.0; classes],
                Activation::None,
            )?,
        })
    }

    pub fn first_layer(&self, image: &FeatureMap, execution: Execution<'_>) -> Result<FeatureMap> {
        layer_forward(&self.conv, image, execution)
    }

    /// Class scores for one image. `index` keys the per-image noise.
    pub fn logits(
        &self,
        image: &FeatureMap,
        execution: ModelExecution<'_>,
        index: u64,
    ) -> Result<Vec<f64>> {
        let (first, second) = match execution {
            ModelExecution::Float => (Execution::Float, Execution::Float),
            ModelExecution::Bits { bits, seed } => (
                Execution::Noise {
                    bits,
                    seed: seed::derive(seed, &[index, 0]),
                },
                Execution::Noise {
                    bits,
                    seed: seed::derive(seed, &[index, 1]),
                },
            ),
            ModelExecution::Opu { opus, seed } => (
                Execution::Opu {
                    opus,
                    stream: seed::derive(seed, &[index]),
                },
                Execution::Float,
            ),
        };
        let hidden = self.first_layer(image, first)?.avg_pool2()?;
        Ok(layer_forward(&self.classifier, &hidden, second)?.into_data())
    }

    pub fn predict(
        &self,
        image: &FeatureMap,
        execution: ModelExecution<'_>,
        index: u64,
    ) -> Result<usize> {
        Ok(argmax(&self.logits(image, execution, index)?))
    }
}

fn argmax(v: &[f64]) -> usize {
    v.iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &x)| {
            if x > bv {
                (i, x)
            } else {
                (bi, bv)
            }
        })
        .0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 12,
            learning_rate: 0.05,
            batch_size: 16,
            seed: 1,
        }
    }
}

/// Flat parameter view used by the training loop.
struct Params {
    k1: Vec<f64>,
    b1: Vec<f64>,
    w2: Vec<f64>,
    b2: Vec<f64>,
}

impl Params {
    fn from_model(m: &ToyCnn) -> Self {
        Self {
            k1: m
                .conv
                .kernels
                .iter()
                .flat_map(|k| k.weights().to_vec())
                .collect(),
            b1: m.conv.bias.clone(),
            w2: m
                .classifier
                .kernels
                .iter()
                .flat_map(|k| k.weights().to_vec())
                .collect(),
            b2: m.classifier.bias.clone(),
        }
    }

    fn zeros_like(&self) -> Self {
        Self {
            k1: vec![0.0; self.k1.len()],
            b1: vec![0.0; self.b1.len()],
            w2: vec![0.0; self.w2.len()],
            b2: vec![0.0; self.b2.len()],
        }
    }

    fn write_back(&self, m: &mut ToyCnn) -> Result<()> {
        let kk = CONV_SIZE * CONV_SIZE;
        for (c, k) in m.conv.kernels.iter_mut().enumerate() {
            *k = Kernel2d::new(CONV_SIZE, self.k1[c * kk..(c + 1) * kk].to_vec())?;
        }
        m.conv.bias.copy_from_slice(&self.b1);
        let p = ToyCnn::pooled(m.input_size);
        for (i, k) in m.classifier.kernels.iter_mut().enumerate() {
            *k = Kernel2d::new(p, self.w2[i * p * p..(i + 1) * p * p].to_vec())?;
        }
        m.classifier.bias.copy_from_slice(&self.b2);
        Ok(())
    }
}

/// Accumulates the cross-entropy gradient of one sample into `g`; returns
/// whether the sample was classified correctly.
fn backprop(
    params: &Params,
    g: &mut Params,
    x: &[f64],
    n: usize,
    classes: usize,
    label: usize,
) -> bool {
    let c_n = CONV_CHANNELS;
    let h1 = n - CONV_SIZE + 1;
    let p = h1 / 2;
    let mut z1 = vec![0.0; c_n * h1 * h1];
    for c in 0..c_n {
        let k = &params.k1[c * 9..c * 9 + 9];
        for i in 0..h1 {
            for j in 0..h1 {
                let mut acc = params.b1[c];
                for a in 0..3 {
                    let row = &x[(i + a) * n + j..(i + a) * n + j + 3];
                    acc += k[a * 3] * row[0] + k[a * 3 + 1] * row[1] + k[a * 3 + 2] * row[2];
                }
                z1[(c * h1 + i) * h1 + j] = acc;
            }
        }
    }
    let mut pooled = vec![0.0; c_n * p * p];
    for c in 0..c_n {
        for u in 0..p {
            for v in 0..p {
                let mut s = 0.0;
                for (di, dj) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
                    s += z1[(c * h1 + 2 * u + di) * h1 + 2 * v + dj].max(0.0);
                }
                pooled[(c * p + u) * p + v] = s / 4.0;
            }
        }
    }
    let feat = pooled.len();
    let mut logits: Vec<f64> = (0..classes)
        .map(|o| {
            params.b2[o]
                + params.w2[o * feat..(o + 1) * feat]
                    .iter()
                    .zip(&pooled)
                    .map(|(w, a)| w * a)
                    .sum::<f64>()
        })
        .collect();
    let correct = argmax(&logits) == label;
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for l in logits.iter_mut() {
        *l = (*l - max).exp();
        total += *l;
    }
    let dlogits: Vec<f64> = logits
        .iter()
        .enumerate()
        .map(|(o, e)| e / total - if o == label { 1.0 } else { 0.0 })
        .collect();

    let mut dpooled = vec![0.0; feat];
    for (o, &d) in dlogits.iter().enumerate() {
        g.b2[o] += d;
        let w = &params.w2[o * feat..(o + 1) * feat];
        let gw = &mut g.w2[o * feat..(o + 1) * feat];
        for f in 0..feat {
            gw[f] += d * pooled[f];
            dpooled[f] += d * w[f];
        }
    }
    for c in 0..c_n {
        for u in 0..p {
            for v in 0..p {
                let dp = dpooled[(c * p + u) * p + v] / 4.0;
                for (di, dj) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
                    let (i, j) = (2 * u + di, 2 * v + dj);
                    if z1[(c * h1 + i) * h1 + j] > 0.0 {
                        g.b1[c] += dp;
                        for a in 0..3 {
                            for b in 0..3 {
                                g.k1[c * 9 + a * 3 + b] += dp * x[(i + a) * n + j + b];
                            }
                        }
                    }
                }
            }
        }
    }
    correct
}

/// Minibatch SGD on softmax cross-entropy. Single-threaded and
/// deterministic for a fixed seed.
pub fn train_toy_cnn(train: &Dataset, config: &TrainConfig) -> Result<ToyCnn> {
    if train.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if train.len() < 100 {
        return Err(Error::param("train", "need at least 100 samples"));
    }
    if config.batch_size == 0 || !(config.learning_rate > 0.0) {
        return Err(Error::param(
            "train",
            "batch size and learning rate must be positive",
        ));
    }
    let first = &train.images[0];
    if first.channels() != 1 || first.height() != first.width() {
        return Err(Error::param(
            "train",
            "expects square single-channel images",
        ));
    }
    let n = first.height();
    let mut model = ToyCnn::init(n, train.classes, config.seed)?;
    let mut params = Params::from_model(&model);
    let mut rng = seed::rng(seed::derive(config.seed, &[1]));
    let mut order: Vec<usize> = (0..train.len()).collect();
    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(config.batch_size) {
            let mut g = params.zeros_like();
            for &i in batch {
                backprop(
                    &params,
                    &mut g,
                    train.images[i].data(),
                    n,
                    train.classes,
                    train.labels[i],
                );
            }
            let step = config.learning_rate / batch.len() as f64;
            for (p, d) in [
                (&mut params.k1, &g.k1),
                (&mut params.b1, &g.b1),
                (&mut params.w2, &g.w2),
                (&mut params.b2, &g.b2),
            ] {
                p.iter_mut().zip(d.iter()).for_each(|(p, d)| *p -= step * d);
            }
        }
    }
    params.write_back(&mut model)?;
    Ok(model)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub accuracy: f64,
    /// `confusion[true][predicted]`.
    pub confusion: Vec<Vec<usize>>,
}

impl Evaluation {
    pub fn total(&self) -> usize {
        self.confusion.iter().flatten().sum()
    }
}

/// Top-1 accuracy and confusion matrix, parallel over images.
pub fn evaluate_classifier(
    model: &ToyCnn,
    test: &Dataset,
    execution: ModelExecution<'_>,
) -> Result<Evaluation> {
    if test.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if test.classes != model.classes {
        return Err(Error::shape(
            format!("{} classes", model.classes),
            test.classes,
        ));
    }
    let predictions: Vec<usize> = test
        .images
        .par_iter()
        .enumerate()
        .map(|(i, img)| model.predict(img.as_map(), execution, i as u64))
        .collect::<Result<_>>()?;
    let mut confusion = vec![vec![0; model.classes]; model.classes];
    for (&truth, &pred) in test.labels.iter().zip(&predictions) {
        confusion[truth][pred] += 1;
    }
    let correct: usize = (0..model.classes).map(|c| confusion[c][c]).sum();
    Ok(Evaluation {
        accuracy: correct as f64 / test.len() as f64,
        confusion,
    })
}
