use serde::{Deserialize, Serialize};

use super::conv::{conv2d_via_opus, noisy_quantize};
use super::tensor::{correlate2d_valid, FeatureMap, Kernel2d};
use crate::error::{Error, Result};
use crate::opu::Opu;
use crate::seed;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    None,
    Relu,
}

/// Valid-mode convolution layer. `kernels[o * in_channels + i]` maps input
/// channel `i` to output channel `o`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub out_channels: usize,
    pub in_channels: usize,
    pub kernel_size: usize,
    pub kernels: Vec<Kernel2d>,
    pub bias: Vec<f64>,
    #[serde(default)]
    pub activation: Activation,
    /// Per-channel instance normalization before the activation.
    #[serde(default)]
    pub normalize: bool,
}

impl LayerSpec {
    pub fn new(
        out_channels: usize,
        in_channels: usize,
        kernels: Vec<Kernel2d>,
        bias: Vec<f64>,
        activation: Activation,
    ) -> Result<Self> {
        let kernel_size = kernels.first().map(Kernel2d::size).unwrap_or(0);
        let layer = Self {
            out_channels,
            in_channels,
            kernel_size,
            kernels,
            bias,
            activation,
            normalize: false,
        };
        layer.validate()?;
        Ok(layer)
    }

    pub fn validate(&self) -> Result<()> {
        if self.out_channels == 0 || self.in_channels == 0 || self.kernel_size == 0 {
            return Err(Error::param(
                "layer",
                "channel counts and kernel size must be at least 1",
            ));
        }
        if self.kernels.len() != self.out_channels * self.in_channels {
            return Err(Error::shape(
                format!("{} kernels", self.out_channels * self.in_channels),
                self.kernels.len(),
            ));
        }
        if self.kernels.iter().any(|k| k.size() != self.kernel_size) {
            return Err(Error::param(
                "kernels",
                "all kernels must share the layer's size",
            ));
        }
        if self.bias.len() != self.out_channels {
            return Err(Error::shape(
                format!("{} biases", self.out_channels),
                self.bias.len(),
            ));
        }
        Ok(())
    }

    pub fn kernel(&self, out: usize, inp: usize) -> &Kernel2d {
        &self.kernels[out * self.in_channels + inp]
    }

    /// Applies bias, optional normalization and the activation to summed
    /// convolution outputs. `noise` is `(bits, seed)` for injected noise.
    pub fn finish(&self, out: &mut FeatureMap, noise: Option<(u32, u64)>) -> Result<()> {
        if out.channels != self.out_channels {
            return Err(Error::shape(
                format!("{} output channels", self.out_channels),
                out.channels,
            ));
        }
        for o in 0..self.out_channels {
            let b = self.bias[o];
            out.plane_mut(o).iter_mut().for_each(|a| *a += b);
        }
        if let Some((bits, seed)) = noise {
            let noisy = noisy_quantize(out.data(), bits, seed::derive(seed, &[0]))?;
            out.data_mut().copy_from_slice(&noisy);
        }
        if self.normalize {
            for c in 0..out.channels {
                instance_norm(out.plane_mut(c));
            }
            if let Some((bits, seed)) = noise {
                let noisy = noisy_quantize(out.data(), bits, seed::derive(seed, &[1]))?;
                out.data_mut().copy_from_slice(&noisy);
            }
        }
        if self.activation == Activation::Relu {
            out.data_mut().iter_mut().for_each(|v| *v = v.max(0.0));
        }
        Ok(())
    }
}

/// How a layer's convolutions are computed.
#[derive(Debug, Clone, Copy)]
pub enum Execution<'a> {
    Float,
    /// Float math with Gaussian noise at the given precision injected after
    /// the convolution and after normalization.
    Noise {
        bits: u32,
        seed: u64,
    },
    Opu {
        opus: &'a [Opu],
        stream: u64,
    },
}

pub fn layer_forward(
    layer: &LayerSpec,
    input: &FeatureMap,
    execution: Execution<'_>,
) -> Result<FeatureMap> {
    layer.validate()?;
    if input.channels != layer.in_channels {
        return Err(Error::shape(
            format!("{} input channels", layer.in_channels),
            input.channels,
        ));
    }
    let (h, w, k) = (input.height, input.width, layer.kernel_size);
    if k > h || k > w {
        return Err(Error::shape(
            format!("input at least {k}x{k}"),
            format!("{h}x{w}"),
        ));
    }
    let (oh, ow) = (h - k + 1, w - k + 1);
    let mut out = FeatureMap::zeros(layer.out_channels, oh, ow);
    for o in 0..layer.out_channels {
        let acc = out.plane_mut(o);
        for i in 0..layer.in_channels {
            let kernel = layer.kernel(o, i);
            let part = match execution {
                Execution::Opu { opus, stream } => conv2d_via_opus(
                    opus,
                    input.plane(i),
                    h,
                    w,
                    kernel,
                    seed::derive(stream, &[o as u64, i as u64]),
                )?,
                _ => correlate2d_valid(input.plane(i), h, w, kernel)?,
            };
            for (a, p) in acc.iter_mut().zip(part) {
                *a += p;
            }
        }
    }
    let noise = match execution {
        Execution::Noise { bits, seed } => Some((bits, seed)),
        _ => None,
    };
    layer.finish(&mut out, noise)?;
    Ok(out)
}

fn instance_norm(plane: &mut [f64]) {
    let n = plane.len() as f64;
    let mean = plane.iter().sum::<f64>() / n;
    let var = plane.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let inv = 1.0 / (var + 1e-5).sqrt();
    plane.iter_mut().for_each(|v| *v = (*v - mean) * inv);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::opu::OpuConfig;
    use rand::Rng;

    fn random_layer(rng: &mut impl Rng, out: usize, inp: usize, k: usize) -> LayerSpec {
        let kernels = (0..out * inp)
            .map(|_| {
                Kernel2d::new(k, (0..k * k).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
            })
            .collect();
        let bias = (0..out).map(|_| rng.random_range(-0.5..0.5)).collect();
        LayerSpec::new(out, inp, kernels, bias, Activation::Relu).unwrap()
    }

    #[test]
    fn unit_kernel_is_identity() {
        let layer = LayerSpec::new(
            1,
            1,
            vec![Kernel2d::new(1, vec![1.0]).unwrap()],
            vec![0.0],
            Activation::None,
        )
        .unwrap();
        let input = FeatureMap::new(1, 2, 3, vec![0.1, -0.2, 0.3, 0.4, 0.5, -0.6]).unwrap();
        assert_eq!(
            layer_forward(&layer, &input, Execution::Float).unwrap(),
            input
        );
    }

    #[test]
    fn ideal_opu_matches_float() {
        let mut rng = crate::seed::rng(5);
        let opus: Vec<Opu> = (0..3)
            .map(|_| Opu::new(OpuConfig::new(8)).unwrap())
            .collect();
        for _ in 0..5 {
            let layer = random_layer(&mut rng, 3, 2, 3);
            let input = FeatureMap::new(
                2,
                9,
                11,
                (0..2 * 9 * 11)
                    .map(|_| rng.random_range(0.0..1.0))
                    .collect(),
            )
            .unwrap();
            let a = layer_forward(&layer, &input, Execution::Float).unwrap();
            let b = layer_forward(
                &layer,
                &input,
                Execution::Opu {
                    opus: &opus,
                    stream: 1,
                },
            )
            .unwrap();
            for (x, y) in a.data().iter().zip(b.data()) {
                assert!((x - y).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn normalization_centers_channels() {
        let mut rng = crate::seed::rng(6);
        let mut layer = random_layer(&mut rng, 2, 1, 2);
        layer.activation = Activation::None;
        layer.normalize = true;
        let input = FeatureMap::new(1, 5, 5, (0..25).map(|i| i as f64 / 25.0).collect()).unwrap();
        let out = layer_forward(&layer, &input, Execution::Float).unwrap();
        for c in 0..2 {
            let mean: f64 = out.plane(c).iter().sum::<f64>() / 16.0;
            assert!(mean.abs() < 1e-12);
        }
    }

    #[test]
    fn channel_mismatch_is_rejected() {
        let mut rng = crate::seed::rng(7);
        let layer = random_layer(&mut rng, 1, 2, 3);
        let input = FeatureMap::zeros(1, 5, 5);
        assert!(matches!(
            layer_forward(&layer, &input, Execution::Float),
            Err(Error::Shape { .. })
        ));
    }
}
