use serde::{Deserialize, Serialize};

use super::layer::{layer_forward, Activation, Execution};
use super::tensor::FeatureMap;
use super::toy::ToyCnn;
use crate::error::{Error, Result};
use crate::opu::Opu;
use crate::seed;

/// Raw first-layer convolution outputs (before the activation) of a set of
/// images, flattened image by image and channel by channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FirstLayerTrace {
    pub ideal: Vec<f64>,
    pub measured: Vec<f64>,
}

impl FirstLayerTrace {
    /// Both traces scaled by the ideal trace's range onto [0, 1].
    pub fn normalized(&self) -> (Vec<f64>, Vec<f64>) {
        let (lo, hi) = self
            .ideal
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| {
                (a.min(v), b.max(v))
            });
        let span = if hi > lo { hi - lo } else { 1.0 };
        let f = |v: &[f64]| v.iter().map(|x| (x - lo) / span).collect();
        (f(&self.ideal), f(&self.measured))
    }

    /// RMSE between the normalized traces.
    pub fn normalized_rmse(&self) -> f64 {
        let (a, b) = self.normalized();
        if a.is_empty() {
            return 0.0;
        }
        (a.iter().zip(&b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / a.len() as f64).sqrt()
    }
}

/// Runs the model's first layer in float and on `opus`; image `i` uses
/// stream `derive(seed, [i])`.
pub fn first_layer_trace(
    model: &ToyCnn,
    images: &[&FeatureMap],
    opus: &[Opu],
    seed: u64,
) -> Result<FirstLayerTrace> {
    if images.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut layer = model.conv.clone();
    layer.activation = Activation::None;
    let mut trace = FirstLayerTrace {
        ideal: Vec::new(),
        measured: Vec::new(),
    };
    for (i, img) in images.iter().enumerate() {
        let stream = seed::derive(seed, &[i as u64]);
        trace
            .ideal
            .extend(layer_forward(&layer, img, Execution::Float)?.into_data());
        trace
            .measured
            .extend(layer_forward(&layer, img, Execution::Opu { opus, stream })?.into_data());
    }
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::convnet::{synthetic_blobs, train_toy_cnn, TrainConfig};
    use crate::opu::OpuConfig;

    #[test]
    fn ideal_opu_trace_is_exact_and_noisy_is_close() {
        let data = synthetic_blobs(100, 10, 2).unwrap();
        let model = train_toy_cnn(
            &data,
            &TrainConfig {
                epochs: 1,
                ..TrainConfig::default()
            },
        )
        .unwrap();
        let imgs: Vec<&FeatureMap> = data.images.iter().take(2).map(|i| i.as_map()).collect();

        let ideal: Vec<Opu> = (0..3)
            .map(|_| Opu::new(OpuConfig::new(8)).unwrap())
            .collect();
        let t = first_layer_trace(&model, &imgs, &ideal, 0).unwrap();
        assert_eq!(t.ideal.len(), 2 * 8 * 8 * 8);
        assert!(t.normalized_rmse() < 1e-9);

        let noisy: Vec<Opu> = (0..3)
            .map(|_| Opu::new(OpuConfig::new(8).noisy(10.0)).unwrap())
            .collect();
        let t = first_layer_trace(&model, &imgs, &noisy, 0).unwrap();
        let rmse = t.normalized_rmse();
        assert!(rmse > 0.0 && rmse < 0.05, "{rmse}");
        let (a, _) = t.normalized();
        assert!(a.iter().all(|v| (-1e-12..=1.0 + 1e-12).contains(v)));
    }
}
