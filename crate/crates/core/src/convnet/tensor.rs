use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Channels-first real tensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMap {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    data: Vec<f64>,
}

impl FeatureMap {
    pub fn new(channels: usize, height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if channels == 0 || height == 0 || width == 0 {
            return Err(Error::param("dimensions", "must be at least 1"));
        }
        if data.len() != channels * height * width {
            return Err(Error::shape(
                format!(
                    "{channels}x{height}x{width} = {} values",
                    channels * height * width
                ),
                data.len(),
            ));
        }
        Ok(Self {
            channels,
            height,
            width,
            data,
        })
    }

    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        Self {
            channels,
            height,
            width,
            data: vec![0.0; channels * height * width],
        }
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn plane(&self, c: usize) -> &[f64] {
        let n = self.height * self.width;
        &self.data[c * n..(c + 1) * n]
    }

    pub fn plane_mut(&mut self, c: usize) -> &mut [f64] {
        let n = self.height * self.width;
        &mut self.data[c * n..(c + 1) * n]
    }

    pub fn get(&self, c: usize, y: usize, x: usize) -> f64 {
        self.data[(c * self.height + y) * self.width + x]
    }

    pub fn range(&self) -> (f64, f64) {
        self.data
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }

    /// 2×2 average pooling; an odd trailing row or column is dropped.
    pub fn avg_pool2(&self) -> Result<Self> {
        let (h, w) = (self.height / 2, self.width / 2);
        if h == 0 || w == 0 {
            return Err(Error::shape(
                "at least 2x2 spatial size",
                format!("{}x{}", self.height, self.width),
            ));
        }
        let mut out = Self::zeros(self.channels, h, w);
        for c in 0..self.channels {
            for y in 0..h {
                for x in 0..w {
                    let s = self.get(c, 2 * y, 2 * x)
                        + self.get(c, 2 * y, 2 * x + 1)
                        + self.get(c, 2 * y + 1, 2 * x)
                        + self.get(c, 2 * y + 1, 2 * x + 1);
                    out.data[(c * h + y) * w + x] = s / 4.0;
                }
            }
        }
        Ok(out)
    }
}

/// Feature map whose values all lie in [0, 1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FeatureMap", into = "FeatureMap")]
pub struct ImageTensor(FeatureMap);

impl ImageTensor {
    pub fn new(channels: usize, height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        FeatureMap::new(channels, height, width, data)?.try_into()
    }

    pub fn from_u8(height: usize, width: usize, pixels: &[u8]) -> Result<Self> {
        Self::new(
            1,
            height,
            width,
            pixels.iter().map(|&p| p as f64 / 255.0).collect(),
        )
    }

    pub fn as_map(&self) -> &FeatureMap {
        &self.0
    }

    pub fn height(&self) -> usize {
        self.0.height
    }

    pub fn width(&self) -> usize {
        self.0.width
    }

    pub fn channels(&self) -> usize {
        self.0.channels
    }
}

impl TryFrom<FeatureMap> for ImageTensor {
    type Error = Error;

    fn try_from(map: FeatureMap) -> Result<Self> {
        if let Some((i, &v)) = map
            .data
            .iter()
            .enumerate()
            .find(|(_, v)| !(0.0..=1.0).contains(*v))
        {
            return Err(Error::Range {
                index: i,
                value: v,
                lo: 0.0,
                hi: 1.0,
            });
        }
        Ok(Self(map))
    }
}

impl From<ImageTensor> for FeatureMap {
    fn from(img: ImageTensor) -> Self {
        img.0
    }
}

impl std::ops::Deref for ImageTensor {
    type Target = FeatureMap;

    fn deref(&self) -> &FeatureMap {
        &self.0
    }
}

/// Square 2D kernel, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct Kernel2d {
    size: usize,
    weights: Vec<f64>,
}

impl Kernel2d {
    pub fn new(size: usize, weights: Vec<f64>) -> Result<Self> {
        if size == 0 {
            return Err(Error::param("kernel size", "must be at least 1"));
        }
        if weights.len() != size * size {
            return Err(Error::shape(
                format!("{} weights", size * size),
                weights.len(),
            ));
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::param("kernel", "weights must be finite"));
        }
        Ok(Self { size, weights })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.weights[r * self.size..(r + 1) * self.size]
    }

    pub fn abs_sum(&self) -> f64 {
        self.weights.iter().map(|w| w.abs()).sum()
    }
}

impl TryFrom<Vec<Vec<f64>>> for Kernel2d {
    type Error = Error;

    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        let size = rows.len();
        if rows.iter().any(|r| r.len() != size) {
            return Err(Error::param("kernel", "must be square"));
        }
        Self::new(size, rows.into_iter().flatten().collect())
    }
}

impl From<Kernel2d> for Vec<Vec<f64>> {
    fn from(k: Kernel2d) -> Self {
        k.weights.chunks(k.size).map(<[f64]>::to_vec).collect()
    }
}

/// Direct valid 2D cross-correlation of one `h × w` plane.
pub fn correlate2d_valid(plane: &[f64], h: usize, w: usize, kernel: &Kernel2d) -> Result<Vec<f64>> {
    let k = kernel.size();
    if k > h || k > w {
        return Err(Error::shape(
            format!("image at least {k}x{k}"),
            format!("{h}x{w}"),
        ));
    }
    let (oh, ow) = (h - k + 1, w - k + 1);
    let mut out = vec![0.0; oh * ow];
    for y in 0..oh {
        for x in 0..ow {
            let mut acc = 0.0;
            for r in 0..k {
                for c in 0..k {
                    acc += kernel.weights[r * k + c] * plane[(y + r) * w + x + c];
                }
            }
            out[y * ow + x] = acc;
        }
    }
    Ok(out)
}
