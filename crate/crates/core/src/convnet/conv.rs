//! K×K convolution as K row-wise 1D convolutions. Row task `r` correlates
//! image row `y + r` with kernel row `r`; summing the K partial rows gives
//! output row `y`.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tensor::Kernel2d;
use crate::error::{Error, Result};
use crate::opu::{Kernel, Opu};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Conv2dTask {
    pub row_kernel: Kernel,
    pub source_row_offset: usize,
    pub channel: usize,
    pub assigned_opu: usize,
}

/// One task per kernel row, task `r` on OPU `r`.
pub fn decompose_conv2d(kernel: &Kernel2d) -> Vec<Conv2dTask> {
    (0..kernel.size())
        .map(|r| Conv2dTask {
            row_kernel: Kernel::new(kernel.row(r).to_vec())
                .expect("kernel rows are finite and nonempty"),
            source_row_offset: r,
            channel: 0,
            assigned_opu: r,
        })
        .collect()
}

/// Sums row tasks back into a valid 2D map using `row_conv`, which must
/// return the `len - k + 1` valid outputs of a 1D correlation.
pub fn recompose<F>(
    tasks: &[Conv2dTask],
    plane: &[f64],
    h: usize,
    w: usize,
    mut row_conv: F,
) -> Result<Vec<f64>>
where
    F: FnMut(&Conv2dTask, usize, &[f64]) -> Result<Vec<f64>>,
{
    let k = tasks.len();
    if k == 0 || k > h || k > w {
        return Err(Error::shape(
            format!("image at least {k}x{k}"),
            format!("{h}x{w}"),
        ));
    }
    let (oh, ow) = (h - k + 1, w - k + 1);
    let mut out = vec![0.0; oh * ow];
    for task in tasks {
        for y in 0..oh {
            let src = y + task.source_row_offset;
            let partial = row_conv(task, y, &plane[src * w..(src + 1) * w])?;
            if partial.len() != ow {
                return Err(Error::shape(format!("{ow} row outputs"), partial.len()));
            }
            for (o, p) in out[y * ow..(y + 1) * ow].iter_mut().zip(partial) {
                *o += p;
            }
        }
    }
    Ok(out)
}

/// Valid 1D correlation of a long row computed in chunks of at most
/// `chunk_len` samples. Consecutive chunks overlap by `k - 1`.
pub fn correlate_row_chunked<F>(
    row: &[f64],
    k: usize,
    chunk_len: usize,
    mut chunk_conv: F,
) -> Result<Vec<f64>>
where
    F: FnMut(usize, &[f64]) -> Result<Vec<f64>>,
{
    if k == 0 || chunk_len < k {
        return Err(Error::param(
            "chunk_len",
            "must be at least the kernel length",
        ));
    }
    if row.len() < k {
        return Err(Error::shape(format!("row of at least {k}"), row.len()));
    }
    let stride = chunk_len - k + 1;
    let mut out = Vec::with_capacity(row.len() - k + 1);
    let mut start = 0;
    let mut index = 0;
    while start + k <= row.len() {
        let end = (start + chunk_len).min(row.len());
        let valid = end - start - k + 1;
        let y = chunk_conv(index, &row[start..end])?;
        if y.len() < valid {
            return Err(Error::shape(format!("{valid} chunk outputs"), y.len()));
        }
        out.extend_from_slice(&y[..valid]);
        start += stride;
        index += 1;
    }
    Ok(out)
}

/// Number of chunks `correlate_row_chunked` issues for a row.
pub fn chunk_count(row_len: usize, k: usize, chunk_len: usize) -> usize {
    if k == 0 || chunk_len < k || row_len < k {
        return 0;
    }
    (row_len - k) / (chunk_len - k + 1) + 1
}

/// Affine map taking a block of samples into the modulator range [0, 1].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitRange {
    pub offset: f64,
    pub span: f64,
}

impl UnitRange {
    /// Identity when `values` already lie in [0, 1].
    pub fn fit(values: &[f64]) -> Self {
        let (lo, hi) = values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| {
                (a.min(v), b.max(v))
            });
        if values.is_empty() || (lo >= 0.0 && hi <= 1.0) {
            Self {
                offset: 0.0,
                span: 1.0,
            }
        } else if hi > lo {
            Self {
                offset: lo,
                span: hi - lo,
            }
        } else {
            Self {
                offset: lo,
                span: 1.0,
            }
        }
    }

    pub fn apply(&self, values: &[f64]) -> Vec<f64> {
        values
            .iter()
            .map(|v| ((v - self.offset) / self.span).clamp(0.0, 1.0))
            .collect()
    }

    /// Undoes the map on a correlation output whose kernel sums to `kernel_sum`.
    pub fn restore(&self, y: f64, kernel_sum: f64) -> f64 {
        y * self.span + self.offset * kernel_sum
    }
}

/// Correlates `row_kernel` with rows `first_row..first_row + out_rows` of a
/// mapped plane of width `w`. Returns `out_rows × (w - k + 1)` values in
/// the caller's units. Chunk `c` of output row `y` uses noise stream
/// `derive(stream, [y, c])`.
pub fn run_row_task(
    opu: &Opu,
    row_kernel: &Kernel,
    mapped: &[f64],
    w: usize,
    first_row: usize,
    out_rows: usize,
    range: UnitRange,
    stream: u64,
) -> Result<Vec<f64>> {
    let k = row_kernel.len();
    if k > w {
        return Err(Error::shape(format!("rows of at least {k}"), w));
    }
    if (first_row + out_rows) * w > mapped.len() {
        return Err(Error::shape(
            format!("at least {} rows", first_row + out_rows),
            mapped.len() / w.max(1),
        ));
    }
    let ow = w - k + 1;
    if row_kernel.is_zero() {
        return Ok(vec![0.0; out_rows * ow]);
    }
    let kernel_sum: f64 = row_kernel.weights().iter().sum();
    let loaded = opu.load(row_kernel)?;
    let mut acc = Vec::with_capacity(out_rows * ow);
    for y in 0..out_rows {
        let src = first_row + y;
        let row = &mapped[src * w..(src + 1) * w];
        let part = correlate_row_chunked(row, k, opu.used_ports(), |c, chunk| {
            loaded.run_valid(chunk, seed::derive(stream, &[y as u64, c as u64]))
        })?;
        acc.extend(part.into_iter().map(|v| range.restore(v, kernel_sum)));
    }
    Ok(acc)
}

/// Valid 1D correlation of an arbitrarily long, arbitrarily scaled vector
/// on one OPU.
pub fn conv1d_via_opu(opu: &Opu, kernel: &Kernel, x: &[f64], stream: u64) -> Result<Vec<f64>> {
    if x.len() < kernel.len() {
        return Err(Error::shape(
            format!("at least {} inputs", kernel.len()),
            x.len(),
        ));
    }
    let range = UnitRange::fit(x);
    run_row_task(opu, kernel, &range.apply(x), x.len(), 0, 1, range, stream)
}

/// Valid 2D correlation of one plane on a pool of OPUs. Rows are
/// affinely mapped into [0, 1] if needed and the offset is restored after
/// detection. Row task `r` runs on OPU `r mod pool` with stream
/// `derive(stream, [r])`; all-zero kernel rows are skipped.
pub fn conv2d_via_opus(
    opus: &[Opu],
    plane: &[f64],
    h: usize,
    w: usize,
    kernel: &Kernel2d,
    stream: u64,
) -> Result<Vec<f64>> {
    if opus.is_empty() {
        return Err(Error::param("pool", "needs at least one OPU"));
    }
    if plane.len() != h * w {
        return Err(Error::shape(format!("{h}x{w} plane"), plane.len()));
    }
    let k = kernel.size();
    if k > h || k > w {
        return Err(Error::shape(
            format!("image at least {k}x{k}"),
            format!("{h}x{w}"),
        ));
    }
    let range = UnitRange::fit(plane);
    let mapped = range.apply(plane);
    let tasks = decompose_conv2d(kernel);
    let (oh, ow) = (h - k + 1, w - k + 1);
    let partials: Vec<Vec<f64>> = tasks
        .par_iter()
        .map(|task| {
            let r = task.source_row_offset;
            let opu = &opus[task.assigned_opu % opus.len()];
            run_row_task(
                opu,
                &task.row_kernel,
                &mapped,
                w,
                r,
                oh,
                range,
                seed::derive(stream, &[r as u64]),
            )
        })
        .collect::<Result<_>>()?;

    let mut out = vec![0.0; oh * ow];
    for p in partials {
        for (o, v) in out.iter_mut().zip(p) {
            *o += v;
        }
    }
    Ok(out)
}

/// Adds Gaussian noise with sigma `(max - min) · 2^-bits`. Bits are
/// capped at 30.
pub fn noisy_quantize(values: &[f64], bits: u32, seed: u64) -> Result<Vec<f64>> {
    if bits == 0 {
        return Err(Error::param("bits", "must be at least 1"));
    }
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| {
            (a.min(v), b.max(v))
        });
    if values.is_empty() || hi <= lo {
        return Ok(values.to_vec());
    }
    let sigma = (hi - lo) * 2f64.powi(-(bits.min(30) as i32));
    let mut rng = seed::rng(seed);
    Ok(values
        .iter()
        .map(|&v| {
            let z: f64 = rng.sample(StandardNormal);
            v + sigma * z
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::convnet::tensor::correlate2d_valid;
    use crate::opu::OpuConfig;

    fn plane(h: usize, w: usize, seed: u64) -> Vec<f64> {
        let mut rng = seed::rng(seed);
        (0..h * w).map(|_| rng.random_range(0.0..=1.0)).collect()
    }

    fn direct_row(row: &[f64], k: &[f64]) -> Vec<f64> {
        (0..=row.len() - k.len())
            .map(|i| k.iter().enumerate().map(|(d, w)| w * row[i + d]).sum())
            .collect()
    }

    #[test]
    fn decomposition_sizes() {
        assert_eq!(
            decompose_conv2d(&Kernel2d::new(1, vec![2.5]).unwrap()).len(),
            1
        );
        let tasks = decompose_conv2d(&Kernel2d::new(3, (0..9).map(f64::from).collect()).unwrap());
        assert_eq!(tasks.len(), 3);
        assert_eq!(
            tasks.iter().map(|t| t.assigned_opu).collect::<Vec<_>>(),
            vec![0, 1, 2]
        );
    }

    #[test]
    fn recompose_equals_direct() {
        let p = plane(8, 8, 1);
        let mut rng = seed::rng(2);
        let k = Kernel2d::new(3, (0..9).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
        let tasks = decompose_conv2d(&k);
        let got = recompose(&tasks, &p, 8, 8, |t, _, row| {
            Ok(direct_row(row, t.row_kernel.weights()))
        })
        .unwrap();
        let want = correlate2d_valid(&p, 8, 8, &k).unwrap();
        for (a, b) in got.iter().zip(&want) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn chunking_matches_unchunked() {
        let row = plane(1, 29, 3);
        let k = [0.3, -0.2, 0.9];
        let whole = direct_row(&row, &k);
        for chunk in 3..=30 {
            let got = correlate_row_chunked(&row, 3, chunk, |_, c| Ok(direct_row(c, &k))).unwrap();
            assert_eq!(got.len(), whole.len());
            for (a, b) in got.iter().zip(&whole) {
                assert!((a - b).abs() < 1e-12);
            }
            assert_eq!(chunk_count(29, 3, chunk), (29 - 3) / (chunk - 2) + 1);
        }
    }

    #[test]
    fn opu_pool_identity_and_flat_edges() {
        let opus: Vec<Opu> = (0..3)
            .map(|_| Opu::new(OpuConfig::new(8)).unwrap())
            .collect();
        let p = plane(10, 12, 4);
        let id = Kernel2d::new(3, vec![0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
        let out = conv2d_via_opus(&opus, &p, 10, 12, &id, 0).unwrap();
        for y in 0..8 {
            for x in 0..10 {
                assert!((out[y * 10 + x] - p[(y + 1) * 12 + x + 1]).abs() < 1e-12);
            }
        }
        let sobel = Kernel2d::new(3, vec![-1.0, 0.0, 1.0, -2.0, 0.0, 2.0, -1.0, 0.0, 1.0]).unwrap();
        let flat = vec![0.6; 100];
        let edges = conv2d_via_opus(&opus, &flat, 10, 10, &sobel, 0).unwrap();
        assert!(edges.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn opu_pool_handles_signed_feature_maps() {
        let opus = vec![Opu::new(OpuConfig::new(4)).unwrap()];
        let p: Vec<f64> = plane(6, 9, 5).into_iter().map(|v| 3.0 * v - 1.0).collect();
        let k = Kernel2d::new(2, vec![0.5, -1.5, 2.0, 0.25]).unwrap();
        let got = conv2d_via_opus(&opus, &p, 6, 9, &k, 0).unwrap();
        let want = correlate2d_valid(&p, 6, 9, &k).unwrap();
        for (a, b) in got.iter().zip(&want) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn conv1d_handles_long_signed_rows() {
        let opu = Opu::new(OpuConfig::new(8)).unwrap();
        let x: Vec<f64> = plane(1, 40, 8).into_iter().map(|v| 4.0 * v - 2.0).collect();
        let k = Kernel::new(vec![0.7, -0.3, 1.1]).unwrap();
        let got = conv1d_via_opu(&opu, &k, &x, 0).unwrap();
        let want = direct_row(&x, k.weights());
        assert_eq!(got.len(), 38);
        for (a, b) in got.iter().zip(&want) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn image_smaller_than_kernel() {
        let opus = vec![Opu::new(OpuConfig::new(8)).unwrap()];
        let k = Kernel2d::new(3, vec![1.0; 9]).unwrap();
        assert!(matches!(
            conv2d_via_opus(&opus, &[0.0; 4], 2, 2, &k, 0),
            Err(Error::Shape { .. })
        ));
    }

    #[test]
    fn noisy_quantize_limits() {
        let v: Vec<f64> = (0..100).map(|i| i as f64 / 99.0).collect();
        let high = noisy_quantize(&v, 64, 1).unwrap();
        for (a, b) in high.iter().zip(&v) {
            assert!((a - b).abs() < 1e-6);
        }
        assert_eq!(noisy_quantize(&[0.4; 10], 3, 1).unwrap(), vec![0.4; 10]);
        assert!(noisy_quantize(&v, 0, 1).is_err());
    }

    #[test]
    fn noisy_quantize_sigma() {
        let n = 100_000;
        let mut v = vec![0.5; n];
        v[0] = 0.0;
        v[1] = 1.0;
        let out = noisy_quantize(&v, 7, 9).unwrap();
        let d: Vec<f64> = out.iter().zip(&v).skip(2).map(|(a, b)| a - b).collect();
        let mean = d.iter().sum::<f64>() / d.len() as f64;
        let std = (d.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (d.len() - 1) as f64).sqrt();
        assert!((std / 2f64.powi(-7) - 1.0).abs() < 0.05);
    }
}
