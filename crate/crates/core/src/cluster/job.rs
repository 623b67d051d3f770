use serde::{Deserialize, Serialize};

use crate::convnet::{chunk_count, FeatureMap, Kernel2d, LayerSpec};
use crate::error::{Error, Result};
use crate::opu::{ops_per_symbol, Kernel};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum JobKind {
    /// Valid 1D correlation of `input` with `kernel`.
    Conv1d { kernel: Kernel, input: Vec<f64> },
    /// Valid 2D correlation of a single-channel image.
    Conv2d { kernel: Kernel2d, image: FeatureMap },
    /// Full convolution layer forward pass.
    Layer { layer: LayerSpec, input: FeatureMap },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Job {
    pub id: u64,
    #[serde(default)]
    pub origin_edge: usize,
    pub kind: JobKind,
    /// Overrides the seed derived from the run seed and job id.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default)]
    pub submit_time_ns: f64,
}

impl Job {
    pub fn new(id: u64, kind: JobKind) -> Self {
        Self {
            id,
            origin_edge: 0,
            kind,
            seed: None,
            submit_time_ns: 0.0,
        }
    }

    pub fn effective_seed(&self, run_seed: u64) -> u64 {
        self.seed
            .unwrap_or_else(|| seed::derive(run_seed, &[self.id]))
    }
}

/// Where a row task sits inside its job.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TaskPath {
    Single,
    Row { r: usize },
    LayerRow { out: usize, inp: usize, r: usize },
}

/// One kernel row streamed over a run of input rows on a single OPU.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowTask {
    pub job_id: u64,
    pub index: usize,
    pub path: TaskPath,
    pub row_kernel: Kernel,
    pub first_row: usize,
    pub out_rows: usize,
    pub row_len: usize,
    /// Symbol slots needed, one per input chunk.
    pub slots: u64,
    pub ops: u64,
}

impl RowTask {
    /// Noise stream for this task; matches the single-node convolution
    /// paths for the same job seed.
    pub fn stream(&self, job_seed: u64) -> u64 {
        match self.path {
            TaskPath::Single => job_seed,
            TaskPath::Row { r } => seed::derive(job_seed, &[r as u64]),
            TaskPath::LayerRow { out, inp, r } => seed::derive(
                seed::derive(job_seed, &[out as u64, inp as u64]),
                &[r as u64],
            ),
        }
    }

    pub fn input_channel(&self) -> usize {
        match self.path {
            TaskPath::LayerRow { inp, .. } => inp,
            _ => 0,
        }
    }
}

fn row_ops(row_len: usize, k: usize, chunk_len: usize) -> u64 {
    let stride = chunk_len - k + 1;
    let mut ops = 0;
    let mut start = 0;
    while start + k <= row_len {
        ops += ops_per_symbol((start + chunk_len).min(row_len) - start, k);
        start += stride;
    }
    ops
}

fn check_map(map: &FeatureMap, k: usize) -> Result<()> {
    if map.data().len() != map.channels * map.height * map.width {
        return Err(Error::shape(
            format!("{} values", map.channels * map.height * map.width),
            map.data().len(),
        ));
    }
    if map.data().iter().any(|v| !v.is_finite()) {
        return Err(Error::param("input", "values must be finite"));
    }
    if k > map.height || k > map.width {
        return Err(Error::shape(
            format!("input at least {k}x{k}"),
            format!("{}x{}", map.height, map.width),
        ));
    }
    Ok(())
}

/// Splits a job into row tasks for OPUs with `chunk_len` used input ports.
pub fn decompose_job(job: &Job, chunk_len: usize) -> Result<Vec<RowTask>> {
    let make = |index, path, row_kernel: Kernel, first_row, out_rows, row_len| -> Result<RowTask> {
        let k = row_kernel.len();
        if k > chunk_len {
            return Err(Error::KernelTooLong {
                k,
                ports: chunk_len,
            });
        }
        Ok(RowTask {
            job_id: job.id,
            index,
            path,
            first_row,
            out_rows,
            row_len,
            slots: (out_rows * chunk_count(row_len, k, chunk_len)) as u64,
            ops: out_rows as u64 * row_ops(row_len, k, chunk_len),
            row_kernel,
        })
    };
    let row = |k: &Kernel2d, r: usize| Kernel::new(k.row(r).to_vec());
    match &job.kind {
        JobKind::Conv1d { kernel, input } => {
            if input.len() < kernel.len() {
                return Err(Error::shape(
                    format!("at least {} inputs", kernel.len()),
                    input.len(),
                ));
            }
            if input.iter().any(|v| !v.is_finite()) {
                return Err(Error::param("input", "values must be finite"));
            }
            Ok(vec![make(
                0,
                TaskPath::Single,
                kernel.clone(),
                0,
                1,
                input.len(),
            )?])
        }
        JobKind::Conv2d { kernel, image } => {
            if image.channels != 1 {
                return Err(Error::shape("1 channel", image.channels));
            }
            let k = kernel.size();
            check_map(image, k)?;
            let oh = image.height - k + 1;
            (0..k)
                .map(|r| make(r, TaskPath::Row { r }, row(kernel, r)?, r, oh, image.width))
                .collect()
        }
        JobKind::Layer { layer, input } => {
            layer.validate()?;
            if input.channels != layer.in_channels {
                return Err(Error::shape(
                    format!("{} input channels", layer.in_channels),
                    input.channels,
                ));
            }
            let k = layer.kernel_size;
            check_map(input, k)?;
            let oh = input.height - k + 1;
            let mut tasks = Vec::with_capacity(layer.out_channels * layer.in_channels * k);
            for out in 0..layer.out_channels {
                for inp in 0..layer.in_channels {
                    for r in 0..k {
                        let path = TaskPath::LayerRow { out, inp, r };
                        tasks.push(make(
                            tasks.len(),
                            path,
                            row(layer.kernel(out, inp), r)?,
                            r,
                            oh,
                            input.width,
                        )?);
                    }
                }
            }
            Ok(tasks)
        }
    }
}
