//! End-to-end OPU: equalized comb, waveshaper weights, 1:n split, one MZM
//! per used input port, AWGR routing, and a microring pair plus balanced
//! photodetector per output port.
//!
//! Output `j` is the cross-correlation `y(j) = Σ_p x(p) ω((p - j) mod N)`.
//! The kernel is not flipped. Outputs `0..=len(x) - k` are the valid
//! (non-wrapping) ones.

use serde::{Deserialize, Serialize};

use super::kernel::{normalize_kernel, split_kernel, Kernel, SplitKernel};
use super::noise::{noise_sigma, NoiseModel, Quantizer};
use super::plan::{load_weights, plan_wavelengths_with, WavelengthPlan, WeightLayout};
use crate::error::{Error, Result};
use crate::photonics::{
    apply_waveshaper, balanced_detect, microring_split, route_spectra, AwgrSpec, CombSource,
    CombSpectrum, MzmModel, PhotodetectorModel,
};
use crate::seed;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OpuMode {
    /// Exact arithmetic through the optical path: no quantization, noise,
    /// or modulator nonlinearity.
    #[default]
    Ideal,
    Noisy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OpuConfig {
    pub comb: CombSource,
    pub awgr: AwgrSpec,
    pub mzm_array: Vec<MzmModel>,
    #[serde(default)]
    pub pd: PhotodetectorModel,
    #[serde(default = "dac_bits")]
    pub dac_bits: u32,
    #[serde(default = "adc_bits")]
    pub adc_bits: u32,
    pub baud_ghz: f64,
    #[serde(default)]
    pub noise: NoiseModel,
    pub used_input_ports: Vec<usize>,
    #[serde(default)]
    pub mode: OpuMode,
    #[serde(default)]
    pub layout: WeightLayout,
}

fn dac_bits() -> u32 {
    8
}

fn adc_bits() -> u32 {
    12
}

impl OpuConfig {
    /// `ports`-port OPU on an 84 GHz grid with every input port in use,
    /// ideal mode, 10 GBd.
    pub fn new(ports: usize) -> Self {
        Self {
            comb: CombSource::decimated_84ghz(2 * ports),
            awgr: AwgrSpec {
                ports,
                channel_spacing_ghz: 84.0,
                center_alignment: ports,
                passband: crate::photonics::Passband::Ideal,
            },
            mzm_array: vec![MzmModel::default(); ports],
            pd: PhotodetectorModel::default(),
            dac_bits: dac_bits(),
            adc_bits: adc_bits(),
            baud_ghz: 10.0,
            noise: NoiseModel::default(),
            used_input_ports: (0..ports).collect(),
            mode: OpuMode::Ideal,
            layout: WeightLayout::Leading,
        }
    }

    pub fn noisy(self, baud_ghz: f64) -> Self {
        Self {
            mode: OpuMode::Noisy,
            baud_ghz,
            ..self
        }
    }

    /// Restricts the OPU to the first `count` input ports.
    pub fn with_used_ports(mut self, count: usize) -> Self {
        self.used_input_ports = (0..count).collect();
        self.mzm_array.truncate(count);
        self.mzm_array.resize(count, MzmModel::default());
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.awgr.validate()?;
        self.pd.validate()?;
        self.noise.validate()?;
        for m in &self.mzm_array {
            m.validate()?;
        }
        if self.used_input_ports.is_empty() {
            return Err(Error::param("used_input_ports", "must not be empty"));
        }
        let mut seen = vec![false; self.awgr.ports];
        for &p in &self.used_input_ports {
            if p >= self.awgr.ports {
                return Err(Error::InvalidPort {
                    port: p,
                    ports: self.awgr.ports,
                });
            }
            if std::mem::replace(&mut seen[p], true) {
                return Err(Error::param(
                    "used_input_ports",
                    format!("port {p} listed twice"),
                ));
            }
        }
        if self.mzm_array.len() != self.used_input_ports.len() {
            return Err(Error::shape(
                format!("{} modulators", self.used_input_ports.len()),
                self.mzm_array.len(),
            ));
        }
        if self.dac_bits == 0 || self.adc_bits == 0 || self.dac_bits > 30 || self.adc_bits > 30 {
            return Err(Error::param("bits", "quantizer widths must be in 1..=30"));
        }
        if !(self.baud_ghz > 0.0) {
            return Err(Error::param("baud", "must be positive"));
        }
        Ok(())
    }
}

/// A validated OPU with its comb built.
#[derive(Debug, Clone)]
pub struct Opu {
    config: OpuConfig,
    comb: CombSpectrum,
}

impl Opu {
    pub fn new(config: OpuConfig) -> Result<Self> {
        config.validate()?;
        let comb = config.comb.build()?;
        if (comb.grid().spacing_ghz - config.awgr.channel_spacing_ghz).abs()
            > 1e-9 * config.awgr.channel_spacing_ghz
        {
            return Err(Error::Configuration(format!(
                "comb spacing {} GHz does not match AWGR channel spacing {} GHz",
                comb.grid().spacing_ghz,
                config.awgr.channel_spacing_ghz
            )));
        }
        // Fail early if the comb cannot hold even a one-tap plan.
        plan_wavelengths_with(&config.awgr, 1, comb.len(), config.layout)?;
        Ok(Self { config, comb })
    }

    pub fn config(&self) -> &OpuConfig {
        &self.config
    }

    pub fn comb(&self) -> &CombSpectrum {
        &self.comb
    }

    pub fn ports(&self) -> usize {
        self.config.awgr.ports
    }

    pub fn used_ports(&self) -> usize {
        self.config.used_input_ports.len()
    }

    pub fn load(&self, kernel: &Kernel) -> Result<LoadedKernel> {
        let k = kernel.len();
        let plan =
            plan_wavelengths_with(&self.config.awgr, k, self.comb.len(), self.config.layout)?;
        let (normalized, scale) = if kernel.is_zero() {
            (kernel.clone(), 1.0)
        } else {
            normalize_kernel(kernel)?
        };
        let split = split_kernel(&normalized);
        let profile = load_weights(&plan, &split, &self.comb)?.then(&plan.compute_filter())?;
        let compute = apply_waveshaper(&self.comb, &profile)?;

        let unit = self
            .comb
            .powers()
            .iter()
            .copied()
            .filter(|&p| p > 0.0)
            .fold(f64::INFINITY, f64::min);
        let reference_loss = self.config.mzm_array[0].loss_factor();
        let n_split = self.used_ports() as f64;
        let gain_ma = self
            .config
            .pd
            .photocurrent_ma(unit * reference_loss / n_split);
        let full_scale = split.positive_sum() + split.negative_sum();

        Ok(LoadedKernel {
            opu: self.clone(),
            plan,
            split,
            scale,
            compute,
            gain_ma,
            full_scale,
        })
    }

    /// Loads `kernel` and runs one input vector; returns all N logical
    /// outputs.
    pub fn convolve(&self, kernel: &Kernel, x: &[f64], stream: u64) -> Result<Vec<f64>> {
        self.load(kernel)?.run(x, stream)
    }
}

/// Kernel imprinted on the comb, ready to stream input vectors.
#[derive(Debug, Clone)]
pub struct LoadedKernel {
    opu: Opu,
    plan: WavelengthPlan,
    split: SplitKernel,
    scale: f64,
    compute: CombSpectrum,
    gain_ma: f64,
    /// Output full scale in normalized-kernel units.
    full_scale: f64,
}

impl LoadedKernel {
    pub fn plan(&self) -> &WavelengthPlan {
        &self.plan
    }

    pub fn kernel_len(&self) -> usize {
        self.plan.kernel_len
    }

    /// Weights as loaded, after normalization.
    pub fn split(&self) -> &SplitKernel {
        &self.split
    }

    /// Full scale in the caller's kernel units.
    pub fn full_scale(&self) -> f64 {
        self.full_scale * self.scale
    }

    /// Overrides the full scale (caller's kernel units) used for noise and
    /// ADC range.
    pub fn with_full_scale(mut self, full_scale: f64) -> Self {
        self.full_scale = full_scale / self.scale;
        self
    }

    /// Photocurrent per unit output, mA.
    pub fn gain_ma(&self) -> f64 {
        self.gain_ma
    }

    /// Runs one input vector. `x` may be shorter than the used port count;
    /// the remaining ports stay dark. `stream` selects the noise stream.
    pub fn run(&self, x: &[f64], stream: u64) -> Result<Vec<f64>> {
        let cfg = &self.opu.config;
        let n = cfg.awgr.ports;
        let k = self.plan.kernel_len;
        if x.len() > cfg.used_input_ports.len() {
            return Err(Error::shape(
                format!("at most {} inputs", cfg.used_input_ports.len()),
                x.len(),
            ));
        }
        if x.len() < k {
            return Err(Error::shape(format!("at least {k} inputs"), x.len()));
        }
        for (i, &v) in x.iter().enumerate() {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Range {
                    index: i,
                    value: v,
                    lo: 0.0,
                    hi: 1.0,
                });
            }
        }

        let noisy = cfg.mode == OpuMode::Noisy;
        let n_split = cfg.used_input_ports.len() as f64;
        let dac = Quantizer::new(cfg.dac_bits, 0.0, 1.0)?;
        let reference_loss = cfg.mzm_array[0].loss_factor();

        let mut inputs = vec![CombSpectrum::dark(*self.compute.grid()); n];
        for (i, &xi) in x.iter().enumerate() {
            let t = if noisy {
                let m = &cfg.mzm_array[i];
                m.transmission(m.drive_for(dac.quantize(xi))) * m.loss_factor()
            } else {
                xi * reference_loss
            };
            inputs[cfg.used_input_ports[i]] = self.compute.scaled(t / n_split);
        }
        let routed = route_spectra(&cfg.awgr, &inputs)?;

        let sigma_out = if noisy {
            noise_sigma(&cfg.noise, cfg.baud_ghz) * self.full_scale
        } else {
            0.0
        };
        let pd = if noisy {
            cfg.pd.with_extra_noise(sigma_out * self.gain_ma * 1e-3)
        } else {
            PhotodetectorModel {
                noise_sigma_a: 0.0,
                ..cfg.pd
            }
        };
        let adc = if noisy && self.full_scale > 0.0 {
            let lo = -self.split.negative_sum();
            let headroom = self.full_scale / 8.0;
            Some(Quantizer::new(
                cfg.adc_bits,
                lo - headroom,
                lo + self.full_scale + headroom,
            )?)
        } else {
            None
        };

        let mut physical = Vec::with_capacity(n);
        for (q, spectrum) in routed.iter().enumerate() {
            let (pos_band, rest) = microring_split(spectrum, &self.plan.positive_teeth)?;
            let (neg_band, _) = microring_split(&rest, &self.plan.negative_teeth)?;
            let seed = seed::derive(cfg.noise.seed, &[stream, q as u64]);
            let current =
                balanced_detect(&pd, pos_band.total_power(), neg_band.total_power(), seed);
            let mut y = current / self.gain_ma;
            if let Some(adc) = &adc {
                y = adc.quantize(y);
            }
            physical.push(y * self.scale);
        }
        Ok((0..n)
            .map(|j| physical[self.plan.physical_port(j)])
            .collect())
    }

    /// Only the valid outputs `0..=len(x) - k`.
    pub fn run_valid(&self, x: &[f64], stream: u64) -> Result<Vec<f64>> {
        let mut out = self.run(x, stream)?;
        out.truncate(x.len() + 1 - self.plan.kernel_len);
        Ok(out)
    }
}

/// One-shot convolution; returns all N logical outputs.
pub fn opu_convolve(
    config: &OpuConfig,
    kernel: &Kernel,
    x: &[f64],
    stream: u64,
) -> Result<Vec<f64>> {
    Opu::new(config.clone())?.convolve(kernel, x, stream)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ElementaryOp {
    Multiply,
    Add,
    Subtract,
    Mac,
}

impl ElementaryOp {
    pub const ALL: [ElementaryOp; 4] = [Self::Multiply, Self::Add, Self::Subtract, Self::Mac];

    pub fn name(self) -> &'static str {
        match self {
            Self::Multiply => "multiply",
            Self::Add => "add",
            Self::Subtract => "subtract",
            Self::Mac => "mac",
        }
    }

    /// Input vector, kernel and output full scale for operands `a`, `b`.
    pub fn lower(self, a: &[f64], b: &[f64]) -> Result<(Vec<f64>, Kernel, f64)> {
        let scalar = |v: &[f64], name: &'static str| -> Result<f64> {
            match v {
                [s] => Ok(*s),
                _ => Err(Error::param(name, "expects one value")),
            }
        };
        Ok(match self {
            Self::Multiply => (
                vec![scalar(a, "a")?],
                Kernel::new(vec![scalar(b, "b")?])?,
                1.0,
            ),
            Self::Add => (
                vec![scalar(a, "a")?, scalar(b, "b")?],
                Kernel::new(vec![1.0, 1.0])?,
                2.0,
            ),
            Self::Subtract => (
                vec![scalar(a, "a")?, scalar(b, "b")?],
                Kernel::new(vec![1.0, -1.0])?,
                2.0,
            ),
            Self::Mac => {
                if a.len() != b.len() || a.is_empty() {
                    return Err(Error::shape(format!("{} weights", a.len()), b.len()));
                }
                let fs = b.iter().map(|w| w.abs().max(1.0)).sum();
                (a.to_vec(), Kernel::new(b.to_vec())?, fs)
            }
        })
    }

    /// Exact result.
    pub fn reference(self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            Self::Multiply => a[0] * b[0],
            Self::Add => a[0] + b[0],
            Self::Subtract => a[0] - b[0],
            Self::Mac => a.iter().zip(b).map(|(x, w)| x * w).sum(),
        }
    }
}

/// Runs one elementary operation through the OPU and returns output 0.
pub fn elementary_op(
    opu: &Opu,
    op: ElementaryOp,
    a: &[f64],
    b: &[f64],
    stream: u64,
) -> Result<f64> {
    let (x, kernel, fs) = op.lower(a, b)?;
    let loaded = opu.load(&kernel)?.with_full_scale(fs);
    Ok(loaded.run(&x, stream)?[0])
}
