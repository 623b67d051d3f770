//! N×N arrayed waveguide grating router.
//!
//! Ports are 0-based. A tooth whose offset from the alignment tooth is `m`
//! (mod N) entering input `p` leaves on output `q = (p - m) mod N`, so the
//! residue class routed from `p` to `q` is `(p - q) mod N`. Teeth one FSR
//! (N channels) apart share a route.

use serde::{Deserialize, Serialize};

use super::comb::CombSpectrum;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Passband {
    /// Each tooth reaches exactly one output port.
    Ideal,
    /// Gaussian passband with the given 3 dB full width. Detuned adjacent
    /// ports pick up crosstalk; total power is conserved.
    Gaussian { fwhm_ghz: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AwgrSpec {
    pub ports: usize,
    pub channel_spacing_ghz: f64,
    /// Tooth index at which input `p` maps to output `p` in FSR 0.
    pub center_alignment: usize,
    #[serde(default = "ideal")]
    pub passband: Passband,
}

fn ideal() -> Passband {
    Passband::Ideal
}

impl AwgrSpec {
    pub fn new(ports: usize, channel_spacing_ghz: f64, center_alignment: usize) -> Result<Self> {
        let spec = Self {
            ports,
            channel_spacing_ghz,
            center_alignment,
            passband: Passband::Ideal,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_passband(mut self, passband: Passband) -> Result<Self> {
        self.passband = passband;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.ports == 0 {
            return Err(Error::param("ports", "must be at least 1"));
        }
        if !(self.channel_spacing_ghz > 0.0) {
            return Err(Error::param("channel_spacing", "must be positive"));
        }
        if let Passband::Gaussian { fwhm_ghz } = self.passband {
            if !(fwhm_ghz > 0.0) {
                return Err(Error::param("fwhm", "must be positive"));
            }
        }
        Ok(())
    }

    pub fn fsr_ghz(&self) -> f64 {
        self.ports as f64 * self.channel_spacing_ghz
    }

    fn offset(&self, tooth: usize) -> i64 {
        tooth as i64 - self.center_alignment as i64
    }

    /// Offset of `tooth` from the alignment tooth, reduced mod N.
    pub fn residue(&self, tooth: usize) -> usize {
        self.offset(tooth).rem_euclid(self.ports as i64) as usize
    }

    /// FSR index `n` of `tooth`; FSR 0 starts at the alignment tooth.
    pub fn fsr_index(&self, tooth: usize) -> i64 {
        self.offset(tooth).div_euclid(self.ports as i64)
    }

    /// Residue class carried from input `p` to output `q`.
    pub fn transparent_residue(&self, input_port: usize, output_port: usize) -> usize {
        (input_port + self.ports - output_port % self.ports) % self.ports
    }

    pub fn output_port(&self, input_port: usize, tooth: usize) -> Result<usize> {
        if input_port >= self.ports {
            return Err(Error::InvalidPort {
                port: input_port,
                ports: self.ports,
            });
        }
        Ok(route(self.ports, input_port, self.residue(tooth)))
    }
}

fn route(ports: usize, input_port: usize, residue: usize) -> usize {
    (input_port + ports - residue) % ports
}

/// Output port for input `p` and a signed offset `m` from the alignment tooth.
pub fn awgr_output_port(spec: &AwgrSpec, input_port: usize, offset: i64) -> Result<usize> {
    if input_port >= spec.ports {
        return Err(Error::InvalidPort {
            port: input_port,
            ports: spec.ports,
        });
    }
    Ok(route(
        spec.ports,
        input_port,
        offset.rem_euclid(spec.ports as i64) as usize,
    ))
}

/// Routes one spectrum per input port onto the output ports.
pub fn route_spectra(spec: &AwgrSpec, inputs: &[CombSpectrum]) -> Result<Vec<CombSpectrum>> {
    let n = spec.ports;
    if inputs.len() != n {
        return Err(Error::shape(format!("{n} input spectra"), inputs.len()));
    }
    let grid = *inputs[0].grid();
    if inputs.iter().any(|s| !s.grid().same_as(&grid)) {
        return Err(Error::Configuration(
            "input spectra do not share one grid".into(),
        ));
    }
    if (grid.spacing_ghz - spec.channel_spacing_ghz).abs() > 1e-9 * spec.channel_spacing_ghz {
        return Err(Error::Configuration(format!(
            "grid spacing {} GHz differs from AWGR channel spacing {} GHz",
            grid.spacing_ghz, spec.channel_spacing_ghz
        )));
    }

    // Fraction of a tooth's power reaching the port `d` positions (circular)
    // away from its nominal output.
    let spill: Vec<f64> = match spec.passband {
        Passband::Ideal => {
            let mut s = vec![0.0; n];
            s[0] = 1.0;
            s
        }
        Passband::Gaussian { fwhm_ghz } => {
            let raw: Vec<f64> = (0..n)
                .map(|d| {
                    let dist = d.min(n - d) as f64 * spec.channel_spacing_ghz;
                    (-4.0 * std::f64::consts::LN_2 * (dist / fwhm_ghz).powi(2)).exp()
                })
                .collect();
            let total: f64 = raw.iter().sum();
            raw.into_iter().map(|r| r / total).collect()
        }
    };

    let mut outputs = vec![CombSpectrum::dark(grid); n];
    for (p, input) in inputs.iter().enumerate() {
        for (tooth, &power) in input.powers().iter().enumerate() {
            if power == 0.0 {
                continue;
            }
            let q = route(n, p, spec.residue(tooth));
            for (d, &frac) in spill.iter().enumerate() {
                if frac > 0.0 {
                    outputs[(q + d) % n].add_to(tooth, power * frac);
                }
            }
        }
    }
    Ok(outputs)
}
