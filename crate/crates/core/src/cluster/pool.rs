use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::opu::{peak_tops, plan_wavelengths_with, Opu, OpuConfig, WavelengthPlan};

/// OPUs sharing one symbol rate and input width. OPU ids are indices.
#[derive(Debug, Clone)]
pub struct OpuPool {
    opus: Vec<Opu>,
}

impl OpuPool {
    pub fn new(configs: Vec<OpuConfig>) -> Result<Self> {
        Self::from_opus(configs.into_iter().map(Opu::new).collect::<Result<_>>()?)
    }

    pub fn uniform(config: OpuConfig, count: usize) -> Result<Self> {
        Self::new(vec![config; count])
    }

    pub fn from_opus(opus: Vec<Opu>) -> Result<Self> {
        let first = opus
            .first()
            .ok_or_else(|| Error::param("pool", "needs at least one OPU"))?;
        let (baud, used) = (first.config().baud_ghz, first.used_ports());
        for (i, o) in opus.iter().enumerate().skip(1) {
            if (o.config().baud_ghz - baud).abs() > 1e-9 * baud {
                return Err(Error::Configuration(format!(
                    "OPU {i} runs at {} GBd, pool runs at {baud} GBd",
                    o.config().baud_ghz
                )));
            }
            if o.used_ports() != used {
                return Err(Error::Configuration(format!(
                    "OPU {i} uses {} input ports, pool uses {used}",
                    o.used_ports()
                )));
            }
        }
        Ok(Self { opus })
    }

    pub fn len(&self) -> usize {
        self.opus.len()
    }

    pub fn is_empty(&self) -> bool {
        self.opus.is_empty()
    }

    pub fn opus(&self) -> &[Opu] {
        &self.opus
    }

    pub fn baud_ghz(&self) -> f64 {
        self.opus[0].config().baud_ghz
    }

    /// One symbol slot, ns.
    pub fn slot_ns(&self) -> f64 {
        1.0 / self.baud_ghz()
    }

    pub fn used_ports(&self) -> usize {
        self.opus[0].used_ports()
    }

    /// Sum over OPUs of the best single-kernel peak rate.
    pub fn peak_tops_bound(&self) -> f64 {
        let n = self.used_ports();
        let best = (1..=n)
            .filter_map(|k| peak_tops(n, k, self.baud_ghz()).ok())
            .fold(0.0, f64::max);
        best * self.len() as f64
    }

    /// Wavelength plan of the shared comb for a `k`-tap kernel.
    pub fn plan(&self, k: usize) -> Result<WavelengthPlan> {
        let o = &self.opus[0];
        plan_wavelengths_with(&o.config().awgr, k, o.comb().len(), o.config().layout)
    }
}

/// Data channel handed to one edge node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeChannel {
    pub edge: usize,
    pub tooth: usize,
}

/// Gives each edge node its own signal tooth, lowest teeth first. Weight
/// teeth are never handed out.
pub fn wavelength_allocate(plan: &WavelengthPlan, edges: usize) -> Result<Vec<EdgeChannel>> {
    if edges > plan.signal_teeth.len() {
        return Err(Error::Capacity {
            needed: edges,
            available: plan.signal_teeth.len(),
        });
    }
    Ok(plan
        .signal_teeth
        .iter()
        .take(edges)
        .enumerate()
        .map(|(edge, &tooth)| EdgeChannel { edge, tooth })
        .collect())
}
