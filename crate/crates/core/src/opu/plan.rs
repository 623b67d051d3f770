use serde::{Deserialize, Serialize};

use super::kernel::SplitKernel;
use crate::error::{Error, Result};
use crate::photonics::{equalize_comb, AwgrSpec, CombSpectrum, WaveshaperProfile};

/// Where the k weight residue classes sit inside each FSR.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightLayout {
    /// Residues `0..k`.
    #[default]
    Leading,
    /// Residues `N-k..N`, the last channels of each FSR. Output ports are
    /// rotated by `N-k` relative to `Leading`.
    Trailing,
}

/// Assignment of comb teeth to positive weights, negative weights and
/// signal traffic for one AWGR and kernel length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WavelengthPlan {
    pub ports: usize,
    pub kernel_len: usize,
    pub layout: WeightLayout,
    pub positive_fsr_index: i64,
    pub negative_fsr_index: i64,
    /// `positive_teeth[d]` carries `pos(d)`.
    pub positive_teeth: Vec<usize>,
    pub negative_teeth: Vec<usize>,
    /// Non-weight teeth of the two-FSR cycle, ascending.
    pub signal_teeth: Vec<usize>,
    pub comb_teeth: usize,
}

impl WavelengthPlan {
    /// First residue class carrying a weight.
    pub fn residue_offset(&self) -> usize {
        match self.layout {
            WeightLayout::Leading => 0,
            WeightLayout::Trailing => self.ports - self.kernel_len,
        }
    }

    /// Weight offset `d` carried by residue class `m`, if any.
    pub fn weight_offset(&self, residue: usize) -> Option<usize> {
        let d = (residue + self.ports - self.residue_offset()) % self.ports;
        (d < self.kernel_len).then_some(d)
    }

    /// Physical output port holding logical output `j`.
    pub fn physical_port(&self, logical: usize) -> usize {
        (logical + self.ports - self.residue_offset()) % self.ports
    }

    pub fn weight_teeth(&self) -> impl Iterator<Item = usize> + '_ {
        self.positive_teeth
            .iter()
            .chain(&self.negative_teeth)
            .copied()
    }

    /// Passes the weight teeth and blocks everything else.
    pub fn compute_filter(&self) -> WaveshaperProfile {
        let mut att = vec![WaveshaperProfile::BLOCKED; self.comb_teeth];
        for t in self.weight_teeth() {
            att[t] = 0.0;
        }
        WaveshaperProfile::new(att).expect("attenuations are valid")
    }
}

pub fn plan_wavelengths(awgr: &AwgrSpec, k: usize, comb_teeth: usize) -> Result<WavelengthPlan> {
    plan_wavelengths_with(awgr, k, comb_teeth, WeightLayout::Leading)
}

pub fn plan_wavelengths_with(
    awgr: &AwgrSpec,
    k: usize,
    comb_teeth: usize,
    layout: WeightLayout,
) -> Result<WavelengthPlan> {
    awgr.validate()?;
    let n = awgr.ports;
    if k == 0 {
        return Err(Error::param("kernel", "needs at least one weight"));
    }
    if k > n {
        return Err(Error::KernelTooLong { k, ports: n });
    }

    // FSRs whose N teeth all exist on the comb, lowest first.
    let mut full = Vec::new();
    let mut t = 0;
    while t < comb_teeth {
        let fsr = awgr.fsr_index(t);
        let start = t as i64 - awgr.residue(t) as i64;
        if start >= 0 && (start as usize) + n <= comb_teeth && !full.contains(&fsr) {
            full.push(fsr);
        }
        t += 1;
    }
    if full.len() < 2 {
        return Err(Error::InsufficientComb {
            teeth: comb_teeth,
            needed: 2 * n,
        });
    }
    let (pos_fsr, neg_fsr) = (full[0], full[1]);
    let first_tooth = |fsr: i64| (awgr.center_alignment as i64 + fsr * n as i64) as usize;

    let r0 = match layout {
        WeightLayout::Leading => 0,
        WeightLayout::Trailing => n - k,
    };
    let teeth_for =
        |fsr: i64| -> Vec<usize> { (0..k).map(|d| first_tooth(fsr) + (r0 + d) % n).collect() };
    let positive_teeth = teeth_for(pos_fsr);
    let negative_teeth = teeth_for(neg_fsr);

    let mut signal_teeth: Vec<usize> = [pos_fsr, neg_fsr]
        .iter()
        .flat_map(|&f| (0..n).map(move |m| first_tooth(f) + m))
        .filter(|t| !positive_teeth.contains(t) && !negative_teeth.contains(t))
        .collect();
    signal_teeth.sort_unstable();

    Ok(WavelengthPlan {
        ports: n,
        kernel_len: k,
        layout,
        positive_fsr_index: pos_fsr,
        negative_fsr_index: neg_fsr,
        positive_teeth,
        negative_teeth,
        signal_teeth,
        comb_teeth,
    })
}

/// Waveshaper profile that flattens `comb` to its weakest lit tooth and
/// then imprints the split kernel on the weight teeth.
pub fn load_weights(
    plan: &WavelengthPlan,
    split: &SplitKernel,
    comb: &CombSpectrum,
) -> Result<WaveshaperProfile> {
    if split.positive.len() != plan.kernel_len || split.negative.len() != plan.kernel_len {
        return Err(Error::shape(
            format!("{} weights", plan.kernel_len),
            split.len(),
        ));
    }
    if comb.len() != plan.comb_teeth {
        return Err(Error::shape(
            format!("{} comb teeth", plan.comb_teeth),
            comb.len(),
        ));
    }
    let eq = equalize_comb(comb)?;
    let mut att = eq.attenuation_db().to_vec();
    let assign = |att: &mut Vec<f64>, teeth: &[usize], weights: &[f64]| -> Result<()> {
        for (d, (&tooth, &w)) in teeth.iter().zip(weights).enumerate() {
            if !(0.0..=1.0).contains(&w) {
                return Err(Error::Normalization {
                    offset: d,
                    value: w,
                });
            }
            att[tooth] = if w == 0.0 {
                WaveshaperProfile::BLOCKED
            } else {
                att[tooth] - 10.0 * w.log10()
            };
        }
        Ok(())
    };
    assign(&mut att, &plan.positive_teeth, &split.positive)?;
    assign(&mut att, &plan.negative_teeth, &split.negative)?;
    // Everything outside the weight teeth passes untouched.
    for (t, a) in att.iter_mut().enumerate() {
        if !plan.positive_teeth.contains(&t) && !plan.negative_teeth.contains(&t) {
            *a = 0.0;
        }
    }
    WaveshaperProfile::new(att)
}

/// Reads the weights back from a shaped comb, relative to `unit_power`.
pub fn read_back_weights(
    plan: &WavelengthPlan,
    shaped: &CombSpectrum,
    unit_power: f64,
) -> SplitKernel {
    let read = |teeth: &[usize]| {
        teeth
            .iter()
            .map(|&t| shaped.power(t) / unit_power)
            .collect()
    };
    SplitKernel {
        positive: read(&plan.positive_teeth),
        negative: read(&plan.negative_teeth),
    }
}
