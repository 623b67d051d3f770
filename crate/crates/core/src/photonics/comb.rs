use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform optical frequency grid.
///
/// Tooth `i` sits at `center + (i - tooth_count / 2) * spacing`, with
/// integer division, so the center tooth of an odd grid is exactly the
/// center frequency and a single-tooth grid has zero span.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrequencyGrid {
    pub center_thz: f64,
    pub spacing_ghz: f64,
    pub tooth_count: usize,
}

impl FrequencyGrid {
    pub fn new(center_thz: f64, spacing_ghz: f64, tooth_count: usize) -> Result<Self> {
        if !(spacing_ghz > 0.0) || !spacing_ghz.is_finite() {
            return Err(Error::param(
                "spacing",
                format!("must be positive, got {spacing_ghz}"),
            ));
        }
        if tooth_count == 0 {
            return Err(Error::param("tooth_count", "must be at least 1"));
        }
        if !center_thz.is_finite() {
            return Err(Error::param("center", "must be finite"));
        }
        Ok(Self {
            center_thz,
            spacing_ghz,
            tooth_count,
        })
    }

    pub fn center_index(&self) -> usize {
        self.tooth_count / 2
    }

    /// Signed tooth offset from the center tooth.
    pub fn offset(&self, index: usize) -> i64 {
        index as i64 - self.center_index() as i64
    }

    pub fn frequency_ghz(&self, index: usize) -> f64 {
        self.center_thz * 1e3 + self.offset(index) as f64 * self.spacing_ghz
    }

    pub fn span_ghz(&self) -> f64 {
        (self.tooth_count - 1) as f64 * self.spacing_ghz
    }

    pub(crate) fn same_as(&self, other: &FrequencyGrid) -> bool {
        self.tooth_count == other.tooth_count
            && (self.spacing_ghz - other.spacing_ghz).abs() <= 1e-9 * self.spacing_ghz
            && (self.center_thz - other.center_thz).abs() <= 1e-12 * self.center_thz.abs().max(1.0)
    }
}

/// Per-tooth optical power (mW) on a [`FrequencyGrid`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CombSpectrum {
    grid: FrequencyGrid,
    power_mw: Vec<f64>,
}

impl CombSpectrum {
    pub fn new(grid: FrequencyGrid, power_mw: Vec<f64>) -> Result<Self> {
        if power_mw.len() != grid.tooth_count {
            return Err(Error::shape(
                format!("{} tooth powers", grid.tooth_count),
                format!("{}", power_mw.len()),
            ));
        }
        if let Some((i, &p)) = power_mw
            .iter()
            .enumerate()
            .find(|(_, p)| !(**p >= 0.0) || !p.is_finite())
        {
            return Err(Error::Range {
                index: i,
                value: p,
                lo: 0.0,
                hi: f64::INFINITY,
            });
        }
        Ok(Self { grid, power_mw })
    }

    pub fn dark(grid: FrequencyGrid) -> Self {
        Self {
            power_mw: vec![0.0; grid.tooth_count],
            grid,
        }
    }

    pub fn grid(&self) -> &FrequencyGrid {
        &self.grid
    }

    pub fn powers(&self) -> &[f64] {
        &self.power_mw
    }

    pub fn power(&self, index: usize) -> f64 {
        self.power_mw[index]
    }

    pub fn len(&self) -> usize {
        self.power_mw.len()
    }

    pub fn is_empty(&self) -> bool {
        self.power_mw.is_empty()
    }

    pub fn total_power(&self) -> f64 {
        self.power_mw.iter().sum()
    }

    /// Multiplies every tooth by a nonnegative factor.
    pub fn scaled(&self, factor: f64) -> Self {
        debug_assert!(factor >= 0.0);
        Self {
            grid: self.grid,
            power_mw: self.power_mw.iter().map(|p| p * factor).collect(),
        }
    }

    pub(crate) fn add_to(&mut self, index: usize, power: f64) {
        self.power_mw[index] += power;
    }
}

/// Builds a comb whose center tooth carries 1 mW and whose tooth powers fall
/// off linearly in dB with distance from the center.
pub fn generate_comb(
    line_count: usize,
    spacing_ghz: f64,
    center_thz: f64,
    flatness_db_per_line: f64,
) -> Result<CombSpectrum> {
    if !(flatness_db_per_line >= 0.0) {
        return Err(Error::param(
            "flatness",
            "roll-off must be nonnegative dB per line",
        ));
    }
    let grid = FrequencyGrid::new(center_thz, spacing_ghz, line_count)?;
    let powers = (0..line_count)
        .map(|i| db_to_linear(-flatness_db_per_line * grid.offset(i).unsigned_abs() as f64))
        .collect();
    CombSpectrum::new(grid, powers)
}

/// Keeps every `keep_every`-th tooth (the survivors include the center tooth)
/// and returns them on a grid whose spacing is `keep_every` times coarser.
pub fn decimate_comb(comb: &CombSpectrum, keep_every: usize) -> Result<CombSpectrum> {
    if keep_every == 0 {
        return Err(Error::param("keep_every", "must be at least 1"));
    }
    let grid = comb.grid();
    let c = grid.center_index();
    let survivors: Vec<usize> = (0..grid.tooth_count)
        .filter(|&i| (i as i64 - c as i64).rem_euclid(keep_every as i64) == 0)
        .collect();
    let n = survivors.len();
    let center_thz = grid.frequency_ghz(survivors[n / 2]) / 1e3;
    let new_grid = FrequencyGrid::new(center_thz, grid.spacing_ghz * keep_every as f64, n)?;
    CombSpectrum::new(new_grid, survivors.iter().map(|&i| comb.power(i)).collect())
}

/// Decimates to an explicit target spacing, which must be an integer
/// multiple of the source spacing.
pub fn decimate_to_spacing(comb: &CombSpectrum, target_spacing_ghz: f64) -> Result<CombSpectrum> {
    let ratio = target_spacing_ghz / comb.grid().spacing_ghz;
    let keep = ratio.round();
    if keep < 1.0 || (ratio - keep).abs() > 1e-9 * ratio.max(1.0) {
        return Err(Error::param(
            "keep_every",
            format!(
                "target spacing {target_spacing_ghz} GHz is not a multiple of {} GHz",
                comb.grid().spacing_ghz
            ),
        ));
    }
    decimate_comb(comb, keep as usize)
}

/// Per-tooth attenuation in dB. [`WaveshaperProfile::BLOCKED`] suppresses a
/// tooth completely.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveshaperProfile {
    attenuation_db: Vec<f64>,
}

impl WaveshaperProfile {
    pub const BLOCKED: f64 = f64::INFINITY;

    pub fn new(attenuation_db: Vec<f64>) -> Result<Self> {
        if let Some((i, &a)) = attenuation_db
            .iter()
            .enumerate()
            .find(|(_, a)| !(**a >= 0.0))
        {
            return Err(Error::Range {
                index: i,
                value: a,
                lo: 0.0,
                hi: f64::INFINITY,
            });
        }
        Ok(Self { attenuation_db })
    }

    pub fn flat(len: usize) -> Self {
        Self {
            attenuation_db: vec![0.0; len],
        }
    }

    pub fn attenuation_db(&self) -> &[f64] {
        &self.attenuation_db
    }

    pub fn len(&self) -> usize {
        self.attenuation_db.len()
    }

    pub fn is_empty(&self) -> bool {
        self.attenuation_db.is_empty()
    }

    pub fn is_blocked(&self, index: usize) -> bool {
        self.attenuation_db[index].is_infinite()
    }

    /// Tooth-wise sum in dB, i.e. the profile of two waveshapers in series.
    pub fn then(&self, other: &WaveshaperProfile) -> Result<Self> {
        if self.len() != other.len() {
            return Err(Error::shape(self.len(), other.len()));
        }
        Ok(Self {
            attenuation_db: self
                .attenuation_db
                .iter()
                .zip(&other.attenuation_db)
                .map(|(a, b)| a + b)
                .collect(),
        })
    }
}

pub fn apply_waveshaper(comb: &CombSpectrum, profile: &WaveshaperProfile) -> Result<CombSpectrum> {
    if profile.len() != comb.len() {
        return Err(Error::shape(
            format!("profile of {} teeth", comb.len()),
            profile.len(),
        ));
    }
    let powers = comb
        .powers()
        .iter()
        .zip(profile.attenuation_db())
        .map(|(&p, &a)| {
            if a.is_infinite() {
                0.0
            } else {
                p * db_to_linear(-a)
            }
        })
        .collect();
    CombSpectrum::new(*comb.grid(), powers)
}

/// Attenuation table that flattens every lit tooth down to the weakest one.
/// Dark teeth are blocked.
pub fn equalize_comb(comb: &CombSpectrum) -> Result<WaveshaperProfile> {
    let min = comb
        .powers()
        .iter()
        .copied()
        .filter(|&p| p > 0.0)
        .fold(f64::INFINITY, f64::min);
    if !min.is_finite() {
        return Err(Error::EmptyComb);
    }
    let att = comb
        .powers()
        .iter()
        .map(|&p| {
            if p > 0.0 {
                linear_to_db(p / min)
            } else {
                WaveshaperProfile::BLOCKED
            }
        })
        .collect();
    WaveshaperProfile::new(att)
}

/// Splits a spectrum into the selected teeth and the rest. Selected teeth
/// outside the grid are rejected.
pub fn microring_split(
    spectrum: &CombSpectrum,
    selector: &[usize],
) -> Result<(CombSpectrum, CombSpectrum)> {
    let n = spectrum.len();
    let mut in_band = CombSpectrum::dark(*spectrum.grid());
    let mut out_band = spectrum.clone();
    for &i in selector {
        if i >= n {
            return Err(Error::param(
                "selector",
                format!("tooth {i} outside a {n}-tooth grid"),
            ));
        }
        in_band.power_mw[i] = spectrum.power(i);
        out_band.power_mw[i] = 0.0;
    }
    Ok((in_band, out_band))
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(ratio: f64) -> f64 {
    10.0 * ratio.log10()
}
