//! Device models as transfer functions on intensity spectra and sampled
//! drive signals. Phase, coherence and polarization are not modeled.

mod awgr;
mod comb;
mod detector;
mod mzm;

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use awgr::{awgr_output_port, route_spectra, AwgrSpec, Passband};
pub use comb::{
    apply_waveshaper, db_to_linear, decimate_comb, decimate_to_spacing, equalize_comb,
    generate_comb, linear_to_db, microring_split, CombSpectrum, FrequencyGrid, WaveshaperProfile,
};
pub use detector::{balanced_detect, PhotodetectorModel};
pub use mzm::{fractional_delay, inverse_low_pass, low_pass, mzm_modulate, MzmModel, TransferMode};

use crate::error::Result;

/// Recipe for the comb that feeds an OPU: generated at a fine spacing,
/// then decimated to the AWGR channel spacing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CombSource {
    pub lines: usize,
    pub spacing_ghz: f64,
    pub center_thz: f64,
    #[serde(default)]
    pub flatness_db_per_line: f64,
    /// Power of the center tooth after decimation, mW.
    #[serde(default = "one")]
    pub peak_power_mw: f64,
    #[serde(default = "one_usize")]
    pub keep_every: usize,
}

fn one() -> f64 {
    1.0
}

fn one_usize() -> usize {
    1
}

impl CombSource {
    /// 21 GHz electro-optic comb decimated to 84 GHz, with enough lines for
    /// `teeth` surviving teeth.
    pub fn decimated_84ghz(teeth: usize) -> Self {
        Self {
            lines: teeth * 4,
            spacing_ghz: 21.0,
            center_thz: 193.4,
            flatness_db_per_line: 5.0 / (2.0 * teeth as f64),
            peak_power_mw: 1.0,
            keep_every: 4,
        }
    }

    pub fn build(&self) -> Result<CombSpectrum> {
        let fine = generate_comb(
            self.lines,
            self.spacing_ghz,
            self.center_thz,
            self.flatness_db_per_line,
        )?;
        let comb = decimate_comb(&fine, self.keep_every)?;
        if !(self.peak_power_mw > 0.0) {
            return Err(crate::Error::param("peak_power", "must be positive"));
        }
        Ok(comb.scaled(self.peak_power_mw))
    }
}

/// Device parameter file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceConfig {
    pub comb: CombSource,
    pub awgr: AwgrSpec,
    #[serde(default)]
    pub mzm: MzmModel,
    #[serde(default)]
    pub photodetector: PhotodetectorModel,
}

impl DeviceConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.awgr.validate()?;
        cfg.mzm.validate()?;
        cfg.photodetector.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Writes `tooth,frequency_ghz,power_mw` rows.
pub fn write_spectrum_csv<W: Write>(spectrum: &CombSpectrum, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["tooth", "frequency_ghz", "power_mw"])?;
    for (i, p) in spectrum.powers().iter().enumerate() {
        w.write_record([
            i.to_string(),
            spectrum.grid().frequency_ghz(i).to_string(),
            p.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decimated_source_has_requested_teeth() {
        let comb = CombSource::decimated_84ghz(16).build().unwrap();
        assert_eq!(comb.len(), 16);
        assert_eq!(comb.grid().spacing_ghz, 84.0);
        assert_eq!(comb.power(comb.grid().center_index()), 1.0);
    }

    #[test]
    fn device_config_rejects_unknown_keys() {
        let good = r#"{
            "comb": {"lines": 64, "spacing_ghz": 21.0, "center_thz": 193.4, "keep_every": 4},
            "awgr": {"ports": 8, "channel_spacing_ghz": 84.0, "center_alignment": 8}
        }"#;
        let cfg = DeviceConfig::from_json(good).unwrap();
        assert_eq!(cfg.awgr.passband, Passband::Ideal);
        assert_eq!(cfg.photodetector.responsivity_a_per_w, 0.65);

        let bad = good.replace("\"keep_every\"", "\"keep_evry\"");
        assert!(DeviceConfig::from_json(&bad).is_err());
    }

    #[test]
    fn spectrum_csv_layout() {
        let comb = generate_comb(3, 84.0, 193.4, 0.0).unwrap();
        let mut buf = Vec::new();
        write_spectrum_csv(&comb, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "tooth,frequency_ghz,power_mw");
        assert_eq!(lines[1], "0,193316,1");
        assert_eq!(lines.len(), 4);
    }
}
