//! Edge-to-metro optical link: fiber loss to received power, a Gaussian
//! PAM error model, and a threshold FEC abstraction.

use std::f64::consts::SQRT_2;
use std::io::Write;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::function::erf::{erfc, erfc_inv};

use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinkModel {
    pub launch_power_dbm: f64,
    pub fiber_length_km: f64,
    pub fiber_loss_db_per_km: f64,
    pub extra_attenuation_db: f64,
    pub propagation_delay_us_per_km: f64,
}

impl Default for LinkModel {
    /// 80 km metro span, -15 dBm at the receiver.
    fn default() -> Self {
        Self {
            launch_power_dbm: 1.0,
            fiber_length_km: 80.0,
            fiber_loss_db_per_km: 0.2,
            extra_attenuation_db: 0.0,
            propagation_delay_us_per_km: 5.0,
        }
    }
}

impl LinkModel {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("fiber_length_km", self.fiber_length_km),
            ("fiber_loss_db_per_km", self.fiber_loss_db_per_km),
            ("extra_attenuation_db", self.extra_attenuation_db),
            (
                "propagation_delay_us_per_km",
                self.propagation_delay_us_per_km,
            ),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::param(name, "must be finite and nonnegative"));
            }
        }
        if !self.launch_power_dbm.is_finite() {
            return Err(Error::param("launch_power_dbm", "must be finite"));
        }
        Ok(())
    }

    pub fn with_extra_attenuation(self, db: f64) -> Self {
        Self {
            extra_attenuation_db: db,
            ..self
        }
    }

    /// One-way propagation delay in ns.
    pub fn one_way_delay_ns(&self) -> f64 {
        self.fiber_length_km * self.propagation_delay_us_per_km * 1e3
    }
}

pub fn received_power(link: &LinkModel) -> f64 {
    link.launch_power_dbm
        - link.fiber_length_km * link.fiber_loss_db_per_km
        - link.extra_attenuation_db
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PamConfig {
    pub levels: u32,
    pub baud_ghz: f64,
}

impl Default for PamConfig {
    fn default() -> Self {
        Self {
            levels: 4,
            baud_ghz: 25.0,
        }
    }
}

impl PamConfig {
    pub fn validate(&self) -> Result<()> {
        if self.levels < 2 || !self.levels.is_power_of_two() {
            return Err(Error::param("levels", "must be a power of two, at least 2"));
        }
        if !(self.baud_ghz > 0.0) {
            return Err(Error::param("baud", "must be positive"));
        }
        Ok(())
    }

    pub fn bits_per_symbol(&self) -> u32 {
        self.levels.trailing_zeros()
    }

    pub fn gross_bitrate_gbps(&self) -> f64 {
        self.baud_ghz * self.bits_per_symbol() as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FecConfig {
    pub code_rate: f64,
    pub pre_fec_ber_threshold: f64,
}

impl Default for FecConfig {
    fn default() -> Self {
        Self {
            code_rate: 0.75,
            pre_fec_ber_threshold: 2e-2,
        }
    }
}

impl FecConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.code_rate > 0.0 && self.code_rate <= 1.0) {
            return Err(Error::param("code_rate", "must be in (0, 1]"));
        }
        if !(self.pre_fec_ber_threshold > 0.0 && self.pre_fec_ber_threshold < 0.5) {
            return Err(Error::param("pre_fec_ber_threshold", "must be in (0, 0.5)"));
        }
        Ok(())
    }

    pub fn net_bitrate_gbps(&self, pam: &PamConfig) -> f64 {
        pam.gross_bitrate_gbps() * self.code_rate
    }
}

/// ROP at which the symbol SNR is 0 dB. `-inf` means a noiseless receiver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RopBerCurve {
    pub noise_floor_dbm: f64,
}

/// ROP where the default curve crosses the default FEC threshold: between
/// the 6 dB and 7 dB attenuation points of the default link.
pub const DEFAULT_CROSSING_ROP_DBM: f64 = -21.5;

impl Default for RopBerCurve {
    fn default() -> Self {
        Self::calibrated(
            &PamConfig::default(),
            FecConfig::default().pre_fec_ber_threshold,
            DEFAULT_CROSSING_ROP_DBM,
        )
        .expect("default calibration is valid")
    }
}

fn q(x: f64) -> f64 {
    0.5 * erfc(x / SQRT_2)
}

fn q_inv(p: f64) -> f64 {
    SQRT_2 * erfc_inv(2.0 * p)
}

fn ber_prefactor(levels: u32) -> f64 {
    let l = levels as f64;
    2.0 * (l - 1.0) / (l * l.log2())
}

impl RopBerCurve {
    /// Places the noise floor so that BER equals `ber` at `rop_dbm`.
    pub fn calibrated(pam: &PamConfig, ber: f64, rop_dbm: f64) -> Result<Self> {
        pam.validate()?;
        let c = ber_prefactor(pam.levels);
        if !(ber > 0.0 && ber < c / 2.0) {
            return Err(Error::param("ber", "outside the range the model can reach"));
        }
        let arg = q_inv(ber / c) * (pam.levels - 1) as f64;
        Ok(Self {
            noise_floor_dbm: rop_dbm - 10.0 * (arg * arg).log10(),
        })
    }

    pub fn snr(&self, rop_dbm: f64) -> f64 {
        10f64.powf((rop_dbm - self.noise_floor_dbm) / 10.0)
    }
}

pub fn ber_from_rop(curve: &RopBerCurve, rop_dbm: f64, pam: &PamConfig) -> f64 {
    let snr = curve.snr(rop_dbm);
    ber_prefactor(pam.levels) * q(snr.sqrt() / (pam.levels - 1) as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransmitStats {
    pub rop_dbm: f64,
    pub coded_bits: usize,
    pub bit_errors: usize,
    pub pre_fec_ber: f64,
    /// Payload bits still wrong after decoding.
    pub post_fec_errors: usize,
    pub decoded: bool,
}

fn gray(v: u32) -> u32 {
    v ^ (v >> 1)
}

fn gray_inverse(mut g: u32) -> u32 {
    let mut v = g;
    while g > 0 {
        g >>= 1;
        v ^= g;
    }
    v
}

/// Sends `payload` over the link and returns what the receiver delivers.
/// Parity is modeled as seeded filler bits that bring the frame up to the
/// code rate.
pub fn transmit_payload(
    payload: &[u8],
    link: &LinkModel,
    pam: &PamConfig,
    fec: &FecConfig,
    curve: &RopBerCurve,
    seed: u64,
) -> Result<(Vec<u8>, TransmitStats)> {
    link.validate()?;
    pam.validate()?;
    fec.validate()?;
    if payload.is_empty() {
        return Err(Error::param("payload", "must not be empty"));
    }
    let mut rng = seed::rng(seed);
    let payload_bits = payload.len() * 8;
    let parity = ((payload_bits as f64) * (1.0 / fec.code_rate - 1.0)).ceil() as usize;
    let bits: Vec<u8> = payload
        .iter()
        .flat_map(|&b| (0..8).rev().map(move |i| (b >> i) & 1))
        .chain((0..parity).map(|_| rng.random_range(0..=1u8)))
        .collect();

    let m = pam.bits_per_symbol() as usize;
    let top = (pam.levels - 1) as f64;
    let rop = received_power(link);
    let snr = curve.snr(rop);
    let sigma = if snr.is_infinite() {
        0.0
    } else {
        top / (2.0 * snr.sqrt())
    };

    let mut received_bits = Vec::with_capacity(bits.len());
    for group in bits.chunks(m) {
        let mut word = 0u32;
        for i in 0..m {
            word = (word << 1) | *group.get(i).unwrap_or(&0) as u32;
        }
        let level = gray_inverse(word) as f64;
        let y = if sigma > 0.0 {
            level + sigma * rng.sample::<f64, _>(StandardNormal)
        } else {
            level
        };
        let decided = gray(y.round().clamp(0.0, top) as u32);
        for i in (0..m).rev() {
            received_bits.push(((decided >> i) & 1) as u8);
        }
    }
    received_bits.truncate(bits.len());

    let bit_errors = bits
        .iter()
        .zip(&received_bits)
        .filter(|(a, b)| a != b)
        .count();
    let pre_fec_ber = bit_errors as f64 / bits.len() as f64;
    let decoded = pre_fec_ber < fec.pre_fec_ber_threshold;
    let (delivered, post_fec_errors) = if decoded {
        (payload.to_vec(), 0)
    } else {
        let raw: Vec<u8> = received_bits[..payload_bits]
            .chunks(8)
            .map(|c| c.iter().fold(0u8, |acc, &b| (acc << 1) | b))
            .collect();
        let errs = bits[..payload_bits]
            .iter()
            .zip(&received_bits[..payload_bits])
            .filter(|(a, b)| a != b)
            .count();
        (raw, errs)
    };
    Ok((
        delivered,
        TransmitStats {
            rop_dbm: rop,
            coded_bits: bits.len(),
            bit_errors,
            pre_fec_ber,
            post_fec_errors,
            decoded,
        },
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub attenuation_db: f64,
    pub rop_dbm: f64,
    pub ber_model: f64,
    pub pre_fec_ber: f64,
    pub decoded: bool,
}

/// Transmits a seeded random payload at each extra attenuation.
pub fn ber_sweep(
    link: &LinkModel,
    pam: &PamConfig,
    fec: &FecConfig,
    curve: &RopBerCurve,
    attenuations_db: &[f64],
    payload_bytes: usize,
    seed: u64,
) -> Result<Vec<SweepPoint>> {
    if attenuations_db.is_empty() {
        return Err(Error::param("attenuations", "sweep range is empty"));
    }
    let mut rng = seed::rng(seed);
    let payload: Vec<u8> = (0..payload_bytes.max(1)).map(|_| rng.random()).collect();
    attenuations_db
        .iter()
        .enumerate()
        .map(|(i, &a)| {
            let l = link.with_extra_attenuation(a);
            let (_, stats) = transmit_payload(
                &payload,
                &l,
                pam,
                fec,
                curve,
                seed::derive(seed, &[i as u64]),
            )?;
            Ok(SweepPoint {
                attenuation_db: a,
                rop_dbm: stats.rop_dbm,
                ber_model: ber_from_rop(curve, stats.rop_dbm, pam),
                pre_fec_ber: stats.pre_fec_ber,
                decoded: stats.decoded,
            })
        })
        .collect()
}

pub fn write_sweep_csv<W: Write>(out: W, points: &[SweepPoint]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for p in points {
        w.serialize(p)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn received_power_examples() {
        let link = LinkModel::default();
        assert!((received_power(&link) + 15.0).abs() < 1e-12);
        let short = LinkModel {
            fiber_length_km: 0.0,
            ..link
        };
        assert_eq!(received_power(&short), 1.0);
        for db in 0..10 {
            let a = received_power(&link.with_extra_attenuation(db as f64));
            let b = received_power(&link.with_extra_attenuation(db as f64 + 1.0));
            assert!((a - b - 1.0).abs() < 1e-12);
        }
        assert_eq!(link.one_way_delay_ns(), 400_000.0);
    }

    #[test]
    fn ber_crosses_threshold_between_six_and_seven_db() {
        let curve = RopBerCurve::default();
        let pam = PamConfig::default();
        let thr = FecConfig::default().pre_fec_ber_threshold;
        assert!(ber_from_rop(&curve, -21.0, &pam) <= thr);
        assert!(ber_from_rop(&curve, -22.0, &pam) > thr);
        assert!((ber_from_rop(&curve, -21.5, &pam) - thr).abs() < 1e-12);
        assert!(ber_from_rop(&curve, 100.0, &pam) < 1e-300);
    }

    #[test]
    fn rates() {
        let pam2 = PamConfig {
            levels: 2,
            baud_ghz: 50.0,
        };
        assert_eq!(pam2.gross_bitrate_gbps(), 50.0);
        let fec = FecConfig {
            code_rate: 1.0,
            ..FecConfig::default()
        };
        assert_eq!(fec.net_bitrate_gbps(&pam2), 50.0);
        assert_eq!(
            FecConfig::default().net_bitrate_gbps(&PamConfig::default()),
            37.5
        );
        assert!(PamConfig {
            levels: 3,
            baud_ghz: 1.0
        }
        .validate()
        .is_err());
    }

    #[test]
    fn gray_round_trip() {
        for v in 0..16 {
            assert_eq!(gray_inverse(gray(v)), v);
            assert_eq!((gray(v) ^ gray(v + 1)).count_ones(), 1);
        }
    }

    #[test]
    fn noiseless_channel() {
        let curve = RopBerCurve {
            noise_floor_dbm: f64::NEG_INFINITY,
        };
        let payload: Vec<u8> = (0..=255).collect();
        let (rx, stats) = transmit_payload(
            &payload,
            &LinkModel::default(),
            &PamConfig::default(),
            &FecConfig::default(),
            &curve,
            1,
        )
        .unwrap();
        assert_eq!(stats.pre_fec_ber, 0.0);
        assert_eq!(rx, payload);
    }

    #[test]
    fn budget_verdicts() {
        let payload: Vec<u8> = (0..20_000u32).map(|i| (i * 37 % 251) as u8).collect();
        let run = |db: f64| {
            transmit_payload(
                &payload,
                &LinkModel::default().with_extra_attenuation(db),
                &PamConfig::default(),
                &FecConfig::default(),
                &RopBerCurve::default(),
                3,
            )
            .unwrap()
        };
        let (rx, ok) = run(0.0);
        assert!(ok.decoded);
        assert_eq!(rx, payload);
        let (rx, bad) = run(7.0);
        assert!(!bad.decoded);
        assert!(bad.post_fec_errors > 0);
        assert_ne!(rx, payload);
    }

    #[test]
    fn sweep_csv_header() {
        let pts = ber_sweep(
            &LinkModel::default(),
            &PamConfig::default(),
            &FecConfig::default(),
            &RopBerCurve::default(),
            &[0.0, 8.0],
            256,
            0,
        )
        .unwrap();
        let mut buf = Vec::new();
        write_sweep_csv(&mut buf, &pts).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("attenuation_db,rop_dbm,ber_model,pre_fec_ber,decoded\n"));
        assert!(ber_sweep(
            &LinkModel::default(),
            &PamConfig::default(),
            &FecConfig::default(),
            &RopBerCurve::default(),
            &[],
            1,
            0
        )
        .is_err());
    }
}
