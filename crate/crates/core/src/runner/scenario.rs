use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cluster::{Job, SchedulePolicy, DEFAULT_OPU_POWER_MW};
use crate::convnet::{Split, TrainConfig};
use crate::error::{Error, Result};
use crate::link::{FecConfig, LinkModel, PamConfig, RopBerCurve};
use crate::opu::{ElementaryOp, NoiseModel, OpuConfig, OpuMode, WeightLayout};
use crate::photonics::CombSource;

/// Environment variable naming the directory relative fixture paths are
/// resolved against. Without it they resolve against the scenario file.
pub const FIXTURE_ROOT_ENV: &str = "OPTOCLOUD_FIXTURES";

/// Bundled MNIST subset.
pub fn bundled_mnist_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data/mnist")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub photonics: Option<PhotonicsSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub opu: Option<OpuSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub convolve: Option<ConvolveSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub convnet: Option<ConvnetSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cluster: Option<ClusterSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub link: Option<LinkSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub energy: Option<EnergySection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub throughput: Option<ThroughputSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhotonicsSection {
    /// Replaces the default comb.
    #[serde(default)]
    pub comb: Option<CombSource>,
}

fn eight() -> usize {
    8
}
fn ten() -> f64 {
    10.0
}
fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OpuSection {
    #[serde(default = "eight")]
    pub ports: usize,
    #[serde(default)]
    pub used_ports: Option<usize>,
    #[serde(default = "ten")]
    pub baud_ghz: f64,
    #[serde(default)]
    pub mode: OpuMode,
    #[serde(default)]
    pub layout: WeightLayout,
    #[serde(default)]
    pub noise: Option<NoiseModel>,
    #[serde(default)]
    pub dac_bits: Option<u32>,
    #[serde(default)]
    pub adc_bits: Option<u32>,
    /// OPUs used for 2D convolutions.
    #[serde(default = "one")]
    pub pool_size: usize,
}

impl Default for OpuSection {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all fields default")
    }
}

impl OpuSection {
    pub fn config(&self, photonics: Option<&PhotonicsSection>) -> Result<OpuConfig> {
        if self.ports < 2 {
            return Err(invalid("opu.ports", "must be at least 2"));
        }
        let mut c = OpuConfig::new(self.ports);
        if let Some(comb) = photonics.and_then(|p| p.comb) {
            c.comb = comb;
        }
        if let Some(n) = self.used_ports {
            if n == 0 || n > self.ports {
                return Err(invalid(
                    "opu.used_ports",
                    format!("must be in 1..={}", self.ports),
                ));
            }
            c = c.with_used_ports(n);
        }
        c.baud_ghz = self.baud_ghz;
        c.mode = self.mode;
        c.layout = self.layout;
        if let Some(n) = self.noise {
            c.noise = n;
        }
        if let Some(b) = self.dac_bits {
            c.dac_bits = b;
        }
        if let Some(b) = self.adc_bits {
            c.adc_bits = b;
        }
        c.validate().map_err(|e| invalid("opu", e.to_string()))?;
        Ok(c)
    }

    pub fn used(&self) -> usize {
        self.used_ports.unwrap_or(self.ports)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum ImageSource {
    Mnist {
        #[serde(default)]
        dir: Option<PathBuf>,
        #[serde(default = "test_split")]
        split: Split,
        #[serde(default)]
        index: usize,
    },
    /// Rows of comma-separated values.
    Csv { path: PathBuf },
}

fn test_split() -> Split {
    Split::Test
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ElementarySection {
    pub op: ElementaryOp,
    #[serde(default = "trials")]
    pub trials: usize,
    /// Multiplies ideal and measured values in the written trace.
    #[serde(default = "unit")]
    pub scale: f64,
}

fn trials() -> usize {
    4096
}
fn unit() -> f64 {
    1.0
}

/// Exactly one of `kernel` (1D), `kernels` (2D) or `elementary` is set.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvolveSection {
    #[serde(default)]
    pub kernel: Option<Vec<f64>>,
    #[serde(default)]
    pub input: Option<Vec<f64>>,
    #[serde(default)]
    pub input_csv: Option<PathBuf>,
    /// Kernel names from the kernel fixture; `["all"]` selects every one.
    #[serde(default)]
    pub kernels: Option<Vec<String>>,
    #[serde(default)]
    pub kernel_fixture: Option<PathBuf>,
    #[serde(default)]
    pub image: Option<ImageSource>,
    #[serde(default)]
    pub elementary: Option<ElementarySection>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    Baud,
    Rop,
    Bits,
}

impl std::str::FromStr for SweepAxis {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|_| {
            Error::param(
                "axis",
                format!("unknown sweep axis {s:?}; expected baud, rop or bits"),
            )
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub axis: SweepAxis,
    /// Baud in GHz, extra attenuation in dB, or bits.
    pub values: Vec<f64>,
    #[serde(default = "trials")]
    pub trials: usize,
    #[serde(default = "five")]
    pub seeds: usize,
}

fn five() -> usize {
    5
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvnetSection {
    #[serde(default)]
    pub mnist_dir: Option<PathBuf>,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub train_images: Option<usize>,
    #[serde(default)]
    pub test_images: Option<usize>,
    /// Saved model read by `eval`; trained on the fly when absent.
    #[serde(default)]
    pub model: Option<PathBuf>,
    /// Images classified with the first layer on OPUs.
    #[serde(default)]
    pub opu_images: usize,
    /// Images whose first-layer trace is recorded.
    #[serde(default)]
    pub first_layer_images: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JobGenerator {
    pub count: usize,
    pub input_len: usize,
    pub kernel_len: usize,
    #[serde(default)]
    pub interval_ns: f64,
    #[serde(default = "one")]
    pub edges: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClusterSection {
    pub opus: usize,
    #[serde(default)]
    pub jobs: Vec<Job>,
    #[serde(default)]
    pub generate: Option<JobGenerator>,
    #[serde(default)]
    pub policy: SchedulePolicy,
    #[serde(default = "opu_power")]
    pub opu_power_mw: f64,
    /// Kernel length used for the wavelength allocation report.
    #[serde(default = "three")]
    pub plan_kernel_len: usize,
}

fn opu_power() -> f64 {
    DEFAULT_OPU_POWER_MW
}
fn three() -> usize {
    3
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkSection {
    #[serde(default)]
    pub model: LinkModel,
    #[serde(default)]
    pub pam: PamConfig,
    #[serde(default)]
    pub fec: FecConfig,
    #[serde(default)]
    pub curve: Option<RopBerCurve>,
    #[serde(default = "megabyte")]
    pub payload_bytes: usize,
}

fn megabyte() -> usize {
    1 << 20
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnergySection {
    #[serde(default)]
    pub fixture: Option<PathBuf>,
    #[serde(default = "pool_tops")]
    pub tops: f64,
}

fn pool_tops() -> f64 {
    3.6
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThroughputPoint {
    pub ports: usize,
    pub k: usize,
    pub baud_ghz: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThroughputSection {
    pub points: Vec<ThroughputPoint>,
    /// Report written by `run-cluster`; its achieved rate is included if
    /// the file exists.
    #[serde(default)]
    pub cluster_report: Option<PathBuf>,
}

pub(crate) fn invalid(path: &str, message: impl Into<String>) -> Error {
    Error::Validation {
        path: path.to_string(),
        message: message.into(),
    }
}

/// A parsed scenario plus the directory its relative paths resolve against.
#[derive(Debug, Clone)]
pub struct LoadedScenario {
    pub scenario: Scenario,
    pub base_dir: PathBuf,
}

impl LoadedScenario {
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let scenario: Scenario =
            serde_json::from_str(text).map_err(|e| invalid("scenario", e.to_string()))?;
        let base_dir = std::env::var_os(FIXTURE_ROOT_ENV)
            .map(PathBuf::from)
            .unwrap_or_else(|| base_dir.to_path_buf());
        let loaded = Self { scenario, base_dir };
        loaded.check_fixtures()?;
        loaded.check_sections()?;
        Ok(loaded)
    }

    /// Reads a scenario file, or a bundled scenario by name.
    pub fn load(path_or_name: &str) -> Result<Self> {
        let path = Path::new(path_or_name);
        if path.exists() {
            let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
            return Self::parse(&std::fs::read_to_string(path)?, &dir);
        }
        match super::bundled_scenario(path_or_name) {
            Some(text) => Self::parse(text, &std::env::current_dir()?),
            None => Err(Error::MissingFixture(path.to_path_buf())),
        }
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    fn require(&self, p: &Option<PathBuf>) -> Result<()> {
        match p {
            Some(p) if !self.resolve(p).exists() => Err(Error::MissingFixture(self.resolve(p))),
            _ => Ok(()),
        }
    }

    fn check_fixtures(&self) -> Result<()> {
        let s = &self.scenario;
        if let Some(c) = &s.convolve {
            self.require(&c.input_csv)?;
            self.require(&c.kernel_fixture)?;
            match &c.image {
                Some(ImageSource::Csv { path }) => self.require(&Some(path.clone()))?,
                Some(ImageSource::Mnist { dir, .. }) => self.require(dir)?,
                None => {}
            }
        }
        if let Some(n) = &s.convnet {
            self.require(&n.mnist_dir)?;
        }
        if let Some(e) = &s.energy {
            self.require(&e.fixture)?;
        }
        Ok(())
    }

    fn check_sections(&self) -> Result<()> {
        let s = &self.scenario;
        if s.opu.is_some() {
            self.opu_config()?;
            if self.opu().pool_size == 0 {
                return Err(invalid("opu.pool_size", "must be at least 1"));
            }
        }
        if let Some(l) = &s.link {
            l.model
                .validate()
                .map_err(|e| invalid("link.model", e.to_string()))?;
            l.pam
                .validate()
                .map_err(|e| invalid("link.pam", e.to_string()))?;
            l.fec
                .validate()
                .map_err(|e| invalid("link.fec", e.to_string()))?;
        }
        if let Some(c) = &s.cluster {
            if c.opus == 0 {
                return Err(invalid("cluster.opus", "must be at least 1"));
            }
        }
        Ok(())
    }

    /// SHA-256 of the scenario's canonical JSON.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(&self.scenario).expect("scenario serializes");
        hex::encode(Sha256::digest(&bytes))
    }

    pub fn opu(&self) -> OpuSection {
        self.scenario.opu.clone().unwrap_or_default()
    }

    pub fn opu_config(&self) -> Result<OpuConfig> {
        self.opu().config(self.scenario.photonics.as_ref())
    }

    pub fn mnist_dir(&self, dir: &Option<PathBuf>) -> PathBuf {
        dir.as_ref()
            .map(|d| self.resolve(d))
            .unwrap_or_else(bundled_mnist_dir)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_are_rejected_with_a_path() {
        let dir = Path::new(".");
        let err = LoadedScenario::parse(r#"{"name": "x", "seed": 1, "opu": {"portz": 8}}"#, dir)
            .unwrap_err();
        assert!(err.to_string().contains("portz"), "{err}");
        assert!(LoadedScenario::parse(r#"{"name": "x"}"#, dir).is_err());
    }

    #[test]
    fn missing_fixture_is_reported() {
        let text = r#"{"name": "x", "seed": 1, "energy": {"fixture": "nope.json"}}"#;
        assert!(matches!(
            LoadedScenario::parse(text, Path::new("/nonexistent")),
            Err(Error::MissingFixture(_))
        ));
    }

    #[test]
    fn hash_is_stable_and_seed_sensitive() {
        let a = LoadedScenario::parse(r#"{"name": "x", "seed": 1}"#, Path::new(".")).unwrap();
        let b = LoadedScenario::parse(r#"{ "seed": 1, "name": "x" }"#, Path::new(".")).unwrap();
        let c = LoadedScenario::parse(r#"{"name": "x", "seed": 2}"#, Path::new(".")).unwrap();
        assert_eq!(a.hash(), b.hash());
        assert_ne!(a.hash(), c.hash());
        assert_eq!(a.hash().len(), 64);
    }

    #[test]
    fn opu_section_validation() {
        let bad = OpuSection {
            used_ports: Some(9),
            ..OpuSection::default()
        };
        let err = bad.config(None).unwrap_err().to_string();
        assert!(err.contains("opu.used_ports"), "{err}");
        let cfg = OpuSection::default().config(None).unwrap();
        assert_eq!(cfg.used_input_ports.len(), 8);
        assert!("rop".parse::<SweepAxis>().is_ok() && "x".parse::<SweepAxis>().is_err());
    }
}
