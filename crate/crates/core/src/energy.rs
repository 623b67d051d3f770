//! Electrical power roll-up for an OPU and its control electronics.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ComponentKind {
    Laser,
    Mzm,
    Mrm,
    Pd,
    EdfaPump,
    TunableFilter,
    Dac,
    Adc,
    Tec,
}

impl ComponentKind {
    pub const ALL: [ComponentKind; 9] = [
        Self::Laser,
        Self::Mzm,
        Self::Mrm,
        Self::Pd,
        Self::EdfaPump,
        Self::TunableFilter,
        Self::Dac,
        Self::Adc,
        Self::Tec,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Laser => "laser",
            Self::Mzm => "mzm",
            Self::Mrm => "mrm",
            Self::Pd => "pd",
            Self::EdfaPump => "edfa_pump",
            Self::TunableFilter => "tunable_filter",
            Self::Dac => "dac",
            Self::Adc => "adc",
            Self::Tec => "tec",
        }
    }
}

/// Unit power per component, mW.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ComponentPowerTable(pub BTreeMap<ComponentKind, f64>);

impl ComponentPowerTable {
    pub fn validate(&self) -> Result<()> {
        for (k, &v) in &self.0 {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::Validation {
                    path: format!("table.{}", k.name()),
                    message: "unit power must be finite and nonnegative".into(),
                });
            }
        }
        Ok(())
    }

    pub fn unit(&self, kind: ComponentKind) -> f64 {
        self.0.get(&kind).copied().unwrap_or(0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scope {
    ComputeOnly,
    ComputeControl,
    FullSystem,
}

impl Scope {
    pub const ALL: [Scope; 3] = [Self::ComputeOnly, Self::ComputeControl, Self::FullSystem];

    pub fn name(self) -> &'static str {
        match self {
            Self::ComputeOnly => "compute_only",
            Self::ComputeControl => "compute_control",
            Self::FullSystem => "full_system",
        }
    }
}

pub type Counts = BTreeMap<ComponentKind, u32>;

/// Component counts per scope. Each scope lists its full inventory and
/// must contain the previous one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BillOfMaterials(pub BTreeMap<Scope, Counts>);

impl BillOfMaterials {
    pub fn counts(&self, scope: Scope) -> Option<&Counts> {
        self.0.get(&scope)
    }

    pub fn validate(&self) -> Result<()> {
        let present: Vec<Scope> = Scope::ALL
            .into_iter()
            .filter(|s| self.0.contains_key(s))
            .collect();
        for pair in present.windows(2) {
            let (inner, outer) = (&self.0[&pair[0]], &self.0[&pair[1]]);
            for (kind, &n) in inner {
                if outer.get(kind).copied().unwrap_or(0) < n {
                    return Err(Error::Validation {
                        path: format!("bom.{}.{}", pair[1].name(), kind.name()),
                        message: format!("fewer than the {n} listed in {}", pair[0].name()),
                    });
                }
            }
        }
        Ok(())
    }

    /// Adds the counts of `other` scope by scope.
    pub fn merged(&self, other: &BillOfMaterials) -> BillOfMaterials {
        let mut out = self.0.clone();
        for (scope, counts) in &other.0 {
            let entry = out.entry(*scope).or_default();
            for (k, n) in counts {
                *entry.entry(*k).or_default() += n;
            }
        }
        BillOfMaterials(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerFixture {
    #[serde(default)]
    pub notes: Vec<String>,
    pub table: ComponentPowerTable,
    pub bom: BillOfMaterials,
}

const DEFAULT_FIXTURE: &str = include_str!("../data/power_default.json");

impl PowerFixture {
    pub fn parse(text: &str) -> Result<Self> {
        let f: Self = serde_json::from_str(text)?;
        f.table.validate()?;
        f.bom.validate()?;
        Ok(f)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn default_fixture() -> Self {
        Self::parse(DEFAULT_FIXTURE).expect("bundled power fixture is valid")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerReport {
    pub scope: Scope,
    pub subtotals_mw: BTreeMap<ComponentKind, f64>,
    pub total_mw: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tops: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub efficiency_mw_per_tops: Option<f64>,
}

impl PowerReport {
    pub fn with_throughput(mut self, tops: f64) -> Result<Self> {
        self.efficiency_mw_per_tops = Some(efficiency(self.total_mw, tops)?);
        self.tops = Some(tops);
        Ok(self)
    }
}

pub fn total_power(
    table: &ComponentPowerTable,
    bom: &BillOfMaterials,
    scope: Scope,
) -> Result<PowerReport> {
    let counts = bom.counts(scope).ok_or_else(|| Error::Validation {
        path: format!("bom.{}", scope.name()),
        message: "scope not listed".into(),
    })?;
    let subtotals_mw: BTreeMap<ComponentKind, f64> = counts
        .iter()
        .filter(|(_, &n)| n > 0)
        .map(|(&k, &n)| (k, n as f64 * table.unit(k)))
        .collect();
    let total_mw = subtotals_mw.values().sum();
    Ok(PowerReport {
        scope,
        subtotals_mw,
        total_mw,
        tops: None,
        efficiency_mw_per_tops: None,
    })
}

pub fn efficiency(total_mw: f64, tops: f64) -> Result<f64> {
    if !(tops > 0.0) {
        return Err(Error::param("tops", "throughput must be positive"));
    }
    Ok(total_mw / tops)
}

/// Electrical power of a laser with the given optical emission, mW.
pub fn laser_power(emission_dbm: f64, wall_plug_eta: f64, tec_mw: f64) -> Result<f64> {
    if !(wall_plug_eta > 0.0 && wall_plug_eta <= 1.0) {
        return Err(Error::param("wall_plug_eta", "must be in (0, 1]"));
    }
    Ok(10f64.powf(emission_dbm / 10.0) / wall_plug_eta + tec_mw)
}

/// Photodiode bias power `R · V · P`, mW for `p_rec` in mW.
pub fn pd_power(responsivity_a_per_w: f64, v_bias: f64, p_rec_mw: f64) -> f64 {
    responsivity_a_per_w * v_bias * p_rec_mw
}

pub fn edfa_pump_power(p_in_mw: f64, p_out_mw: f64, eta: f64) -> Result<f64> {
    if !(eta > 0.0) {
        return Err(Error::param("eta", "must be positive"));
    }
    if p_out_mw < p_in_mw {
        return Err(Error::param(
            "p_out",
            "an amplifier cannot output less than its input",
        ));
    }
    Ok((p_out_mw - p_in_mw) / eta)
}

/// Writes `scope,component,count,unit_mw,subtotal_mw` rows plus a total
/// row per report.
pub fn write_power_csv<W: Write>(
    out: W,
    table: &ComponentPowerTable,
    bom: &BillOfMaterials,
    reports: &[PowerReport],
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["scope", "component", "count", "unit_mw", "subtotal_mw"])?;
    for r in reports {
        let counts = bom.counts(r.scope).cloned().unwrap_or_default();
        for (k, sub) in &r.subtotals_mw {
            w.write_record([
                r.scope.name(),
                k.name(),
                &counts.get(k).copied().unwrap_or(0).to_string(),
                &table.unit(*k).to_string(),
                &format!("{sub:.4}"),
            ])?;
        }
        w.write_record([
            r.scope.name(),
            "total",
            "",
            "",
            &format!("{:.4}", r.total_mw),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_totals() {
        let f = PowerFixture::default_fixture();
        let want = [106.8, 426.92, 614.36];
        let mut prev = 0.0;
        for (scope, w) in Scope::ALL.into_iter().zip(want) {
            let r = total_power(&f.table, &f.bom, scope).unwrap();
            assert!((r.total_mw - w).abs() < 0.01, "{scope:?} {}", r.total_mw);
            assert!((r.subtotals_mw.values().sum::<f64>() - r.total_mw).abs() < 1e-12);
            assert!(r.total_mw >= prev);
            prev = r.total_mw;
        }
    }

    #[test]
    fn efficiencies() {
        assert!((efficiency(106.8, 3.6).unwrap() - 29.67).abs() < 0.005);
        assert!((efficiency(426.92, 3.6).unwrap() - 118.59).abs() < 0.005);
        assert_eq!(efficiency(7.5, 1.0).unwrap(), 7.5);
        assert!(efficiency(1.0, 0.0).is_err());
    }

    #[test]
    fn device_formulas() {
        assert!((laser_power(16.0, 0.3, 1.3).unwrap() - 134.0).abs() < 0.05);
        assert!((laser_power(0.0, 1.0, 0.0).unwrap() - 1.0).abs() < 1e-12);
        let a = laser_power(10.0, 0.5, 0.0).unwrap();
        let b = laser_power(10.0 + 10.0 * 2f64.log10(), 0.5, 0.0).unwrap();
        assert!((b / a - 2.0).abs() < 1e-12);
        assert!(laser_power(0.0, 0.0, 0.0).is_err());

        assert!((pd_power(0.65, 2.0, 3.0) - 3.9).abs() < 1e-12);
        assert_eq!(pd_power(0.65, 2.0, 0.0), 0.0);

        assert!((edfa_pump_power(0.1, 3.1, 0.3).unwrap() - 10.0).abs() < 1e-12);
        assert_eq!(edfa_pump_power(2.0, 2.0, 0.3).unwrap(), 0.0);
        assert!((edfa_pump_power(0.1, 3.1, 0.15).unwrap() - 20.0).abs() < 1e-12);
        assert!(edfa_pump_power(3.0, 1.0, 0.3).is_err());
    }

    #[test]
    fn merged_bom_is_additive() {
        let f = PowerFixture::default_fixture();
        let merged = f.bom.merged(&f.bom);
        for scope in Scope::ALL {
            let one = total_power(&f.table, &f.bom, scope).unwrap().total_mw;
            let two = total_power(&f.table, &merged, scope).unwrap().total_mw;
            assert!((two - 2.0 * one).abs() < 1e-9);
        }
    }

    #[test]
    fn nesting_is_enforced() {
        let bad = r#"{"table": {"mzm": 5}, "bom": {"compute_only": {"mzm": 8}, "compute_control": {"mzm": 4}}}"#;
        let err = PowerFixture::parse(bad).unwrap_err().to_string();
        assert!(err.contains("bom.compute_control.mzm"), "{err}");
        assert!(PowerFixture::parse(r#"{"table": {"mzm": 5}, "bom": {}, "extra": 1}"#).is_err());
        assert!(PowerFixture::parse(r#"{"table": {"mzm": -5}, "bom": {}}"#).is_err());
    }

    #[test]
    fn csv_has_total_rows() {
        let f = PowerFixture::default_fixture();
        let reports: Vec<_> = Scope::ALL
            .iter()
            .map(|&s| total_power(&f.table, &f.bom, s).unwrap())
            .collect();
        let mut buf = Vec::new();
        write_power_csv(&mut buf, &f.table, &f.bom, &reports).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.contains("full_system,total,,,614.3600"));
    }
}
