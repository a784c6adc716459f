//! Job description files (TOML).
//!
//! ```toml
//! name = "wordcount-demo"
//! application = "WordCount"      # picks default deadlines when [[slo]] is absent
//! measure = "word_count"
//! seed = 7
//! portion_size_bytes = 134217728
//!
//! [calibration]
//! c_v = 1.0                      # hours per GiB on a 4-vCPU server
//! c_s = 0.00002                  # hours per unit of significance
//! gamma = 1.0
//!
//! [[slo]]
//! condition = "strict"
//! pft = 10.0
//! ```
//!
//! `catalog` defaults to the five-server standard catalog; `[sampling]`
//! takes `confidence_z`, `margin_e`, `p` and `exact`; `[synthetic]` takes
//! the fields of [`SyntheticSpec`].

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::classify::ClassBoundaries;
use crate::corpus::{SignificanceMeasure, DEFAULT_PORTION_SIZE};
use crate::cost::CostCalibration;
use crate::error::{Error, Result};
use crate::model::{standard_slo, Catalog, Slo};
use crate::planner::BaselineTiers;
use crate::sampling::SamplingSpec;
use crate::synthetic::SyntheticSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplingOptions {
    pub confidence_z: f64,
    pub margin_e: f64,
    pub p: f64,
    /// Scan every record instead of sampling.
    pub exact: bool,
}

impl Default for SamplingOptions {
    fn default() -> Self {
        let d = SamplingSpec::default();
        SamplingOptions {
            confidence_z: d.confidence_z,
            margin_e: d.margin_e,
            p: d.p,
            exact: false,
        }
    }
}

fn default_measure() -> SignificanceMeasure {
    SignificanceMeasure::WordCount
}

fn default_portion_size() -> u64 {
    DEFAULT_PORTION_SIZE
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub application: Option<String>,
    #[serde(default = "default_measure")]
    pub measure: SignificanceMeasure,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_portion_size")]
    pub portion_size_bytes: u64,
    /// Server names for WEAK, MODERATE, STRONG; the three cheapest by default.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baseline_tiers: Option<[String; 3]>,
    /// Number of servers available; informational only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub num_servers: Option<u32>,
    pub calibration: CostCalibration,
    #[serde(default)]
    pub sampling: SamplingOptions,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub boundaries: Option<ClassBoundaries>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synthetic: Option<SyntheticSpec>,
    #[serde(default = "Catalog::standard")]
    pub catalog: Catalog,
    #[serde(default)]
    pub slo: Vec<Slo>,
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Self> {
        let scenario: Scenario = toml::from_str(text).map_err(|e| Error::Parse(format!("scenario: {e}")))?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.portion_size_bytes == 0 {
            return Err(Error::InvalidInput("portion_size_bytes must be positive".into()));
        }
        self.calibration.validate()?;
        self.sampling_spec().validate()?;
        if let Some(b) = &self.boundaries {
            b.validate()?;
        }
        for s in &self.slo {
            Slo::new(s.pft, s.condition.clone())?;
        }
        self.tiers()?;
        self.slos()?;
        Ok(())
    }

    pub fn sampling_spec(&self) -> SamplingSpec {
        SamplingSpec {
            confidence_z: self.sampling.confidence_z,
            margin_e: self.sampling.margin_e,
            p: self.sampling.p,
            seed: self.seed,
        }
    }

    /// Declared deadlines, or the application's standard strict and normal ones.
    pub fn slos(&self) -> Result<Vec<Slo>> {
        if !self.slo.is_empty() {
            return Ok(self.slo.clone());
        }
        let app = self.application.as_deref().ok_or_else(|| {
            Error::InvalidInput("scenario needs [[slo]] entries or a known application".into())
        })?;
        let (strict, normal) = standard_slo(app)
            .ok_or_else(|| Error::InvalidInput(format!("no standard deadlines for application {app:?}")))?;
        Ok(vec![Slo::new(strict, "strict")?, Slo::new(normal, "normal")?])
    }

    pub fn tiers(&self) -> Result<BaselineTiers> {
        match &self.baseline_tiers {
            Some([w, m, s]) => BaselineTiers::from_names(&self.catalog, [w, m, s]),
            None if self.catalog.len() >= 3 => Ok(BaselineTiers::default()),
            None => Err(Error::InvalidInput(
                "baselines need at least three catalog entries or explicit baseline_tiers".into(),
            )),
        }
    }

    pub fn boundaries(&self) -> ClassBoundaries {
        self.boundaries.unwrap_or_default()
    }

    /// Scenario label for reports.
    pub fn label(&self) -> &str {
        if self.name.is_empty() {
            self.application.as_deref().unwrap_or("scenario")
        } else {
            &self.name
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
application = "WordCount"
[calibration]
c_v = 1.0
c_s = 0.001
"#;

    #[test]
    fn defaults_fill_in() {
        let s = Scenario::from_toml(MINIMAL).unwrap();
        assert_eq!(s.catalog, Catalog::standard());
        assert_eq!(s.measure, SignificanceMeasure::WordCount);
        assert_eq!(s.portion_size_bytes, DEFAULT_PORTION_SIZE);
        assert_eq!(s.calibration.gamma, 1.0);
        assert_eq!(s.calibration.reference_vcpus, 4);
        let slos = s.slos().unwrap();
        assert_eq!(slos[0].pft, 10.0);
        assert_eq!(slos[1].condition, "normal");
        assert_eq!(s.tiers().unwrap(), BaselineTiers::default());
        assert_eq!(s.sampling_spec().margin_e, 0.05);
    }

    #[test]
    fn explicit_fields() {
        let text = r#"
name = "custom"
measure = "pattern_count:error"
seed = 11
portion_size_bytes = 4096
baseline_tiers = ["small", "mid", "big"]
[calibration]
c_v = 2.0
c_s = 0.0
gamma = 0.8
significance_gamma = 0.3
[sampling]
margin_e = 0.1
exact = true
[[slo]]
condition = "tight"
pft = 2.5
[[catalog]]
name = "big"
vcpus = 16
memory_gib = 64
cptu = "1.5"
[[catalog]]
name = "small"
vcpus = 4
memory_gib = 8
cptu = 0.4
[[catalog]]
name = "mid"
vcpus = 8
memory_gib = 16
cptu = "0.8"
"#;
        let s = Scenario::from_toml(text).unwrap();
        assert_eq!(s.catalog.servers()[0].name, "small");
        assert_eq!(s.tiers().unwrap().strong, 2);
        assert_eq!(s.calibration.significance_gamma, Some(0.3));
        assert!(s.sampling.exact);
        assert_eq!(s.sampling_spec().seed, 11);
        assert_eq!(s.slos().unwrap()[0].pft, 2.5);
        let again = Scenario::from_toml(&s.to_toml()).unwrap();
        assert_eq!(again, s);
    }

    #[test]
    fn rejects_bad_files() {
        assert!(matches!(Scenario::from_toml("nonsense = 1"), Err(Error::Parse(_))));
        let no_slo = "[calibration]\nc_v = 1.0\nc_s = 0.0\n";
        assert!(Scenario::from_toml(no_slo).is_err());
        let bad_cal = "application = \"Grep\"\n[calibration]\nc_v = 0.0\nc_s = 0.0\n";
        assert!(Scenario::from_toml(bad_cal).is_err());
        let bad_tier = format!("baseline_tiers = [\"S1\", \"S2\", \"S9\"]\n{MINIMAL}");
        assert!(Scenario::from_toml(&bad_tier).is_err());
    }
}
