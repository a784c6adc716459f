//! Processing-time model and its calibration from measured runs.
//!
//! Work is linear in volume and significance; a server with `v` vCPUs runs
//! at `(v / reference_vcpus)^gamma` times the reference speed. The
//! significance term may scale with its own exponent.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{cpp, ClassKind, ServerType, VarietyClass};

const GIB: f64 = (1u64 << 30) as f64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostCalibration {
    /// Hours per GiB at reference speed.
    pub c_v: f64,
    /// Hours per unit of significance at reference speed.
    pub c_s: f64,
    #[serde(default = "one")]
    pub gamma: f64,
    #[serde(default = "four")]
    pub reference_vcpus: u32,
    /// Speedup exponent for the significance term; `gamma` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub significance_gamma: Option<f64>,
}

fn one() -> f64 {
    1.0
}

fn four() -> u32 {
    4
}

impl CostCalibration {
    pub fn new(c_v: f64, c_s: f64, gamma: f64) -> Result<Self> {
        let cal = CostCalibration {
            c_v,
            c_s,
            gamma,
            reference_vcpus: 4,
            significance_gamma: None,
        };
        cal.validate()?;
        Ok(cal)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c_v >= 0.0 && self.c_s >= 0.0 && self.c_v + self.c_s > 0.0)
            || !self.c_v.is_finite()
            || !self.c_s.is_finite()
        {
            return Err(Error::InvalidInput(format!(
                "calibration needs c_v, c_s >= 0 with a positive sum, got c_v={}, c_s={}",
                self.c_v, self.c_s
            )));
        }
        for g in [Some(self.gamma), self.significance_gamma].into_iter().flatten() {
            if !(g > 0.0 && g <= 1.0) {
                return Err(Error::InvalidInput(format!("speedup exponent must be in (0, 1], got {g}")));
            }
        }
        if self.reference_vcpus == 0 {
            return Err(Error::InvalidInput("reference_vcpus must be positive".into()));
        }
        Ok(())
    }

    fn speed(&self, vcpus: u32, exponent: f64) -> f64 {
        (f64::from(vcpus) / f64::from(self.reference_vcpus)).powf(exponent)
    }

    /// Predicted hours for `volume_bytes` of data carrying `significance` on `server`.
    pub fn predict_pt(&self, volume_bytes: u64, significance: f64, server: &ServerType) -> f64 {
        let volume_work = self.c_v * (volume_bytes as f64 / GIB);
        let sig_work = self.c_s * significance;
        match self.significance_gamma {
            Some(sg) if sg != self.gamma => {
                volume_work / self.speed(server.vcpus, self.gamma) + sig_work / self.speed(server.vcpus, sg)
            }
            _ => (volume_work + sig_work) / self.speed(server.vcpus, self.gamma),
        }
    }
}

/// Predicted time of a whole class, from its totals.
pub fn predict_class_pt(class: &VarietyClass, server: &ServerType, cal: &CostCalibration) -> f64 {
    cal.predict_pt(class.total_volume, class.total_significance, server)
}

/// A class's workload with its predicted time on every catalog server.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassWorkload {
    pub kind: ClassKind,
    pub total_volume: u64,
    pub total_significance: f64,
    /// Indexed like the catalog.
    pub pt: Vec<f64>,
}

impl ClassWorkload {
    pub fn new(class: &VarietyClass, servers: &[ServerType], cal: &CostCalibration) -> Self {
        ClassWorkload {
            kind: class.kind,
            total_volume: class.total_volume,
            total_significance: class.total_significance,
            pt: servers.iter().map(|s| predict_class_pt(class, s, cal)).collect(),
        }
    }
}

/// CPP of running a class on `server`. Zero-significance classes have no
/// CPP and report [`Error::DegenerateClass`].
pub fn class_cpp(class: &VarietyClass, server: &ServerType, cal: &CostCalibration) -> Result<f64> {
    let pt = predict_class_pt(class, server, cal);
    cpp(server.cptu.as_f64(), pt, class.total_significance)
}

/// One measured run used for calibration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileRun {
    pub volume_bytes: u64,
    pub significance: f64,
    pub vcpus: u32,
    pub pt_hours: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationFit {
    pub calibration: CostCalibration,
    pub residual: f64,
}

/// Exponent grid searched during calibration: 0.50, 0.55, ..., 1.00.
pub fn gamma_grid() -> Vec<f64> {
    (10..=20).map(|k| f64::from(k) / 20.0).collect()
}

fn check_runs(runs: &[ProfileRun], reference_vcpus: u32) -> Result<()> {
    if runs.len() < 3 {
        return Err(Error::CalibrationUnderdetermined(format!(
            "need at least 3 runs, got {}",
            runs.len()
        )));
    }
    if reference_vcpus == 0 {
        return Err(Error::InvalidInput("reference_vcpus must be positive".into()));
    }
    for r in runs {
        if r.vcpus == 0 || !(r.pt_hours >= 0.0) || !(r.significance >= 0.0) {
            return Err(Error::InvalidInput(format!("invalid profile run {r:?}")));
        }
    }
    let first = runs[0].vcpus;
    if runs.iter().all(|r| r.vcpus == first) {
        return Err(Error::CalibrationUnderdetermined(
            "all runs use the same server size; no variation in vCPUs".into(),
        ));
    }
    let x: Vec<f64> = runs.iter().map(|r| r.volume_bytes as f64 / GIB).collect();
    let y: Vec<f64> = runs.iter().map(|r| r.significance).collect();
    let sxx: f64 = x.iter().map(|v| v * v).sum();
    let syy: f64 = y.iter().map(|v| v * v).sum();
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| a * b).sum();
    if sxx * syy - sxy * sxy <= 1e-12 * sxx * syy {
        return Err(Error::CalibrationUnderdetermined(
            "volume and significance are collinear across runs; no independent variation".into(),
        ));
    }
    Ok(())
}

/// Non-negative least squares for (c_v, c_s) with both exponents fixed.
fn fit(runs: &[ProfileRun], reference_vcpus: u32, gamma: f64, sig_gamma: f64) -> Option<CalibrationFit> {
    let speed = |v: u32, g: f64| (f64::from(v) / f64::from(reference_vcpus)).powf(g);
    let rows: Vec<(f64, f64, f64)> = runs
        .iter()
        .map(|r| {
            (
                r.volume_bytes as f64 / GIB / speed(r.vcpus, gamma),
                r.significance / speed(r.vcpus, sig_gamma),
                r.pt_hours,
            )
        })
        .collect();
    let (mut saa, mut sbb, mut sab, mut sat, mut sbt) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &(a, b, t) in &rows {
        saa += a * a;
        sbb += b * b;
        sab += a * b;
        sat += a * t;
        sbt += b * t;
    }
    let residual = |cv: f64, cs: f64| rows.iter().map(|&(a, b, t)| (cv * a + cs * b - t).powi(2)).sum::<f64>();
    let det = saa * sbb - sab * sab;
    let mut candidates = Vec::new();
    if det > 0.0 {
        let cv = (sat * sbb - sbt * sab) / det;
        let cs = (saa * sbt - sab * sat) / det;
        if cv >= 0.0 && cs >= 0.0 {
            candidates.push((cv, cs));
        }
    }
    if candidates.is_empty() {
        // one coefficient pinned at zero
        if saa > 0.0 {
            candidates.push(((sat / saa).max(0.0), 0.0));
        }
        if sbb > 0.0 {
            candidates.push((0.0, (sbt / sbb).max(0.0)));
        }
    }
    candidates
        .into_iter()
        .filter(|&(cv, cs)| cv + cs > 0.0)
        .map(|(cv, cs)| CalibrationFit {
            calibration: CostCalibration {
                c_v: cv,
                c_s: cs,
                gamma,
                reference_vcpus,
                significance_gamma: (sig_gamma != gamma).then_some(sig_gamma),
            },
            residual: residual(cv, cs),
        })
        .min_by(|a, b| a.residual.total_cmp(&b.residual))
}

fn best(fits: impl Iterator<Item = Option<CalibrationFit>>) -> Result<CalibrationFit> {
    let mut best: Option<CalibrationFit> = None;
    for f in fits.flatten() {
        if best.is_none_or(|b| f.residual < b.residual) {
            best = Some(f);
        }
    }
    best.ok_or_else(|| Error::CalibrationUnderdetermined("no positive fit exists for these runs".into()))
}

/// Least-squares (c_v, c_s) for each exponent on [`gamma_grid`], keeping the
/// smallest residual. Ties keep the smaller exponent.
pub fn calibrate(runs: &[ProfileRun], reference_vcpus: u32) -> Result<CalibrationFit> {
    check_runs(runs, reference_vcpus)?;
    best(gamma_grid().into_iter().map(|g| fit(runs, reference_vcpus, g, g)))
}

/// Like [`calibrate`] but searches the volume and significance exponents
/// independently over the grid extended down to 0.05.
pub fn calibrate_split(runs: &[ProfileRun], reference_vcpus: u32) -> Result<CalibrationFit> {
    check_runs(runs, reference_vcpus)?;
    let grid: Vec<f64> = (1..=20).map(|k| f64::from(k) / 20.0).collect();
    best(
        grid.iter()
            .flat_map(|&g| grid.iter().map(move |&s| (g, s)))
            .map(|(g, s)| fit(runs, reference_vcpus, g, s)),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Catalog, Money};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn server(vcpus: u32, cptu: &str) -> ServerType {
        ServerType::new(format!("v{vcpus}"), vcpus, vcpus, cptu.parse().unwrap()).unwrap()
    }

    fn class(volume: u64, sig: f64) -> VarietyClass {
        VarietyClass {
            kind: ClassKind::Msdt,
            portions: vec![0],
            total_volume: volume,
            total_significance: sig,
        }
    }

    #[test]
    fn predict_examples() {
        // 100 h of reference work on a server with 4x the reference vCPUs
        let cal = CostCalibration::new(100.0, 0.0, 1.0).unwrap();
        assert_eq!(cal.predict_pt(1 << 30, 0.0, &server(16, "1")), 25.0);
        assert_eq!(cal.predict_pt(0, 0.0, &server(4, "1")), 0.0);
        let cal = CostCalibration::new(1.0, 0.001, 1.0).unwrap();
        assert_eq!(cal.predict_pt(2 << 30, 1000.0, &server(4, "0.239")), 3.0);
    }

    #[test]
    fn split_exponent_defaults_to_gamma() {
        let mut cal = CostCalibration::new(1.0, 0.001, 0.7).unwrap();
        let s = server(32, "1");
        let single = cal.predict_pt(3 << 30, 500.0, &s);
        cal.significance_gamma = Some(0.7);
        assert_eq!(cal.predict_pt(3 << 30, 500.0, &s), single);
        cal.significance_gamma = Some(0.1);
        let expected = 3.0 / 8f64.powf(0.7) + 0.5 / 8f64.powf(0.1);
        assert!((cal.predict_pt(3 << 30, 500.0, &s) - expected).abs() < 1e-12);
    }

    #[test]
    fn calibration_validation() {
        assert!(CostCalibration::new(0.0, 0.0, 1.0).is_err());
        assert!(CostCalibration::new(-1.0, 1.0, 1.0).is_err());
        assert!(CostCalibration::new(1.0, 0.0, 1.5).is_err());
        assert!(CostCalibration::new(1.0, 0.0, 0.0).is_err());
        let mut c = CostCalibration::new(1.0, 0.0, 1.0).unwrap();
        c.significance_gamma = Some(0.0);
        assert!(c.validate().is_err());
    }

    #[test]
    fn class_cpp_examples() {
        // 10 h of reference work, significance 10^4
        let cal = CostCalibration::new(10.0, 0.0, 1.0).unwrap();
        let c = class(1 << 30, 1e4);
        let s1 = server(4, "0.239");
        assert!((class_cpp(&c, &s1, &cal).unwrap() - 0.00239).abs() < 1e-15);
        let s2 = server(8, "0.489");
        assert_eq!(predict_class_pt(&c, &s2, &cal), 5.0);
        let fast = class_cpp(&c, &s2, &cal).unwrap();
        assert!((fast - 0.0012225).abs() < 1e-15);
        assert!(fast < class_cpp(&c, &s1, &cal).unwrap());
        assert!(matches!(class_cpp(&class(0, 0.0), &s1, &cal), Err(Error::DegenerateClass)));
    }

    #[test]
    fn class_cpp_composes_core_identities() {
        let cal = CostCalibration::new(3.0, 0.002, 0.8).unwrap();
        let c = class(5 << 30, 7000.0);
        for s in Catalog::standard().servers() {
            let pt = cal.predict_pt(c.total_volume, c.total_significance, s);
            assert_eq!(
                class_cpp(&c, s, &cal).unwrap().to_bits(),
                cpp(s.cptu.as_f64(), pt, 7000.0).unwrap().to_bits()
            );
        }
    }

    fn runs_from(cal: &CostCalibration, noise: f64, n: usize, seed: u64) -> Vec<ProfileRun> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sizes = [4u32, 8, 16, 32, 64];
        (0..n)
            .map(|i| {
                let volume_bytes = rng.gen_range(1u64..8) << 30;
                let significance = rng.gen_range(100.0..5000.0);
                let s = ServerType::new("x", sizes[i % sizes.len()], 4, Money::from_micros(1)).unwrap();
                let pt = cal.predict_pt(volume_bytes, significance, &s) * (1.0 + rng.gen_range(-noise..=noise));
                ProfileRun {
                    volume_bytes,
                    significance,
                    vcpus: s.vcpus,
                    pt_hours: pt,
                }
            })
            .collect()
    }

    #[test]
    fn calibrate_recovers_exact_model() {
        let truth = CostCalibration::new(1.0, 0.002, 1.0).unwrap();
        let fit = calibrate(&runs_from(&truth, 0.0, 12, 1), 4).unwrap();
        assert!((fit.calibration.c_v - 1.0).abs() < 1e-6);
        assert!((fit.calibration.c_s - 0.002).abs() < 1e-6);
        assert_eq!(fit.calibration.gamma, 1.0);
    }

    #[test]
    fn calibrate_recovers_sublinear_exponent() {
        let truth = CostCalibration::new(2.5, 0.0004, 0.75).unwrap();
        let fit = calibrate(&runs_from(&truth, 0.0, 10, 2), 4).unwrap();
        assert_eq!(fit.calibration.gamma, 0.75);
        assert!((fit.calibration.c_v - 2.5).abs() < 1e-6);
    }

    #[test]
    fn calibrate_with_noise() {
        let truth = CostCalibration::new(1.0, 0.002, 1.0).unwrap();
        let fit = calibrate(&runs_from(&truth, 0.05, 20, 3), 4).unwrap();
        assert!((fit.calibration.c_v - 1.0).abs() < 0.1);
        assert!((fit.calibration.c_s - 0.002).abs() < 0.0002);
    }

    #[test]
    fn calibrate_split_recovers_both_exponents() {
        let mut truth = CostCalibration::new(1.0, 0.002, 1.0).unwrap();
        truth.significance_gamma = Some(0.1);
        let fit = calibrate_split(&runs_from(&truth, 0.0, 15, 4), 4).unwrap();
        assert_eq!(fit.calibration.gamma, 1.0);
        assert_eq!(fit.calibration.significance_gamma, Some(0.1));
        assert!((fit.calibration.c_s - 0.002).abs() < 1e-6);
    }

    #[test]
    fn calibrate_underdetermined() {
        let truth = CostCalibration::new(1.0, 0.002, 1.0).unwrap();
        let runs = runs_from(&truth, 0.0, 2, 1);
        assert!(matches!(calibrate(&runs, 4), Err(Error::CalibrationUnderdetermined(_))));
        let mut same_server = runs_from(&truth, 0.0, 5, 1);
        for r in &mut same_server {
            r.vcpus = 8;
        }
        assert!(matches!(calibrate(&same_server, 4), Err(Error::CalibrationUnderdetermined(_))));
        let collinear: Vec<ProfileRun> = (1..=4)
            .map(|k| ProfileRun {
                volume_bytes: k << 30,
                significance: 100.0 * k as f64,
                vcpus: 4 * k as u32,
                pt_hours: 1.0,
            })
            .collect();
        let err = calibrate(&collinear, 4).unwrap_err();
        assert!(err.to_string().contains("collinear"));
    }
}
