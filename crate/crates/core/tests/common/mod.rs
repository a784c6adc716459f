#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use varprov::classify::{classify_portions, ClassificationResult};
use varprov::cost::CostCalibration;
use varprov::model::{Catalog, DataPortion, Money, ServerType, Slo};
use varprov::planner::PlannerInput;

pub const GIB: u64 = 1 << 30;

/// A planning problem with everything owned.
#[derive(Debug, Clone)]
pub struct Instance {
    pub classification: ClassificationResult,
    pub catalog: Catalog,
    pub calibration: CostCalibration,
    pub slo: Slo,
}

impl Instance {
    pub fn input(&self) -> PlannerInput<'_> {
        PlannerInput {
            classification: &self.classification,
            catalog: &self.catalog,
            slo: &self.slo,
            calibration: &self.calibration,
        }
    }
}

/// `m` servers with doubling vCPU counts and roughly proportional prices.
pub fn random_catalog(rng: &mut impl Rng, m: usize) -> Catalog {
    loop {
        let servers = (0..m)
            .map(|i| {
                let vcpus = 2u32 << i;
                let per_cpu = rng.gen_range(40_000..80_000i64);
                ServerType::new(format!("T{}", i + 1), vcpus, vcpus * 2, Money::from_micros(per_cpu * i64::from(vcpus)))
                    .unwrap()
            })
            .collect();
        if let Ok(c) = Catalog::new(servers) {
            return c;
        }
    }
}

pub fn random_calibration(rng: &mut impl Rng) -> CostCalibration {
    let mut cal = CostCalibration::new(rng.gen_range(0.5..20.0), rng.gen_range(1e-6..1e-4), rng.gen_range(0.4..=1.0)).unwrap();
    if rng.gen_bool(0.5) {
        cal.significance_gamma = Some(rng.gen_range(0.05..=1.0));
    }
    cal
}

/// Portions with skewed significance; a few have none.
pub fn random_portions(rng: &mut impl Rng, n: usize) -> Vec<DataPortion> {
    (0..n)
        .map(|i| {
            let volume = rng.gen_range(GIB / 64..GIB);
            let density = rng.gen_range(0.0f64..1.0).powi(3);
            let sig = if rng.gen_bool(0.1) {
                0.0
            } else {
                (density * volume as f64 / 100.0).round()
            };
            DataPortion::new(i as u32, volume, volume / 128, sig)
        })
        .collect()
}

/// A seeded instance whose deadline falls anywhere from just below the
/// fastest achievable finish to well above the cheapest one.
pub fn random_instance(seed: u64, servers: usize) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let catalog = random_catalog(&mut rng, servers);
    let calibration = random_calibration(&mut rng);
    let n = rng.gen_range(6..40);
    let portions = random_portions(&mut rng, n);
    let classification = classify_portions(&portions).unwrap();
    let pts = |pick: &dyn Fn(&[f64]) -> f64| {
        classification
            .classes
            .iter()
            .filter(|c| !c.portions.is_empty())
            .map(|c| {
                let pt: Vec<f64> = catalog
                    .servers()
                    .iter()
                    .map(|s| calibration.predict_pt(c.total_volume, c.total_significance, s))
                    .collect();
                pick(&pt)
            })
            .fold(0.0, f64::max)
    };
    let fastest = pts(&|pt| pt.iter().copied().fold(f64::INFINITY, f64::min));
    let cheapest = pts(&|pt| pt[0]);
    let pft = rng.gen_range(0.9 * fastest..1.2 * cheapest);
    Instance {
        classification,
        catalog,
        calibration,
        slo: Slo::new(pft, "random").unwrap(),
    }
}

pub fn rel_diff(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}
