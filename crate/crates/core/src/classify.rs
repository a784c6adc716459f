//! Efficiency per portion and the split into three classes.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ClassKind, DataPortion, VarietyClass};

#[derive(Debug, Clone, PartialEq)]
pub struct EfValues {
    pub ef: Vec<f64>,
    /// Total significance was zero; every EF was set to 1.
    pub degenerate: bool,
}

/// EF_i = (sig_i / Σsig) / (vol_i / Σvol). A zero-volume portion gets EF 0.
pub fn compute_ef(portions: &[DataPortion]) -> Result<EfValues> {
    let total_volume: u64 = portions.iter().map(|p| p.volume_bytes).sum();
    if total_volume == 0 {
        return Err(Error::InvalidInput("total volume is zero; EF is undefined".into()));
    }
    let total_sig: f64 = portions.iter().map(|p| p.significance).sum();
    if total_sig == 0.0 {
        return Ok(EfValues {
            ef: vec![1.0; portions.len()],
            degenerate: true,
        });
    }
    let tv = total_volume as f64;
    let ef = portions
        .iter()
        .map(|p| {
            if p.volume_bytes == 0 {
                0.0
            } else {
                (p.significance / total_sig) / (p.volume_bytes as f64 / tv)
            }
        })
        .collect();
    Ok(EfValues { ef, degenerate: false })
}

/// A fraction `num/den` of total volume.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VolumeFraction {
    pub num: u64,
    pub den: u64,
}

impl VolumeFraction {
    pub const fn new(num: u64, den: u64) -> Self {
        VolumeFraction { num, den }
    }

    /// `before < fraction * total`, exactly.
    fn exceeds(self, before: u64, total: u64) -> bool {
        u128::from(before) * u128::from(self.den) < u128::from(self.num) * u128::from(total)
    }
}

/// Cumulative-volume cut points between MSDT|MeSDT and MeSDT|LSDT.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassBoundaries {
    pub first: VolumeFraction,
    pub second: VolumeFraction,
}

impl Default for ClassBoundaries {
    fn default() -> Self {
        ClassBoundaries {
            first: VolumeFraction::new(1, 3),
            second: VolumeFraction::new(2, 3),
        }
    }
}

impl ClassBoundaries {
    pub fn validate(&self) -> Result<()> {
        let VolumeFraction { num: a, den: b } = self.first;
        let VolumeFraction { num: c, den: d } = self.second;
        if b == 0 || d == 0 || a > b || c > d || u128::from(a) * u128::from(d) > u128::from(c) * u128::from(b) {
            return Err(Error::InvalidInput(
                "class boundaries must satisfy 0 <= first <= second <= 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationResult {
    /// Portions in manifest order, with `ef` filled in.
    pub portions: Vec<DataPortion>,
    /// MSDT, MeSDT, LSDT in that order.
    pub classes: Vec<VarietyClass>,
    pub boundaries: ClassBoundaries,
    pub degenerate: bool,
}

impl ClassificationResult {
    pub fn class(&self, kind: ClassKind) -> &VarietyClass {
        self.classes
            .iter()
            .find(|c| c.kind == kind)
            .expect("all three classes are present")
    }

    pub fn class_of(&self, portion_id: u32) -> Option<ClassKind> {
        self.classes
            .iter()
            .find(|c| c.portions.contains(&portion_id))
            .map(|c| c.kind)
    }

    /// Portions of `kind` in manifest order.
    pub fn members(&self, kind: ClassKind) -> Vec<&DataPortion> {
        let ids: HashSet<u32> = self.class(kind).portions.iter().copied().collect();
        self.portions.iter().filter(|p| ids.contains(&p.id)).collect()
    }

    pub fn total_significance(&self) -> f64 {
        self.portions.iter().map(|p| p.significance).sum()
    }
}

/// Orders portions by EF descending (ties by id) and cuts the order at the
/// volume boundaries.
pub fn classify(portions: &[DataPortion], ef: &EfValues, boundaries: ClassBoundaries) -> Result<ClassificationResult> {
    if ef.ef.len() != portions.len() {
        return Err(Error::InvalidInput(format!(
            "{} EF values for {} portions",
            ef.ef.len(),
            portions.len()
        )));
    }
    boundaries.validate()?;
    let mut order: Vec<usize> = (0..portions.len()).collect();
    order.sort_by(|&a, &b| {
        ef.ef[b]
            .total_cmp(&ef.ef[a])
            .then(portions[a].id.cmp(&portions[b].id))
    });
    let total: u64 = portions.iter().map(|p| p.volume_bytes).sum();
    let mut kinds = vec![ClassKind::Lsdt; portions.len()];
    let mut before = 0u64;
    for &i in &order {
        kinds[i] = if boundaries.first.exceeds(before, total) {
            ClassKind::Msdt
        } else if boundaries.second.exceeds(before, total) {
            ClassKind::Mesdt
        } else {
            ClassKind::Lsdt
        };
        before += portions[i].volume_bytes;
    }
    let mut with_ef = portions.to_vec();
    for (p, &e) in with_ef.iter_mut().zip(&ef.ef) {
        p.ef = Some(e);
    }
    let classes = ClassKind::ALL
        .iter()
        .map(|&kind| {
            let mut class = VarietyClass {
                kind,
                portions: Vec::new(),
                total_volume: 0,
                total_significance: 0.0,
            };
            for (p, &k) in portions.iter().zip(&kinds) {
                if k == kind {
                    class.portions.push(p.id);
                    class.total_volume += p.volume_bytes;
                    class.total_significance += p.significance;
                }
            }
            class
        })
        .collect();
    Ok(ClassificationResult {
        portions: with_ef,
        classes,
        boundaries,
        degenerate: ef.degenerate,
    })
}

/// EF and classification in one step with the default boundaries.
pub fn classify_portions(portions: &[DataPortion]) -> Result<ClassificationResult> {
    let ef = compute_ef(portions)?;
    classify(portions, &ef, ClassBoundaries::default())
}
