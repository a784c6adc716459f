//! Per-portion significance estimates from a uniform record sample sized by
//! Cochran's formula.

use std::io::{BufRead, Write};

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{
    merge_significance, read_portion, record_spans, PortionEntry, PortionManifest, RecordScore, Scanner,
    SigValue, SignificanceMeasure,
};
use crate::error::{Error, Result};
use crate::model::DataPortion;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplingSpec {
    pub confidence_z: f64,
    pub margin_e: f64,
    pub p: f64,
    pub seed: u64,
}

impl Default for SamplingSpec {
    /// 95% confidence, 5% margin, maximum-variance prior.
    fn default() -> Self {
        SamplingSpec {
            confidence_z: 1.96,
            margin_e: 0.05,
            p: 0.5,
            seed: 0,
        }
    }
}

impl SamplingSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.confidence_z > 0.0 && self.confidence_z.is_finite()) {
            return Err(Error::InvalidInput(format!("confidence z must be positive, got {}", self.confidence_z)));
        }
        if !(self.margin_e > 0.0 && self.margin_e <= 1.0) {
            return Err(Error::InvalidInput(format!("margin must be in (0, 1], got {}", self.margin_e)));
        }
        if !(self.p > 0.0 && self.p < 1.0) {
            return Err(Error::InvalidInput(format!("p must be in (0, 1), got {}", self.p)));
        }
        Ok(())
    }

    /// Sample size before the finite-population correction.
    pub fn infinite_population_size(&self) -> f64 {
        self.confidence_z * self.confidence_z * self.p * (1.0 - self.p) / (self.margin_e * self.margin_e)
    }
}

/// Records to sample from a population of `population_n`, in `[1, N]`.
pub fn cochran_sample_size(spec: &SamplingSpec, population_n: u64) -> u64 {
    if population_n <= 1 {
        return 1;
    }
    let n0 = spec.infinite_population_size();
    let n = n0 / (1.0 + (n0 - 1.0) / population_n as f64);
    // absorb rounding noise so an exact integer is not bumped up by one
    let n = (n - 1e-9).ceil();
    (n.max(1.0) as u64).min(population_n)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignificanceEstimate {
    pub id: u32,
    pub estimate: SigValue,
    pub records_sampled: u64,
    pub records_total: u64,
    pub volume_bytes: u64,
    /// Malformed records seen in the sample.
    #[serde(default)]
    pub skipped: u64,
    /// False when every record was read.
    #[serde(default = "yes")]
    pub is_estimate: bool,
}

fn yes() -> bool {
    true
}

impl SignificanceEstimate {
    pub fn overhead_fraction(&self) -> f64 {
        if self.records_total == 0 {
            0.0
        } else {
            self.records_sampled as f64 / self.records_total as f64
        }
    }

    pub fn to_portion(&self) -> DataPortion {
        DataPortion {
            id: self.id,
            volume_bytes: self.volume_bytes,
            record_count: self.records_total,
            significance: self.estimate.magnitude(),
            significance_is_estimate: self.is_estimate,
            ef: None,
        }
    }
}

fn portion_rng(seed: u64, portion_id: u32) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..12].copy_from_slice(&portion_id.to_le_bytes());
    ChaCha8Rng::from_seed(key)
}

/// Estimates the significance of an in-memory portion.
///
/// Additive measures scale the sample total by N/n. Sum-count measures scale
/// both components, which keeps the reduced average unbiased.
pub fn estimate_from_buffer(
    id: u32,
    buf: &[u8],
    delimiter: u8,
    scanner: &Scanner,
    spec: &SamplingSpec,
) -> SignificanceEstimate {
    let spans = record_spans(buf, delimiter);
    let total = spans.len() as u64;
    let kind = scanner.measure().merge_kind();
    if total == 0 {
        return SignificanceEstimate {
            id,
            estimate: SigValue::zero(kind),
            records_sampled: 0,
            records_total: 0,
            volume_bytes: buf.len() as u64,
            skipped: 0,
            is_estimate: true,
        };
    }
    let n = cochran_sample_size(spec, total);
    let mut picks = index::sample(&mut portion_rng(spec.seed, id), spans.len(), n as usize).into_vec();
    picks.sort_unstable();
    let mut sum = SigValue::zero(kind);
    let mut skipped = 0;
    for i in picks {
        let (s, e) = spans[i];
        match scanner.score(&buf[s..e]) {
            RecordScore::Value(v) => sum = merge_significance(sum, v).expect("scanner yields its own kind"),
            RecordScore::Malformed => skipped += 1,
        }
    }
    let estimate = if n == total {
        sum
    } else {
        sum.scaled(total as f64, n as f64)
    };
    SignificanceEstimate {
        id,
        estimate,
        records_sampled: n,
        records_total: total,
        volume_bytes: buf.len() as u64,
        skipped,
        is_estimate: n < total,
    }
}

pub fn estimate_significance(
    entry: &PortionEntry,
    delimiter: u8,
    scanner: &Scanner,
    spec: &SamplingSpec,
) -> Result<SignificanceEstimate> {
    let buf = read_portion(entry)?;
    Ok(estimate_from_buffer(entry.id, &buf, delimiter, scanner, spec))
}

/// Reads every record of every portion; the "estimate" is exact.
pub fn exact_profile(manifest: &PortionManifest, measure: &SignificanceMeasure) -> Result<Vec<SignificanceEstimate>> {
    let scanner = measure.scanner()?;
    manifest
        .portions
        .par_iter()
        .map(|entry| {
            let buf = read_portion(entry)?;
            let tally = crate::corpus::scan_records(&buf, manifest.delimiter, &scanner);
            Ok(SignificanceEstimate {
                id: entry.id,
                estimate: tally.value,
                records_sampled: tally.records,
                records_total: tally.records,
                volume_bytes: entry.length,
                skipped: tally.skipped,
                is_estimate: false,
            })
        })
        .collect()
}

/// Samples every portion of the manifest, in parallel, results in manifest order.
pub fn profile(
    manifest: &PortionManifest,
    measure: &SignificanceMeasure,
    spec: &SamplingSpec,
) -> Result<Vec<SignificanceEstimate>> {
    spec.validate()?;
    let scanner = measure.scanner()?;
    manifest
        .portions
        .par_iter()
        .map(|entry| estimate_significance(entry, manifest.delimiter, &scanner, spec))
        .collect()
}

/// Fraction of all records that were read while profiling.
pub fn sampling_overhead(estimates: &[SignificanceEstimate]) -> Result<f64> {
    if estimates.is_empty() {
        return Err(Error::InvalidInput("no estimates to measure overhead over".into()));
    }
    let sampled: u64 = estimates.iter().map(|e| e.records_sampled).sum();
    let total: u64 = estimates.iter().map(|e| e.records_total).sum();
    if total == 0 {
        return Ok(0.0);
    }
    Ok(sampled as f64 / total as f64)
}

pub fn write_profile_jsonl<W: Write>(estimates: &[SignificanceEstimate], mut out: W) -> std::io::Result<()> {
    for e in estimates {
        serde_json::to_writer(&mut out, e)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_profile_jsonl<R: BufRead>(input: R) -> Result<Vec<SignificanceEstimate>> {
    let mut out = Vec::new();
    for (n, line) in input.lines().enumerate() {
        let line = line.map_err(|e| Error::io("<profile>", e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line).map_err(|e| Error::Parse(format!("profile line {}: {e}", n + 1)))?,
        );
    }
    Ok(out)
}
