//! The full run: chunk, profile, classify, plan every strategy, simulate,
//! and assemble a comparison report.

use std::path::Path;

use crate::classify::{classify, compute_ef, ClassificationResult};
use crate::corpus::{chunk, PortionManifest, DEFAULT_DELIMITER};
use crate::error::{Error, Result, StageContext};
use crate::model::{Slo, Strategy};
use crate::planner::{plan_baseline, plan_dv_aware, PlannerInput};
use crate::report::{ComparisonReport, CurveSeries, ReportRow, CSV_VERSION};
use crate::sampling::{exact_profile, profile, sampling_overhead, SignificanceEstimate};
use crate::scenario::Scenario;
use crate::simulate::{simulate, verify_plan, SimulationResult};
use crate::synthetic::SyntheticSpec;

pub const BASELINES: [Strategy; 3] = [Strategy::Strong, Strategy::Moderate, Strategy::Weak];

/// Everything a run produced, for callers that want more than the report.
#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub manifest: PortionManifest,
    pub estimates: Vec<SignificanceEstimate>,
    pub classification: Option<ClassificationResult>,
    pub simulations: Vec<(String, SimulationResult)>,
    pub report: ComparisonReport,
}

/// Profiles a manifest as the scenario asks (sampled or exact).
pub fn profile_manifest(scenario: &Scenario, manifest: &PortionManifest) -> Result<Vec<SignificanceEstimate>> {
    if scenario.sampling.exact {
        exact_profile(manifest, &scenario.measure)
    } else {
        profile(manifest, &scenario.measure, &scenario.sampling_spec())
    }
}

/// Classifies profiled portions with the scenario's boundaries.
pub fn classify_estimates(scenario: &Scenario, estimates: &[SignificanceEstimate]) -> Result<ClassificationResult> {
    let portions: Vec<_> = estimates.iter().map(SignificanceEstimate::to_portion).collect();
    let ef = compute_ef(&portions)?;
    classify(&portions, &ef, scenario.boundaries())
}

/// Plans and simulates every strategy under each deadline.
pub fn compare(
    scenario: &Scenario,
    classification: &ClassificationResult,
) -> Result<(Vec<ReportRow>, Vec<CurveSeries>, Vec<(String, SimulationResult)>)> {
    let tiers = scenario.tiers()?;
    let mut rows = Vec::new();
    let mut curves = Vec::new();
    let mut sims = Vec::new();
    for slo in scenario.slos()? {
        let input = PlannerInput {
            classification,
            catalog: &scenario.catalog,
            slo: &slo,
            calibration: &scenario.calibration,
        };
        let dv = match plan_dv_aware(&input) {
            Ok(plan) => Some(plan),
            Err(Error::InfeasibleSlo { min_achievable_ft, .. }) => {
                rows.push(unplanned_row(&slo, min_achievable_ft));
                None
            }
            Err(e) => return Err(e).stage("plan"),
        };
        let mut plans = Vec::new();
        plans.extend(dv);
        for tier in BASELINES {
            plans.push(plan_baseline(&input, tier, tiers).stage("plan")?);
        }
        for plan in plans {
            let sim = simulate(&plan, classification, &scenario.calibration).stage("simulate")?;
            let verdict = verify_plan(&plan, &sim, &slo).stage("simulate")?;
            rows.push(ReportRow {
                condition: slo.condition.clone(),
                pft: slo.pft,
                strategy: plan.strategy,
                ft: verdict.ft,
                pc: verdict.pc,
                feasible: verdict.feasible,
                planned: true,
                servers: plan.servers_used(),
                upgrades: plan.upgrade_trace.len(),
                norm_time: None,
                norm_cost: None,
                dv_improvement: None,
            });
            curves.push(CurveSeries {
                condition: slo.condition.clone(),
                strategy: plan.strategy,
                points: sim.curve.clone(),
            });
            sims.push((slo.condition.clone(), sim));
        }
    }
    Ok((rows, curves, sims))
}

fn unplanned_row(slo: &Slo, min_achievable_ft: f64) -> ReportRow {
    ReportRow {
        condition: slo.condition.clone(),
        pft: slo.pft,
        strategy: Strategy::DvAware,
        ft: min_achievable_ft,
        pc: crate::model::Money::ZERO,
        feasible: false,
        planned: false,
        servers: Vec::new(),
        upgrades: 0,
        norm_time: None,
        norm_cost: None,
        dv_improvement: None,
    }
}

/// Runs every stage over `paths`. An infeasible DV-aware deadline becomes
/// an unplanned row, not an error.
pub fn run_pipeline<P: AsRef<Path>>(scenario: &Scenario, paths: &[P]) -> Result<PipelineOutput> {
    let manifest = chunk(paths, scenario.portion_size_bytes, DEFAULT_DELIMITER).stage("chunk")?;
    let estimates = profile_manifest(scenario, &manifest).stage("profile")?;
    let mut report = ComparisonReport {
        version: CSV_VERSION,
        scenario: scenario.label().to_string(),
        measure: scenario.measure.to_string(),
        portions: estimates.len(),
        total_volume: manifest.total_bytes(),
        total_significance: estimates.iter().map(|e| e.estimate.magnitude()).sum(),
        sampling_overhead: None,
        rows: Vec::new(),
        curves: Vec::new(),
    };
    if estimates.is_empty() {
        return Ok(PipelineOutput {
            manifest,
            estimates,
            classification: None,
            simulations: Vec::new(),
            report,
        });
    }
    report.sampling_overhead = Some(sampling_overhead(&estimates)?);
    let classification = classify_estimates(scenario, &estimates).stage("classify")?;
    let (rows, curves, simulations) = compare(scenario, &classification)?;
    report.rows = rows;
    report.curves = curves;
    report.fill_relative_columns();
    Ok(PipelineOutput {
        manifest,
        estimates,
        classification: Some(classification),
        simulations,
        report,
    })
}

/// Generates the synthetic corpus into `dir` and runs the pipeline over it,
/// with portions matching the generated ones.
pub fn run_synthetic(scenario: &Scenario, spec: &SyntheticSpec, dir: &Path) -> Result<PipelineOutput> {
    let path = spec.generate(scenario.seed, dir).stage("synthetic")?;
    let mut scenario = scenario.clone();
    scenario.portion_size_bytes = spec.portion_size_bytes();
    run_pipeline(&scenario, &[path])
}
