//! Analytic execution of a plan: per-class times and costs, the finishing
//! time, the critical class and the progressive-result curve.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::classify::ClassificationResult;
use crate::cost::CostCalibration;
use crate::error::{Error, Result};
use crate::model::{ClassKind, ExecutionMode, Money, ProvisionPlan, Slo, Strategy};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassRun {
    pub kind: ClassKind,
    pub server: String,
    pub portions: usize,
    pub pt: f64,
    pub cost: Money,
}

/// Cumulative significance available at `time` hours.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub time: f64,
    pub cumulative: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationResult {
    pub strategy: Strategy,
    pub mode: ExecutionMode,
    pub classes: Vec<ClassRun>,
    pub ft: f64,
    pub pc: Money,
    pub tcp_class: Option<ClassKind>,
    pub pft: f64,
    pub feasible: bool,
    pub curve: Vec<CurvePoint>,
}

/// Runs `plan` over the classified portions. Portions of a class run in
/// manifest order on that class's server.
pub fn simulate(
    plan: &ProvisionPlan,
    classification: &ClassificationResult,
    calibration: &CostCalibration,
) -> Result<SimulationResult> {
    let mut classes = Vec::new();
    // (finish time, class position, cumulative within class)
    let mut events: Vec<(f64, usize, f64)> = Vec::new();
    let mut offset = 0.0;
    for kind in ClassKind::ALL {
        let class = classification.class(kind);
        if class.is_empty() {
            continue;
        }
        let server = plan.assignment.get(&kind).ok_or(Error::UnassignedClass(kind))?;
        let members = classification.members(kind);
        let position = classes.len();
        let mut volume = 0u64;
        let mut significance = 0.0;
        for p in &members {
            volume += p.volume_bytes;
            significance += p.significance;
            let t = calibration.predict_pt(volume, significance, server);
            events.push((offset + t, position, significance));
        }
        // the last prefix is the class total
        let pt = calibration.predict_pt(class.total_volume, class.total_significance, server);
        if plan.mode == ExecutionMode::SingleServer {
            offset += pt;
        }
        classes.push(ClassRun {
            kind,
            server: server.name.clone(),
            portions: members.len(),
            pt,
            cost: Money::from_f64(server.cptu.as_f64() * pt),
        });
    }
    let ft = match plan.mode {
        ExecutionMode::ParallelClasses => classes.iter().map(|c| c.pt).fold(0.0, f64::max),
        ExecutionMode::SingleServer => classes.iter().map(|c| c.pt).fold(0.0, |a, b| a + b),
    };
    let pc = classes.iter().map(|c| c.cost).sum();
    let mut tcp_class = None;
    let mut worst = f64::NEG_INFINITY;
    for c in &classes {
        if c.pt > worst {
            worst = c.pt;
            tcp_class = Some(c.kind);
        }
    }
    events.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut latest = vec![0.0; classes.len()];
    let curve = events
        .into_iter()
        .map(|(time, position, within)| {
            latest[position] = within;
            CurvePoint {
                time,
                cumulative: latest.iter().sum(),
            }
        })
        .collect();
    Ok(SimulationResult {
        strategy: plan.strategy,
        mode: plan.mode,
        classes,
        ft,
        pc,
        tcp_class,
        pft: plan.pft,
        feasible: ft < plan.pft,
        curve,
    })
}

impl SimulationResult {
    /// First time at which `fraction` of the final significance is available.
    pub fn time_to_fraction(&self, fraction: f64) -> Option<f64> {
        let total = self.curve.last()?.cumulative;
        self.curve
            .iter()
            .find(|p| p.cumulative >= fraction * total)
            .map(|p| p.time)
    }

    /// Two whitespace-separated columns, one point per line.
    pub fn write_curve<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for p in &self.curve {
            writeln!(out, "{} {}", p.time, p.cumulative)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub condition: String,
    pub ft: f64,
    pub pc: Money,
    pub feasible: bool,
}

pub const AGREEMENT_TOLERANCE: f64 = 1e-9;

fn close(a: f64, b: f64) -> bool {
    a == b || (a - b).abs() <= AGREEMENT_TOLERANCE * a.abs().max(b.abs())
}

/// Checks that the plan predicted what the simulation produced, and judges
/// feasibility under `slo`.
pub fn verify_plan(plan: &ProvisionPlan, sim: &SimulationResult, slo: &Slo) -> Result<Verdict> {
    if !close(plan.predicted_ft, sim.ft) {
        return Err(Error::PredictionDivergence {
            what: "finishing time",
            predicted: plan.predicted_ft.to_string(),
            simulated: sim.ft.to_string(),
        });
    }
    if !close(plan.predicted_pc.as_f64(), sim.pc.as_f64()) {
        return Err(Error::PredictionDivergence {
            what: "processing cost",
            predicted: plan.predicted_pc.to_string(),
            simulated: sim.pc.to_string(),
        });
    }
    Ok(Verdict {
        condition: slo.condition.clone(),
        ft: sim.ft,
        pc: sim.pc,
        feasible: slo.is_met_by(sim.ft),
    })
}
