//! Server selection per class: the variety-aware heuristic, the
//! single-server baselines and an exhaustive oracle.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::classify::ClassificationResult;
use crate::cost::{ClassWorkload, CostCalibration};
use crate::error::{Error, Result};
use crate::model::{
    cpp, Catalog, ClassKind, ExecutionMode, Money, ProvisionPlan, Slo, Strategy, Upgrade,
};

/// Largest catalog the oracle will enumerate.
pub const ORACLE_MAX_CATALOG: usize = 6;

#[derive(Debug, Clone, Copy)]
pub struct PlannerInput<'a> {
    pub classification: &'a ClassificationResult,
    pub catalog: &'a Catalog,
    pub slo: &'a Slo,
    pub calibration: &'a CostCalibration,
}

impl PlannerInput<'_> {
    /// Workloads of the non-empty classes, in MSDT, MeSDT, LSDT order.
    pub fn workloads(&self) -> Vec<ClassWorkload> {
        self.classification
            .classes
            .iter()
            .filter(|c| !c.is_empty())
            .map(|c| ClassWorkload::new(c, self.catalog.servers(), self.calibration))
            .collect()
    }
}

/// Catalog indices per class, best CPP first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CppRanking {
    pub order: BTreeMap<ClassKind, Vec<usize>>,
    /// Classes ranked by price only because their significance is zero.
    pub degenerate: Vec<ClassKind>,
}

impl CppRanking {
    pub fn build(workloads: &[ClassWorkload], catalog: &Catalog) -> Result<Self> {
        let servers = catalog.servers();
        let mut order = BTreeMap::new();
        let mut degenerate = Vec::new();
        for w in workloads {
            let mut idx: Vec<usize> = (0..servers.len()).collect();
            if w.total_significance > 0.0 {
                let keys = servers
                    .iter()
                    .zip(&w.pt)
                    .map(|(s, &pt)| cpp(s.cptu.as_f64(), pt, w.total_significance))
                    .collect::<Result<Vec<f64>>>()?;
                // catalog is price-sorted, so index order breaks cptu ties too
                idx.sort_by(|&a, &b| keys[a].total_cmp(&keys[b]).then(a.cmp(&b)));
            } else {
                degenerate.push(w.kind);
            }
            order.insert(w.kind, idx);
        }
        Ok(CppRanking { order, degenerate })
    }
}

fn class_cost(catalog: &Catalog, server: usize, pt: f64) -> Money {
    Money::from_f64(catalog.servers()[server].cptu.as_f64() * pt)
}

fn build_plan(
    strategy: Strategy,
    mode: ExecutionMode,
    input: &PlannerInput<'_>,
    workloads: &[ClassWorkload],
    choice: &[usize],
    upgrade_trace: Vec<Upgrade>,
) -> ProvisionPlan {
    let servers = input.catalog.servers();
    let mut assignment = BTreeMap::new();
    let mut class_pt = BTreeMap::new();
    let mut per_class_cost = BTreeMap::new();
    let mut ft = 0.0f64;
    for (w, &j) in workloads.iter().zip(choice) {
        let pt = w.pt[j];
        assignment.insert(w.kind, servers[j].clone());
        class_pt.insert(w.kind, pt);
        per_class_cost.insert(w.kind, class_cost(input.catalog, j, pt));
        ft = match mode {
            ExecutionMode::ParallelClasses => ft.max(pt),
            ExecutionMode::SingleServer => ft + pt,
        };
    }
    let predicted_pc = per_class_cost.values().copied().sum();
    ProvisionPlan {
        strategy,
        mode,
        assignment,
        class_pt,
        per_class_cost,
        predicted_ft: ft,
        predicted_pc,
        upgrade_trace,
        pft: input.slo.pft,
        feasible: input.slo.is_met_by(ft),
    }
}

/// Fastest finishing time reachable with any assignment.
fn min_achievable_ft(workloads: &[ClassWorkload]) -> f64 {
    workloads
        .iter()
        .map(|w| w.pt.iter().copied().fold(f64::INFINITY, f64::min))
        .fold(0.0, f64::max)
}

/// The variety-aware heuristic: start every class on its best-CPP server
/// and upgrade the critical class until the deadline is met.
pub fn plan_dv_aware(input: &PlannerInput<'_>) -> Result<ProvisionPlan> {
    let workloads = input.workloads();
    let ranking = CppRanking::build(&workloads, input.catalog)?;
    let servers = input.catalog.servers();
    let mut current: Vec<usize> = workloads.iter().map(|w| ranking.order[&w.kind][0]).collect();
    let mut trace = Vec::new();
    let bound = 3 * servers.len();
    loop {
        // critical class: largest PT, earlier class wins ties
        let mut tcp: Option<usize> = None;
        for (k, w) in workloads.iter().enumerate() {
            if tcp.is_none_or(|t| w.pt[current[k]] > workloads[t].pt[current[t]]) {
                tcp = Some(k);
            }
        }
        let Some(t) = tcp else { break };
        let w = &workloads[t];
        let cur = current[t];
        let cur_pt = w.pt[cur];
        if input.slo.is_met_by(cur_pt) {
            break;
        }
        let rank = &ranking.order[&w.kind];
        let pos = rank.iter().position(|&j| j == cur).expect("ranking is a permutation");
        let next = rank[pos + 1..]
            .iter()
            .copied()
            .find(|&j| w.pt[j] < cur_pt)
            .or_else(|| (0..servers.len()).find(|&j| w.pt[j] < cur_pt));
        let Some(next) = next else {
            return Err(Error::InfeasibleSlo {
                pft: input.slo.pft,
                min_achievable_ft: min_achievable_ft(&workloads),
            });
        };
        trace.push(Upgrade {
            iteration: trace.len() as u32 + 1,
            class: w.kind,
            from: servers[cur].name.clone(),
            to: servers[next].name.clone(),
        });
        assert!(trace.len() <= bound, "upgrade loop exceeded {bound} iterations");
        current[t] = next;
    }
    Ok(build_plan(
        Strategy::DvAware,
        ExecutionMode::ParallelClasses,
        input,
        &workloads,
        &current,
        trace,
    ))
}

/// Catalog positions of the WEAK, MODERATE and STRONG servers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BaselineTiers {
    pub weak: usize,
    pub moderate: usize,
    pub strong: usize,
}

impl Default for BaselineTiers {
    fn default() -> Self {
        BaselineTiers {
            weak: 0,
            moderate: 1,
            strong: 2,
        }
    }
}

impl BaselineTiers {
    pub fn index(&self, tier: Strategy) -> Result<usize> {
        match tier {
            Strategy::Weak => Ok(self.weak),
            Strategy::Moderate => Ok(self.moderate),
            Strategy::Strong => Ok(self.strong),
            other => Err(Error::InvalidInput(format!("{other} is not a baseline tier"))),
        }
    }

    pub fn from_names(catalog: &Catalog, names: [&str; 3]) -> Result<Self> {
        let find = |n: &str| {
            catalog
                .position(n)
                .ok_or_else(|| Error::InvalidInput(format!("baseline server {n} is not in the catalog")))
        };
        Ok(BaselineTiers {
            weak: find(names[0])?,
            moderate: find(names[1])?,
            strong: find(names[2])?,
        })
    }
}

/// Everything on one server, classes back to back. Infeasible plans are
/// returned with `feasible = false`.
pub fn plan_baseline(input: &PlannerInput<'_>, tier: Strategy, tiers: BaselineTiers) -> Result<ProvisionPlan> {
    let j = tiers.index(tier)?;
    if j >= input.catalog.len() {
        return Err(Error::InvalidInput(format!(
            "baseline {tier} needs catalog entry {} but the catalog has {}",
            j + 1,
            input.catalog.len()
        )));
    }
    let workloads = input.workloads();
    let choice = vec![j; workloads.len()];
    Ok(build_plan(tier, ExecutionMode::SingleServer, input, &workloads, &choice, Vec::new()))
}

/// Cheapest feasible assignment by exhaustive search. The first minimum in
/// lexicographic (MSDT, MeSDT, LSDT) catalog-index order wins.
pub fn plan_oracle(input: &PlannerInput<'_>) -> Result<ProvisionPlan> {
    let m = input.catalog.len();
    if m > ORACLE_MAX_CATALOG {
        return Err(Error::InvalidInput(format!(
            "oracle enumerates at most {ORACLE_MAX_CATALOG} server types, catalog has {m}"
        )));
    }
    let workloads = input.workloads();
    let k = workloads.len();
    let mut best: Option<(Money, Vec<usize>)> = None;
    let mut choice = vec![0usize; k];
    let total = m.pow(k as u32);
    for code in 0..total {
        let mut c = code;
        for slot in choice.iter_mut().rev() {
            *slot = c % m;
            c /= m;
        }
        let ft = workloads
            .iter()
            .zip(&choice)
            .map(|(w, &j)| w.pt[j])
            .fold(0.0, f64::max);
        if !input.slo.is_met_by(ft) {
            continue;
        }
        let pc: Money = workloads
            .iter()
            .zip(&choice)
            .map(|(w, &j)| class_cost(input.catalog, j, w.pt[j]))
            .sum();
        if best.as_ref().is_none_or(|(b, _)| pc < *b) {
            best = Some((pc, choice.clone()));
        }
    }
    match best {
        Some((_, choice)) => Ok(build_plan(
            Strategy::Oracle,
            ExecutionMode::ParallelClasses,
            input,
            &workloads,
            &choice,
            Vec::new(),
        )),
        None => Err(Error::InfeasibleSlo {
            pft: input.slo.pft,
            min_achievable_ft: min_achievable_ft(&workloads),
        }),
    }
}
