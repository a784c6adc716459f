mod common;

use std::path::Path;

use proptest::prelude::*;

use common::{random_instance, rel_diff};
use varprov::corpus::{chunk, PortionManifest};
use varprov::model::{Slo, Strategy as Approach};
use varprov::pipeline::run_synthetic;
use varprov::planner::{plan_dv_aware, plan_oracle};
use varprov::report::{emit_report, parse_csv, ReportFormat};
use varprov::sampling::{read_profile_jsonl, write_profile_jsonl};
use varprov::scenario::Scenario;
use varprov::Error;

fn fixture(name: &str) -> Scenario {
    Scenario::load(&Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)).unwrap()
}

#[test]
fn fixture_report_survives_csv_round_trip() {
    let scenario = fixture("paper-shape-strict.toml");
    let dir = tempfile::tempdir().unwrap();
    let out = run_synthetic(&scenario, scenario.synthetic.as_ref().unwrap(), dir.path()).unwrap();
    let bytes = emit_report(&out.report, ReportFormat::Csv).unwrap();
    let back = parse_csv(&bytes).unwrap();
    assert_eq!(back, out.report);
    assert_eq!(emit_report(&back, ReportFormat::Csv).unwrap(), bytes);
}

#[test]
fn strict_fixture_upgrades_before_meeting_deadline() {
    let scenario = fixture("paper-shape-strict.toml");
    let dir = tempfile::tempdir().unwrap();
    let out = run_synthetic(&scenario, scenario.synthetic.as_ref().unwrap(), dir.path()).unwrap();
    let dv = out.report.row("strict", Approach::DvAware).unwrap();
    assert!(dv.upgrades > 0);
    assert!(dv.ft < dv.pft);
    assert!(dv.pc < out.report.row("strict", Approach::Strong).unwrap().pc);
    // every simulated curve ends at the total significance
    for (_, sim) in &out.simulations {
        let last = sim.curve.last().unwrap();
        assert!(rel_diff(last.cumulative, out.report.total_significance) < 1e-9);
        assert!(rel_diff(last.time, sim.ft) < 1e-12);
    }
}

#[test]
fn manifest_and_profile_round_trip_through_jsonl() {
    let scenario = fixture("paper-shape-normal.toml");
    let dir = tempfile::tempdir().unwrap();
    let out = run_synthetic(&scenario, scenario.synthetic.as_ref().unwrap(), dir.path()).unwrap();
    let mut buf = Vec::new();
    out.manifest.write_jsonl(&mut buf).unwrap();
    let back = PortionManifest::read_jsonl(&buf[..], out.manifest.portion_size_bytes, b'\n').unwrap();
    assert_eq!(back, out.manifest);
    let mut buf = Vec::new();
    write_profile_jsonl(&out.estimates, &mut buf).unwrap();
    assert_eq!(read_profile_jsonl(&buf[..]).unwrap(), out.estimates);
}

#[test]
fn rechunking_generated_corpus_is_stable() {
    let scenario = fixture("paper-shape-normal.toml");
    let spec = scenario.synthetic.clone().unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = spec.generate(scenario.seed, dir.path()).unwrap();
    let a = chunk(&[&path], spec.portion_size_bytes(), b'\n').unwrap();
    let b = chunk(&[&path], spec.portion_size_bytes(), b'\n').unwrap();
    assert_eq!(a, b);
    assert_eq!(a.portions.len(), spec.portions as usize);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn infeasibility_matches_oracle(seed in any::<u64>()) {
        let inst = random_instance(seed, 5);
        let dv = plan_dv_aware(&inst.input());
        let oracle = plan_oracle(&inst.input());
        prop_assert_eq!(dv.is_ok(), oracle.is_ok());
        if let (Ok(h), Ok(o)) = (&dv, &oracle) {
            prop_assert!(h.predicted_pc >= o.predicted_pc);
            prop_assert!(h.feasible && o.feasible);
        }
        if let Err(e) = dv {
            let is_infeasible = matches!(e, Error::InfeasibleSlo { .. });
            prop_assert!(is_infeasible);
        }
    }

    #[test]
    fn looser_deadline_never_costs_more(seed in any::<u64>(), stretch in 1.0f64..3.0) {
        let mut inst = random_instance(seed, 5);
        prop_assume!(!inst.classification.degenerate);
        let Ok(tight) = plan_dv_aware(&inst.input()) else { return Ok(()) };
        inst.slo = Slo::new(inst.slo.pft * stretch, "looser").unwrap();
        let loose = plan_dv_aware(&inst.input()).unwrap();
        prop_assert!(loose.predicted_pc <= tight.predicted_pc);
        prop_assert!(loose.upgrade_trace.len() <= tight.upgrade_trace.len());
    }
}
