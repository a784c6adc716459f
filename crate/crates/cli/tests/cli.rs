use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn varprov(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_varprov"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures").join(name)
}

const SCENARIO: &str = r#"
name = "cli"
measure = "word_count"
seed = 11
portion_size_bytes = 64
[calibration]
c_v = 20000.0
c_s = 0.001
gamma = 0.9
[[slo]]
condition = "normal"
pft = 2.0
"#;

fn write_corpus(dir: &Path) -> PathBuf {
    let mut text = String::new();
    for i in 0..60 {
        let words = if i % 7 == 0 { "alpha beta gamma delta eps zeta" } else { "x" };
        text.push_str(&format!("{i} {words}\n"));
    }
    let path = dir.join("corpus.txt");
    std::fs::write(&path, text).unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn stages_chain_from_corpus_to_simulation() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let corpus = write_corpus(d);
    let scenario = d.join("scenario.toml");
    std::fs::write(&scenario, SCENARIO).unwrap();
    let manifest = d.join("manifest.jsonl");
    let profile = d.join("profile.jsonl");
    let classes = d.join("classes.json");
    let plan = d.join("plan.json");
    let sim = d.join("sim.json");
    let curve = d.join("curve.txt");

    let out = varprov(&["chunk", s(&corpus), "--portion-size", "64", "-o", s(&manifest)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(std::fs::read_to_string(&manifest).unwrap().lines().count() > 3);

    let out = varprov(&["profile", "--manifest", s(&manifest), "--exact", "-o", s(&profile)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));

    let out = varprov(&["classify", "--profile", s(&profile), "--scenario", s(&scenario), "-o", s(&classes)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let c: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&classes).unwrap()).unwrap();
    assert_eq!(c["classes"].as_array().unwrap().len(), 3);

    let out = varprov(&["plan", "--scenario", s(&scenario), "--classes", s(&classes), "-o", s(&plan)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let p: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&plan).unwrap()).unwrap();
    assert_eq!(p["feasible"], true);

    let out = varprov(&[
        "simulate", "--scenario", s(&scenario), "--classes", s(&classes), "--plan", s(&plan), "--curve", s(&curve), "-o",
        s(&sim),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let r: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&sim).unwrap()).unwrap();
    assert_eq!(r["ft"], p["predicted_ft"]);
    let curve = std::fs::read_to_string(&curve).unwrap();
    let last: Vec<f64> = curve.lines().last().unwrap().split_whitespace().map(|v| v.parse().unwrap()).collect();
    assert_eq!(last[0], r["ft"].as_f64().unwrap());
}

#[test]
fn compare_on_fixture_prints_every_strategy() {
    let dir = tempfile::tempdir().unwrap();
    let out = varprov(&[
        "compare",
        "--scenario",
        s(&fixture("paper-shape-normal.toml")),
        "--workdir",
        s(dir.path()),
        "--format",
        "csv",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let csv = String::from_utf8(out.stdout).unwrap();
    for strategy in ["DV-aware", "STRONG", "MODERATE", "WEAK"] {
        assert!(csv.lines().any(|l| l.starts_with("row,") && l.contains(strategy)), "{strategy}");
    }
}

#[test]
fn compare_with_impossible_deadline_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = dir.path().join("tight.toml");
    std::fs::write(&scenario, SCENARIO.replace("pft = 2.0", "pft = 0.000001")).unwrap();
    let corpus = write_corpus(dir.path());
    let out = varprov(&["compare", "--scenario", s(&scenario), s(&corpus)]);
    assert_eq!(code(&out), 3);
    assert!(String::from_utf8_lossy(&out.stdout).contains("infeasible"));
}

#[test]
fn plan_with_impossible_deadline_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let corpus = write_corpus(d);
    let scenario = d.join("scenario.toml");
    std::fs::write(&scenario, SCENARIO).unwrap();
    let manifest = d.join("m.jsonl");
    let profile = d.join("p.jsonl");
    let classes = d.join("c.json");
    assert_eq!(code(&varprov(&["chunk", s(&corpus), "--portion-size", "64", "-o", s(&manifest)])), 0);
    assert_eq!(code(&varprov(&["profile", "--manifest", s(&manifest), "-o", s(&profile)])), 0);
    assert_eq!(code(&varprov(&["classify", "--profile", s(&profile), "-o", s(&classes)])), 0);
    let out = varprov(&["plan", "--scenario", s(&scenario), "--classes", s(&classes), "--pft", "0.000001"]);
    assert_eq!(code(&out), 3);
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(code(&varprov(&["frobnicate"])), 2);
    let dir = tempfile::tempdir().unwrap();
    let scenario = dir.path().join("s.toml");
    std::fs::write(&scenario, SCENARIO).unwrap();
    let corpus = write_corpus(dir.path());
    assert_eq!(code(&varprov(&["compare", "--scenario", s(&scenario), s(&corpus), "--format", "xml"])), 2);
    assert_eq!(code(&varprov(&["chunk", s(&corpus), "--delimiter", "ab"])), 2);
    std::fs::write(&scenario, "name = \"x\"\nbogus = 1\n").unwrap();
    assert_eq!(code(&varprov(&["compare", "--scenario", s(&scenario), s(&corpus)])), 2);
}

#[test]
fn missing_files_exit_4() {
    assert_eq!(code(&varprov(&["chunk", "/no/such/file.txt"])), 4);
    assert_eq!(code(&varprov(&["profile", "--manifest", "/no/such/manifest.jsonl"])), 4);
}

#[test]
fn calibrate_recovers_constants() {
    let dir = tempfile::tempdir().unwrap();
    let runs = dir.path().join("runs.jsonl");
    let gib = (1u64 << 30) as f64;
    let mut text = String::new();
    for (vol, sig, vcpus) in [(1.0, 1e5, 4u32), (2.0, 5e4, 8), (4.0, 4e5, 16), (1.5, 2e5, 32)] {
        let pt = (2.0 * vol + 1e-5 * sig) / (f64::from(vcpus) / 4.0);
        text.push_str(&format!(
            "{{\"volume_bytes\":{},\"significance\":{sig},\"vcpus\":{vcpus},\"pt_hours\":{pt}}}\n",
            (vol * gib) as u64
        ));
    }
    std::fs::write(&runs, text).unwrap();
    let out = varprov(&["calibrate", "--runs", s(&runs)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let cal: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((cal["c_v"].as_f64().unwrap() - 2.0).abs() < 1e-6);
    assert!((cal["gamma"].as_f64().unwrap() - 1.0).abs() < 1e-9);

    std::fs::write(&runs, text_one_server()).unwrap();
    assert_eq!(code(&varprov(&["calibrate", "--runs", s(&runs)])), 2);
}

fn text_one_server() -> String {
    (1..4)
        .map(|i| format!("{{\"volume_bytes\":{},\"significance\":{},\"vcpus\":4,\"pt_hours\":{i}.0}}\n", i << 30, i * 1000))
        .collect()
}
