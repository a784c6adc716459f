use std::fs::File;
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use varprov::classify::ClassificationResult;
use varprov::corpus::{chunk, PortionManifest, SignificanceMeasure, DEFAULT_PORTION_SIZE};
use varprov::cost::{calibrate, calibrate_split, ProfileRun};
use varprov::pipeline::{classify_estimates, run_pipeline, run_synthetic};
use varprov::planner::{plan_baseline, plan_dv_aware, plan_oracle, PlannerInput};
use varprov::report::{emit_report, ReportFormat};
use varprov::sampling::{exact_profile, profile, read_profile_jsonl, write_profile_jsonl, SamplingSpec};
use varprov::scenario::Scenario;
use varprov::simulate::{simulate, verify_plan};
use varprov::synthetic::SyntheticSpec;
use varprov::{Error, ProvisionPlan, Slo, Strategy};

const EXIT_USAGE: u8 = 2;
const EXIT_INFEASIBLE: u8 = 3;
const EXIT_IO: u8 = 4;

/// Data-variety-aware provisioning planner and simulator.
///
/// Each stage reads the previous stage's file, so partial reruns are cheap:
/// chunk → profile → classify → plan → simulate. `compare` runs them all.
#[derive(Parser)]
#[command(name = "varprov", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Split input files into record-aligned portions (JSONL manifest).
    Chunk {
        /// Input files, in order.
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        /// Maximum portion size in bytes.
        #[arg(long, default_value_t = DEFAULT_PORTION_SIZE)]
        portion_size: u64,
        /// Record delimiter: one byte, or \n, \t, \0.
        #[arg(long, default_value = "\\n")]
        delimiter: String,
        /// Output file (stdout if omitted).
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Estimate each portion's significance by sampling records (JSONL profile).
    Profile {
        #[arg(long)]
        manifest: PathBuf,
        /// word_count, pattern_count:<p>, pattern_count_ci:<p>, inverted_index_size,
        /// predicate_count:<field><op><value>, field_sum:<field>, field_avg:<field>, url_count:<url>
        #[arg(long, default_value = "word_count")]
        measure: String,
        /// Scan every record instead of sampling.
        #[arg(long)]
        exact: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1.96)]
        confidence_z: f64,
        #[arg(long, default_value_t = 0.05)]
        margin: f64,
        #[arg(long, default_value_t = 0.5)]
        p: f64,
        #[arg(long, default_value = "\\n")]
        delimiter: String,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Compute EF and split portions into MSDT, MeSDT and LSDT (JSON).
    Classify {
        #[arg(long)]
        profile: PathBuf,
        /// Scenario supplying class boundaries (defaults to volume tertiles).
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Assign servers to classes for one deadline (JSON plan).
    Plan {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        classes: PathBuf,
        /// SLO condition from the scenario (first one if omitted).
        #[arg(long)]
        condition: Option<String>,
        /// Override the deadline, in hours.
        #[arg(long)]
        pft: Option<f64>,
        /// dv-aware, strong, moderate, weak or oracle.
        #[arg(long, default_value = "dv-aware")]
        strategy: String,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Simulate a plan and check it against its own predictions (JSON).
    Simulate {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        classes: PathBuf,
        #[arg(long)]
        plan: PathBuf,
        /// Also write the progressive curve as two columns (time, cumulative significance).
        #[arg(long)]
        curve: Option<PathBuf>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Run the whole pipeline and compare DV-aware against the baselines.
    Compare {
        #[arg(long)]
        scenario: PathBuf,
        /// Corpus files (ignored with --synthetic).
        inputs: Vec<PathBuf>,
        /// Generate a corpus: zipf:<s>:<portions>:<records>.
        #[arg(long)]
        synthetic: Option<String>,
        /// Where the synthetic corpus is written (a temporary directory if omitted).
        #[arg(long)]
        workdir: Option<PathBuf>,
        /// table, csv or plot.
        #[arg(long, default_value = "table")]
        format: String,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Fit the cost model to measured runs (JSONL of volume_bytes, significance, vcpus, pt_hours).
    Calibrate {
        #[arg(long)]
        runs: PathBuf,
        #[arg(long, default_value_t = 4)]
        reference_vcpus: u32,
        /// Fit separate exponents for the volume and significance terms.
        #[arg(long)]
        split_gamma: bool,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

fn parse_delimiter(s: &str) -> Result<u8> {
    match s {
        "\\n" | "\n" => Ok(b'\n'),
        "\\t" | "\t" => Ok(b'\t'),
        "\\0" => Ok(0),
        _ if s.len() == 1 => Ok(s.as_bytes()[0]),
        _ => Err(Error::Usage(format!("delimiter must be a single byte, got {s:?}")).into()),
    }
}

fn open(path: &Path) -> Result<BufReader<File>> {
    let f = File::open(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    Ok(BufReader::new(f))
}

fn write_output(path: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, bytes).map_err(|e| Error::Io {
            path: p.to_path_buf(),
            source: e,
        })?,
        None => io::stdout().write_all(bytes)?,
    }
    Ok(())
}

fn json<T: serde::Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut out = serde_json::to_vec_pretty(value)?;
    out.push(b'\n');
    Ok(out)
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    serde_json::from_reader(open(path)?)
        .map_err(|e| Error::Parse(format!("{}: {e}", path.display())).into())
}

fn pick_slo(scenario: &Scenario, condition: Option<&str>, pft: Option<f64>) -> Result<Slo> {
    let slos = scenario.slos()?;
    let mut slo = match condition {
        Some(c) => slos
            .into_iter()
            .find(|s| s.condition == c)
            .ok_or_else(|| Error::Usage(format!("scenario has no SLO condition {c:?}")))?,
        None => slos.into_iter().next().expect("scenario validation requires an SLO"),
    };
    if let Some(p) = pft {
        slo = Slo::new(p, slo.condition)?;
    }
    Ok(slo)
}

fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Chunk {
            inputs,
            portion_size,
            delimiter,
            output,
        } => {
            let manifest = chunk(&inputs, portion_size, parse_delimiter(&delimiter)?)?;
            let mut out = Vec::new();
            manifest.write_jsonl(&mut out)?;
            write_output(output.as_deref(), &out)?;
        }
        Command::Profile {
            manifest,
            measure,
            exact,
            seed,
            confidence_z,
            margin,
            p,
            delimiter,
            output,
        } => {
            let measure: SignificanceMeasure = measure.parse().map_err(|e: Error| Error::Usage(e.to_string()))?;
            let manifest = PortionManifest::read_jsonl(open(&manifest)?, 0, parse_delimiter(&delimiter)?)?;
            let estimates = if exact {
                exact_profile(&manifest, &measure)?
            } else {
                let spec = SamplingSpec {
                    confidence_z,
                    margin_e: margin,
                    p,
                    seed,
                };
                profile(&manifest, &measure, &spec)?
            };
            let skipped: u64 = estimates.iter().map(|e| e.skipped).sum();
            if skipped > 0 {
                eprintln!("skipped {skipped} malformed records");
            }
            let mut out = Vec::new();
            write_profile_jsonl(&estimates, &mut out)?;
            write_output(output.as_deref(), &out)?;
        }
        Command::Classify {
            profile,
            scenario,
            output,
        } => {
            let estimates = read_profile_jsonl(open(&profile)?)?;
            let result = match scenario {
                Some(path) => classify_estimates(&Scenario::load(&path)?, &estimates)?,
                None => {
                    let portions: Vec<_> = estimates.iter().map(|e| e.to_portion()).collect();
                    varprov::classify::classify_portions(&portions)?
                }
            };
            if result.degenerate {
                eprintln!("total significance is zero; every EF set to 1");
            }
            write_output(output.as_deref(), &json(&result)?)?;
        }
        Command::Plan {
            scenario,
            classes,
            condition,
            pft,
            strategy,
            output,
        } => {
            let scenario = Scenario::load(&scenario)?;
            let classification: ClassificationResult = read_json(&classes)?;
            let slo = pick_slo(&scenario, condition.as_deref(), pft)?;
            let input = PlannerInput {
                classification: &classification,
                catalog: &scenario.catalog,
                slo: &slo,
                calibration: &scenario.calibration,
            };
            let strategy: Strategy = match strategy.as_str() {
                "dv-aware" | "dv" => Strategy::DvAware,
                other => other.parse().map_err(|e: Error| Error::Usage(e.to_string()))?,
            };
            let plan = match strategy {
                Strategy::DvAware => plan_dv_aware(&input)?,
                Strategy::Oracle => plan_oracle(&input)?,
                tier => plan_baseline(&input, tier, scenario.tiers()?)?,
            };
            if !plan.feasible {
                eprintln!(
                    "{} misses the deadline: FT {} h, PFT {} h",
                    plan.strategy, plan.predicted_ft, plan.pft
                );
            }
            write_output(output.as_deref(), &json(&plan)?)?;
        }
        Command::Simulate {
            scenario,
            classes,
            plan,
            curve,
            output,
        } => {
            let scenario = Scenario::load(&scenario)?;
            let classification: ClassificationResult = read_json(&classes)?;
            let plan: ProvisionPlan = read_json(&plan)?;
            let sim = simulate(&plan, &classification, &scenario.calibration)?;
            verify_plan(&plan, &sim, &Slo::new(plan.pft, "plan")?)?;
            if let Some(path) = curve {
                let mut out = Vec::new();
                sim.write_curve(&mut out)?;
                write_output(Some(&path), &out)?;
            }
            write_output(output.as_deref(), &json(&sim)?)?;
        }
        Command::Compare {
            scenario,
            inputs,
            synthetic,
            workdir,
            format,
            output,
        } => {
            let format: ReportFormat = format.parse()?;
            let scenario = Scenario::load(&scenario)?;
            let synthetic = match synthetic {
                Some(s) => Some(s.parse::<SyntheticSpec>()?),
                None => scenario.synthetic.clone(),
            };
            let run = match synthetic {
                Some(spec) if inputs.is_empty() => {
                    let tmp;
                    let dir = match &workdir {
                        Some(d) => d.as_path(),
                        None => {
                            tmp = tempfile::tempdir()?;
                            tmp.path()
                        }
                    };
                    run_synthetic(&scenario, &spec, dir)?
                }
                _ if inputs.is_empty() => {
                    bail!(Error::Usage("compare needs corpus files or a synthetic corpus".into()))
                }
                _ => run_pipeline(&scenario, &inputs)?,
            };
            write_output(output.as_deref(), &emit_report(&run.report, format)?)?;
            if run.report.rows.iter().any(|r| r.strategy == Strategy::DvAware && !r.planned) {
                eprintln!("DV-aware cannot meet at least one deadline");
                return Ok(EXIT_INFEASIBLE);
            }
        }
        Command::Calibrate {
            runs,
            reference_vcpus,
            split_gamma,
            output,
        } => {
            let mut parsed = Vec::new();
            for (n, line) in std::io::BufRead::lines(open(&runs)?).enumerate() {
                let line = line.with_context(|| format!("reading {}", runs.display()))?;
                if line.trim().is_empty() {
                    continue;
                }
                let run: ProfileRun = serde_json::from_str(&line)
                    .map_err(|e| Error::Parse(format!("{} line {}: {e}", runs.display(), n + 1)))?;
                parsed.push(run);
            }
            let fit = if split_gamma {
                calibrate_split(&parsed, reference_vcpus)?
            } else {
                calibrate(&parsed, reference_vcpus)?
            };
            eprintln!("residual sum of squares: {}", fit.residual);
            write_output(output.as_deref(), &json(&fit.calibration)?)?;
        }
    }
    Ok(0)
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if let Some(e) = err.downcast_ref::<Error>() {
        return match e.root() {
            Error::Io { .. } => EXIT_IO,
            Error::InfeasibleSlo { .. } => EXIT_INFEASIBLE,
            Error::Usage(_) | Error::Parse(_) | Error::InvalidInput(_) | Error::CalibrationUnderdetermined(_) => {
                EXIT_USAGE
            }
            _ => 1,
        };
    }
    if err.downcast_ref::<io::Error>().is_some() || err.downcast_ref::<serde_json::Error>().is_some_and(|e| e.is_io()) {
        return EXIT_IO;
    }
    1
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
