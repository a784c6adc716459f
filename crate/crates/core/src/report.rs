//! Strategy comparison reports and their table, CSV and plot renderings.
//!
//! CSV schema, version 1. Every line has the columns
//! `record,key,value,condition,strategy,pft,ft,pc,feasible,planned,servers,upgrades,norm_time,norm_cost,dv_improvement,time,cumulative`.
//! `record` is one of
//! - `meta`: `key` and `value` only;
//! - `row`: one strategy under one condition; `servers` joined with `+`;
//! - `point`: one point of a progressive curve (`condition`, `strategy`, `time`, `cumulative`).
//!
//! Empty cells are absent values.

use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Money, Strategy};
use crate::simulate::CurvePoint;

pub const CSV_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub condition: String,
    pub pft: f64,
    pub strategy: Strategy,
    /// Simulated finishing time; for an unplanned row, the fastest achievable.
    pub ft: f64,
    pub pc: Money,
    pub feasible: bool,
    /// False when no plan could be produced.
    pub planned: bool,
    pub servers: Vec<String>,
    pub upgrades: usize,
    /// Relative to STRONG under the same condition.
    pub norm_time: Option<f64>,
    pub norm_cost: Option<f64>,
    /// 1 - PC_dv / PC_this, on baseline rows.
    pub dv_improvement: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveSeries {
    pub condition: String,
    pub strategy: Strategy,
    pub points: Vec<CurvePoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub version: u32,
    pub scenario: String,
    pub measure: String,
    pub portions: usize,
    pub total_volume: u64,
    pub total_significance: f64,
    pub sampling_overhead: Option<f64>,
    pub rows: Vec<ReportRow>,
    pub curves: Vec<CurveSeries>,
}

impl ComparisonReport {
    pub fn row(&self, condition: &str, strategy: Strategy) -> Option<&ReportRow> {
        self.rows
            .iter()
            .find(|r| r.condition == condition && r.strategy == strategy)
    }

    pub fn conditions(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for r in &self.rows {
            if !out.contains(&r.condition.as_str()) {
                out.push(&r.condition);
            }
        }
        out
    }

    /// Fills the STRONG-relative columns and the savings of DV-aware.
    pub fn fill_relative_columns(&mut self) {
        for condition in self.conditions().into_iter().map(String::from).collect::<Vec<_>>() {
            let strong = self.row(&condition, Strategy::Strong).filter(|r| r.planned).cloned();
            let dv = self.row(&condition, Strategy::DvAware).filter(|r| r.planned).cloned();
            for r in self.rows.iter_mut().filter(|r| r.condition == condition) {
                if let Some(s) = &strong {
                    if r.planned && s.ft > 0.0 && s.pc.is_positive() {
                        r.norm_time = Some(r.ft / s.ft);
                        r.norm_cost = Some(r.pc.as_f64() / s.pc.as_f64());
                    }
                }
                if let Some(d) = &dv {
                    if r.strategy != Strategy::DvAware && r.planned && r.pc.is_positive() {
                        r.dv_improvement = Some(1.0 - d.pc.as_f64() / r.pc.as_f64());
                    }
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Table,
    Csv,
    Plot,
}

impl FromStr for ReportFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "table" => Ok(ReportFormat::Table),
            "csv" => Ok(ReportFormat::Csv),
            "plot" => Ok(ReportFormat::Plot),
            other => Err(Error::Usage(format!("unknown report format {other:?}; use table, csv or plot"))),
        }
    }
}

pub fn emit_report(report: &ComparisonReport, format: ReportFormat) -> Result<Vec<u8>> {
    Ok(match format {
        ReportFormat::Table => render_table(report).into_bytes(),
        ReportFormat::Csv => render_csv(report)?,
        ReportFormat::Plot => render_plot(report).into_bytes(),
    })
}

fn pct(x: Option<f64>) -> String {
    x.map_or_else(|| "-".to_string(), |v| format!("{:.1}%", v * 100.0))
}

fn ratio(x: Option<f64>) -> String {
    x.map_or_else(|| "-".to_string(), |v| format!("{v:.3}"))
}

fn render_table(report: &ComparisonReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "Scenario: {}", report.scenario);
    let _ = writeln!(s, "Measure: {}", report.measure);
    let _ = writeln!(
        s,
        "Portions: {}  Volume: {} bytes  Significance: {:.1}",
        report.portions, report.total_volume, report.total_significance
    );
    if let Some(o) = report.sampling_overhead {
        let _ = writeln!(s, "Sampling overhead: {:.3}% of records", o * 100.0);
    }
    if report.rows.is_empty() {
        let _ = writeln!(s, "\nNo portions; nothing to compare.");
        return s;
    }
    for condition in report.conditions() {
        let rows: Vec<&ReportRow> = report.rows.iter().filter(|r| r.condition == condition).collect();
        let _ = writeln!(s, "\nCondition: {condition} (PFT {} h)", rows[0].pft);
        let _ = writeln!(
            s,
            "{:<10} {:>12} {:>14} {:>9} {:>9} {:>9} {:>10}",
            "Strategy", "Time (h)", "Cost", "Meets SLO", "Time/STR", "Cost/STR", "DV saving"
        );
        for r in rows {
            if r.planned {
                let _ = writeln!(
                    s,
                    "{:<10} {:>12.4} {:>14} {:>9} {:>9} {:>9} {:>10}",
                    r.strategy.label(),
                    r.ft,
                    r.pc.to_string(),
                    if r.feasible { "yes" } else { "no" },
                    ratio(r.norm_time),
                    ratio(r.norm_cost),
                    pct(r.dv_improvement)
                );
            } else {
                let _ = writeln!(
                    s,
                    "{:<10} infeasible: fastest achievable FT is {:.4} h",
                    r.strategy.label(),
                    r.ft
                );
            }
        }
    }
    let _ = writeln!(s, "\nServer types used");
    let _ = writeln!(s, "{:<10} {:<10} Servers", "Condition", "Strategy");
    for r in report.rows.iter().filter(|r| r.planned) {
        let _ = writeln!(s, "{:<10} {:<10} {}", r.condition, r.strategy.label(), r.servers.join(", "));
    }
    s
}

fn render_plot(report: &ComparisonReport) -> String {
    let mut s = String::new();
    for (i, c) in report.curves.iter().enumerate() {
        if i > 0 {
            s.push_str("\n\n");
        }
        let _ = writeln!(s, "# {} {}", c.condition, c.strategy.label());
        for p in &c.points {
            let _ = writeln!(s, "{} {}", p.time, p.cumulative);
        }
    }
    s
}

#[derive(Debug, Default, Serialize, Deserialize)]
struct CsvLine {
    record: String,
    key: Option<String>,
    value: Option<String>,
    condition: Option<String>,
    strategy: Option<Strategy>,
    pft: Option<f64>,
    ft: Option<f64>,
    pc: Option<Money>,
    feasible: Option<bool>,
    planned: Option<bool>,
    servers: Option<String>,
    upgrades: Option<usize>,
    norm_time: Option<f64>,
    norm_cost: Option<f64>,
    dv_improvement: Option<f64>,
    time: Option<f64>,
    cumulative: Option<f64>,
}

fn meta(key: &str, value: String) -> CsvLine {
    CsvLine {
        record: "meta".into(),
        key: Some(key.into()),
        value: Some(value),
        ..Default::default()
    }
}

fn render_csv(report: &ComparisonReport) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::InvalidInput(format!("csv: {e}"));
    let mut lines = vec![
        meta("version", report.version.to_string()),
        meta("scenario", report.scenario.clone()),
        meta("measure", report.measure.clone()),
        meta("portions", report.portions.to_string()),
        meta("total_volume", report.total_volume.to_string()),
        meta("total_significance", report.total_significance.to_string()),
    ];
    if let Some(o) = report.sampling_overhead {
        lines.push(meta("sampling_overhead", o.to_string()));
    }
    for r in &report.rows {
        lines.push(CsvLine {
            record: "row".into(),
            condition: Some(r.condition.clone()),
            strategy: Some(r.strategy),
            pft: Some(r.pft),
            ft: Some(r.ft),
            pc: Some(r.pc),
            feasible: Some(r.feasible),
            planned: Some(r.planned),
            servers: Some(r.servers.join("+")),
            upgrades: Some(r.upgrades),
            norm_time: r.norm_time,
            norm_cost: r.norm_cost,
            dv_improvement: r.dv_improvement,
            ..Default::default()
        });
    }
    for c in &report.curves {
        for p in &c.points {
            lines.push(CsvLine {
                record: "point".into(),
                condition: Some(c.condition.clone()),
                strategy: Some(c.strategy),
                time: Some(p.time),
                cumulative: Some(p.cumulative),
                ..Default::default()
            });
        }
    }
    for l in &lines {
        w.serialize(l).map_err(csv_err)?;
    }
    w.into_inner().map_err(|e| Error::InvalidInput(format!("csv: {e}")))
}

/// Reads a CSV report back.
pub fn parse_csv(bytes: &[u8]) -> Result<ComparisonReport> {
    let mut rdr = csv::Reader::from_reader(bytes);
    let mut report = ComparisonReport {
        version: 0,
        scenario: String::new(),
        measure: String::new(),
        portions: 0,
        total_volume: 0,
        total_significance: 0.0,
        sampling_overhead: None,
        rows: Vec::new(),
        curves: Vec::new(),
    };
    let bad = |what: &str| Error::Parse(format!("csv report: {what}"));
    fn num<T: FromStr>(v: &str, key: &str) -> Result<T> {
        v.parse().map_err(|_| Error::Parse(format!("csv report: bad value for {key}")))
    }
    for line in rdr.deserialize::<CsvLine>() {
        let line = line.map_err(|e| Error::Parse(format!("csv report: {e}")))?;
        match line.record.as_str() {
            "meta" => {
                let key = line.key.ok_or_else(|| bad("meta line without key"))?;
                let value = line.value.unwrap_or_default();
                match key.as_str() {
                    "version" => {
                        report.version = num(&value, &key)?;
                        if report.version != CSV_VERSION {
                            return Err(bad(&format!("unsupported version {}", report.version)));
                        }
                    }
                    "scenario" => report.scenario = value,
                    "measure" => report.measure = value,
                    "portions" => report.portions = num(&value, &key)?,
                    "total_volume" => report.total_volume = num(&value, &key)?,
                    "total_significance" => report.total_significance = num(&value, &key)?,
                    "sampling_overhead" => report.sampling_overhead = Some(num(&value, &key)?),
                    other => return Err(bad(&format!("unknown meta key {other}"))),
                }
            }
            "row" => {
                let need = |x: Option<_>, what: &str| x.ok_or_else(|| bad(&format!("row without {what}")));
                let servers = line.servers.unwrap_or_default();
                report.rows.push(ReportRow {
                    condition: line.condition.unwrap_or_default(),
                    pft: need(line.pft, "pft")?,
                    strategy: line.strategy.ok_or_else(|| bad("row without strategy"))?,
                    ft: need(line.ft, "ft")?,
                    pc: line.pc.ok_or_else(|| bad("row without pc"))?,
                    feasible: line.feasible.ok_or_else(|| bad("row without feasible"))?,
                    planned: line.planned.ok_or_else(|| bad("row without planned"))?,
                    servers: if servers.is_empty() {
                        Vec::new()
                    } else {
                        servers.split('+').map(String::from).collect()
                    },
                    upgrades: line.upgrades.unwrap_or(0),
                    norm_time: line.norm_time,
                    norm_cost: line.norm_cost,
                    dv_improvement: line.dv_improvement,
                });
            }
            "point" => {
                let condition = line.condition.unwrap_or_default();
                let strategy = line.strategy.ok_or_else(|| bad("point without strategy"))?;
                let point = CurvePoint {
                    time: line.time.ok_or_else(|| bad("point without time"))?,
                    cumulative: line.cumulative.ok_or_else(|| bad("point without cumulative"))?,
                };
                match report.curves.last_mut() {
                    Some(c) if c.condition == condition && c.strategy == strategy => c.points.push(point),
                    _ => report.curves.push(CurveSeries {
                        condition,
                        strategy,
                        points: vec![point],
                    }),
                }
            }
            other => return Err(bad(&format!("unknown record type {other}"))),
        }
    }
    if report.version == 0 {
        return Err(bad("missing version"));
    }
    Ok(report)
}
