//! Domain types shared by every stage, plus the cost, performance and
//! cost-per-performance identities.
//!
//! Money is fixed-point with six fractional digits so that reports are
//! byte-reproducible; durations are `f64` hours throughout.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign};
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

const MICROS_PER_UNIT: i64 = 1_000_000;

/// An exact amount of money, stored in millionths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Money(i64);

impl Money {
    pub const ZERO: Money = Money(0);

    pub const fn from_micros(micros: i64) -> Self {
        Money(micros)
    }

    pub const fn micros(self) -> i64 {
        self.0
    }

    /// Rounds half away from zero to the nearest micro-unit.
    pub fn from_f64(value: f64) -> Self {
        Money((value * MICROS_PER_UNIT as f64).round() as i64)
    }

    pub fn as_f64(self) -> f64 {
        self.0 as f64 / MICROS_PER_UNIT as f64
    }

    pub fn is_positive(self) -> bool {
        self.0 > 0
    }
}

impl fmt::Display for Money {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.0 < 0 { "-" } else { "" };
        let abs = self.0.unsigned_abs();
        let unit = MICROS_PER_UNIT as u64;
        write!(f, "{sign}{}.{:06}", abs / unit, abs % unit)
    }
}

impl FromStr for Money {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Parse(format!("invalid money amount {s:?}"));
        let t = s.trim();
        let (negative, digits) = match t.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, t.strip_prefix('+').unwrap_or(t)),
        };
        let (int_part, frac_part) = digits.split_once('.').unwrap_or((digits, ""));
        if int_part.is_empty() && frac_part.is_empty() {
            return Err(bad());
        }
        if !int_part.bytes().all(|b| b.is_ascii_digit())
            || !frac_part.bytes().all(|b| b.is_ascii_digit())
        {
            return Err(bad());
        }
        let int: i64 = if int_part.is_empty() {
            0
        } else {
            int_part.parse().map_err(|_| bad())?
        };
        let mut frac: i64 = 0;
        for (i, b) in frac_part.bytes().take(6).enumerate() {
            frac += i64::from(b - b'0') * 10i64.pow(5 - i as u32);
        }
        // round half up on the seventh digit
        if frac_part.len() > 6 && frac_part.as_bytes()[6] >= b'5' {
            frac += 1;
        }
        let micros = int
            .checked_mul(MICROS_PER_UNIT)
            .and_then(|v| v.checked_add(frac))
            .ok_or_else(bad)?;
        Ok(Money(if negative { -micros } else { micros }))
    }
}

impl Serialize for Money {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Money {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Text(String),
            Float(f64),
            Int(i64),
        }
        match Repr::deserialize(deserializer)? {
            Repr::Text(s) => s.parse().map_err(serde::de::Error::custom),
            Repr::Float(x) => Ok(Money::from_f64(x)),
            Repr::Int(i) => i
                .checked_mul(MICROS_PER_UNIT)
                .map(Money)
                .ok_or_else(|| serde::de::Error::custom("money amount overflows")),
        }
    }
}

impl Add for Money {
    type Output = Money;
    fn add(self, rhs: Money) -> Money {
        Money(self.0 + rhs.0)
    }
}

impl AddAssign for Money {
    fn add_assign(&mut self, rhs: Money) {
        self.0 += rhs.0;
    }
}

impl Sum for Money {
    fn sum<I: Iterator<Item = Money>>(iter: I) -> Money {
        iter.fold(Money::ZERO, Add::add)
    }
}

/// One entry of a server catalog.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ServerType {
    pub name: String,
    pub vcpus: u32,
    pub memory_gib: u32,
    /// Cost per time unit, in money per hour.
    pub cptu: Money,
}

impl ServerType {
    pub fn new(name: impl Into<String>, vcpus: u32, memory_gib: u32, cptu: Money) -> Result<Self> {
        let server = ServerType {
            name: name.into(),
            vcpus,
            memory_gib,
            cptu,
        };
        server.validate()?;
        Ok(server)
    }

    fn validate(&self) -> Result<()> {
        if self.name.is_empty() {
            return Err(Error::InvalidInput("server name is empty".into()));
        }
        if self.vcpus == 0 || self.memory_gib == 0 {
            return Err(Error::InvalidInput(format!(
                "server {} needs at least one vCPU and 1 GiB of memory",
                self.name
            )));
        }
        if !self.cptu.is_positive() {
            return Err(Error::InvalidInput(format!(
                "server {} has non-positive cost per hour {}",
                self.name, self.cptu
            )));
        }
        Ok(())
    }
}

/// A non-empty list of server types with unique names, strictly ascending in price.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(transparent)]
pub struct Catalog(Vec<ServerType>);

impl Catalog {
    /// Sorts `servers` by price and validates the catalog invariants.
    pub fn new(mut servers: Vec<ServerType>) -> Result<Self> {
        if servers.is_empty() {
            return Err(Error::InvalidInput("server catalog is empty".into()));
        }
        for s in &servers {
            s.validate()?;
        }
        let mut names = HashSet::new();
        for s in &servers {
            if !names.insert(s.name.as_str()) {
                return Err(Error::InvalidInput(format!("duplicate server name {}", s.name)));
            }
        }
        servers.sort_by_key(|s| s.cptu);
        if let Some(pair) = servers.windows(2).find(|w| w[0].cptu == w[1].cptu) {
            return Err(Error::InvalidInput(format!(
                "servers {} and {} have the same price; catalog order must be strict",
                pair[0].name, pair[1].name
            )));
        }
        Ok(Catalog(servers))
    }

    /// The five server configurations used throughout the evaluation
    /// (memory in GiB, vCPUs, dollars per hour).
    pub fn standard() -> Self {
        let rows = [
            ("S1", 4, 4, 239_000),
            ("S2", 8, 8, 489_000),
            ("S3", 16, 16, 959_000),
            ("S4", 32, 32, 1_919_000),
            ("S5", 64, 64, 3_838_000),
        ];
        Catalog(
            rows.iter()
                .map(|&(name, memory_gib, vcpus, micros)| ServerType {
                    name: name.to_string(),
                    vcpus,
                    memory_gib,
                    cptu: Money::from_micros(micros),
                })
                .collect(),
        )
    }

    pub fn servers(&self) -> &[ServerType] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, index: usize) -> Option<&ServerType> {
        self.0.get(index)
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.0.iter().position(|s| s.name == name)
    }
}

impl<'de> Deserialize<'de> for Catalog {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let servers = Vec::<ServerType>::deserialize(deserializer)?;
        Catalog::new(servers).map_err(serde::de::Error::custom)
    }
}

/// One equal-size chunk of the input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataPortion {
    pub id: u32,
    pub volume_bytes: u64,
    pub record_count: u64,
    pub significance: f64,
    pub significance_is_estimate: bool,
    /// Efficiency, attached by the classifier.
    pub ef: Option<f64>,
}

impl DataPortion {
    pub fn new(id: u32, volume_bytes: u64, record_count: u64, significance: f64) -> Self {
        DataPortion {
            id,
            volume_bytes,
            record_count,
            significance,
            significance_is_estimate: false,
            ef: None,
        }
    }
}

/// The three efficiency classes. Declaration order is also the
/// critical-path tie-break priority (most significant first).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ClassKind {
    #[serde(rename = "MSDT")]
    Msdt,
    #[serde(rename = "MeSDT")]
    Mesdt,
    #[serde(rename = "LSDT")]
    Lsdt,
}

impl ClassKind {
    pub const ALL: [ClassKind; 3] = [ClassKind::Msdt, ClassKind::Mesdt, ClassKind::Lsdt];

    pub fn label(self) -> &'static str {
        match self {
            ClassKind::Msdt => "MSDT",
            ClassKind::Mesdt => "MeSDT",
            ClassKind::Lsdt => "LSDT",
        }
    }
}

impl fmt::Display for ClassKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for ClassKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        ClassKind::ALL
            .into_iter()
            .find(|k| k.label().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Parse(format!("unknown class {s:?}")))
    }
}

/// A class and the aggregate workload of its member portions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarietyClass {
    pub kind: ClassKind,
    /// Member portion ids in manifest order.
    pub portions: Vec<u32>,
    pub total_volume: u64,
    pub total_significance: f64,
}

impl VarietyClass {
    pub fn is_empty(&self) -> bool {
        self.portions.is_empty()
    }
}

/// A deadline: the job must finish strictly before `pft` hours.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Slo {
    pub pft: f64,
    pub condition: String,
}

impl Slo {
    pub fn new(pft: f64, condition: impl Into<String>) -> Result<Self> {
        if !(pft.is_finite() && pft > 0.0) {
            return Err(Error::InvalidInput(format!("PFT must be positive, got {pft}")));
        }
        Ok(Slo {
            pft,
            condition: condition.into(),
        })
    }

    /// FT = PFT does not meet the deadline.
    pub fn is_met_by(&self, ft: f64) -> bool {
        ft < self.pft
    }
}

/// Preferred finishing times (hours) under the strict and normal SLO for
/// each benchmark application.
pub fn standard_slo(application: &str) -> Option<(f64, f64)> {
    let table: &[(&str, f64, f64)] = &[
        ("WordCount", 10.0, 11.0),
        ("Grep", 5.0, 6.0),
        ("InvertedIndex", 2000.0, 2200.0),
        ("Health", 6.0, 7.0),
        ("Investment", 5.0, 6.0),
        ("URL counting", 6.0, 7.0),
        ("TPC-H(MAIL)", 5.5, 6.0),
        ("TPC-H(SHIP)", 5.5, 6.0),
        ("TPC-H(AIR)", 5.5, 6.0),
        ("TPC-H(RAIL)", 5.5, 6.0),
        ("TPC-H(TRUCK)", 5.5, 6.0),
        ("Amazon (Music)", 5.5, 6.0),
        ("Amazon (Books)", 5.5, 6.0),
        ("Amazon (Movies)", 5.5, 6.0),
        ("Amazon (Clothing)", 5.5, 6.0),
        ("Amazon (Phones)", 5.5, 6.0),
    ];
    table
        .iter()
        .find(|(name, _, _)| name.eq_ignore_ascii_case(application))
        .map(|&(_, strict, normal)| (strict, normal))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Strategy {
    #[serde(rename = "DV-aware")]
    DvAware,
    #[serde(rename = "STRONG")]
    Strong,
    #[serde(rename = "MODERATE")]
    Moderate,
    #[serde(rename = "WEAK")]
    Weak,
    #[serde(rename = "ORACLE")]
    Oracle,
}

impl Strategy {
    pub fn label(self) -> &'static str {
        match self {
            Strategy::DvAware => "DV-aware",
            Strategy::Strong => "STRONG",
            Strategy::Moderate => "MODERATE",
            Strategy::Weak => "WEAK",
            Strategy::Oracle => "ORACLE",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Strategy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        [
            Strategy::DvAware,
            Strategy::Strong,
            Strategy::Moderate,
            Strategy::Weak,
            Strategy::Oracle,
        ]
        .into_iter()
        .find(|k| k.label().eq_ignore_ascii_case(s))
        .ok_or_else(|| Error::Parse(format!("unknown strategy {s:?}")))
    }
}

/// How the classes of a plan share time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExecutionMode {
    /// One server per class, classes run concurrently; FT is the slowest class.
    ParallelClasses,
    /// Everything on one server, classes back to back; FT is the sum.
    SingleServer,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Upgrade {
    pub iteration: u32,
    pub class: ClassKind,
    pub from: String,
    pub to: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProvisionPlan {
    pub strategy: Strategy,
    pub mode: ExecutionMode,
    pub assignment: BTreeMap<ClassKind, ServerType>,
    pub class_pt: BTreeMap<ClassKind, f64>,
    pub per_class_cost: BTreeMap<ClassKind, Money>,
    pub predicted_ft: f64,
    pub predicted_pc: Money,
    pub upgrade_trace: Vec<Upgrade>,
    pub pft: f64,
    pub feasible: bool,
}

impl ProvisionPlan {
    /// Server names used by this plan, in catalog order of first appearance.
    pub fn servers_used(&self) -> Vec<String> {
        let mut used: Vec<&ServerType> = self.assignment.values().collect();
        used.sort_by_key(|s| s.cptu);
        used.dedup_by(|a, b| a.name == b.name);
        used.into_iter().map(|s| s.name.clone()).collect()
    }
}

/// Sum over servers of price times that server's processing time.
pub fn total_cost(per_server_time: &[(Money, f64)]) -> Result<Money> {
    let mut total = 0.0;
    for &(cptu, pt) in per_server_time {
        if !(pt >= 0.0) {
            return Err(Error::InvalidInput(format!("processing time must be non-negative, got {pt}")));
        }
        if !cptu.is_positive() {
            return Err(Error::InvalidInput(format!("cost per hour must be positive, got {cptu}")));
        }
        total += cptu.as_f64() * pt;
    }
    Ok(Money::from_f64(total))
}

/// Result produced per hour of processing.
pub fn performance(total_result: f64, total_pt: f64) -> Result<f64> {
    if total_pt == 0.0 {
        return Err(Error::DivisionDomain("performance over zero processing time"));
    }
    Ok(total_result / total_pt)
}

/// Cost per performance: `cptu * pt^2 / significance`.
pub fn cpp(cptu: f64, total_pt: f64, total_significance: f64) -> Result<f64> {
    if total_significance == 0.0 {
        return Err(Error::DegenerateClass);
    }
    if !(total_pt >= 0.0) || !(total_significance > 0.0) {
        return Err(Error::InvalidInput(format!(
            "cpp needs pt >= 0 and significance > 0, got pt={total_pt}, significance={total_significance}"
        )));
    }
    Ok(cptu * total_pt * total_pt / total_significance)
}
