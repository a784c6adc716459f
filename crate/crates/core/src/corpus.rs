//! Splitting input files into record-aligned portions, and the significance
//! measures that score them.

use std::collections::HashSet;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use regex::Regex;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub const DEFAULT_PORTION_SIZE: u64 = 128 * 1024 * 1024;
pub const DEFAULT_DELIMITER: u8 = b'\n';

/// Separator between fields for the field-based measures.
pub const FIELD_SEPARATOR: char = ',';

/// One portion of the manifest. Field order is the on-disk order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PortionEntry {
    pub id: u32,
    pub path: PathBuf,
    pub offset: u64,
    pub length: u64,
    pub records: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PortionManifest {
    pub sources: Vec<PathBuf>,
    pub portion_size_bytes: u64,
    pub delimiter: u8,
    pub portions: Vec<PortionEntry>,
}

impl PortionManifest {
    pub fn total_bytes(&self) -> u64 {
        self.portions.iter().map(|p| p.length).sum()
    }

    pub fn write_jsonl<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for p in &self.portions {
            serde_json::to_writer(&mut out, p)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(input: R, portion_size_bytes: u64, delimiter: u8) -> Result<Self> {
        let mut portions = Vec::new();
        for (n, line) in input.lines().enumerate() {
            let line = line.map_err(|e| Error::io("<manifest>", e))?;
            if line.trim().is_empty() {
                continue;
            }
            let entry: PortionEntry = serde_json::from_str(&line)
                .map_err(|e| Error::Parse(format!("manifest line {}: {e}", n + 1)))?;
            portions.push(entry);
        }
        let mut sources: Vec<PathBuf> = Vec::new();
        for p in &portions {
            if sources.last() != Some(&p.path) {
                sources.push(p.path.clone());
            }
        }
        Ok(PortionManifest {
            sources,
            portion_size_bytes,
            delimiter,
            portions,
        })
    }
}

/// Tiles `paths` into portions of at most `portion_size_bytes`, never
/// splitting a record. Portions do not span files.
pub fn chunk<P: AsRef<Path>>(paths: &[P], portion_size_bytes: u64, delimiter: u8) -> Result<PortionManifest> {
    if portion_size_bytes == 0 {
        return Err(Error::InvalidInput("portion size must be at least one byte".into()));
    }
    let mut portions = Vec::new();
    let mut next_id: u32 = 0;
    for path in paths {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut reader = BufReader::with_capacity(1 << 20, file);
        let mut record = Vec::new();
        let mut offset = 0u64;
        let mut start = 0u64;
        let mut length = 0u64;
        let mut records = 0u64;
        loop {
            record.clear();
            let n = reader
                .read_until(delimiter, &mut record)
                .map_err(|e| Error::io(path, e))? as u64;
            if n == 0 {
                break;
            }
            if n > portion_size_bytes {
                return Err(Error::OversizeRecord {
                    path: path.to_path_buf(),
                    offset,
                    record_len: n,
                    portion_size: portion_size_bytes,
                });
            }
            if length + n > portion_size_bytes {
                portions.push(PortionEntry {
                    id: next_id,
                    path: path.to_path_buf(),
                    offset: start,
                    length,
                    records,
                });
                next_id += 1;
                start = offset;
                length = 0;
                records = 0;
            }
            length += n;
            records += 1;
            offset += n;
        }
        if length > 0 {
            portions.push(PortionEntry {
                id: next_id,
                path: path.to_path_buf(),
                offset: start,
                length,
                records,
            });
            next_id += 1;
        }
    }
    Ok(PortionManifest {
        sources: paths.iter().map(|p| p.as_ref().to_path_buf()).collect(),
        portion_size_bytes,
        delimiter,
        portions,
    })
}

/// Reads the raw bytes of one portion.
pub fn read_portion(entry: &PortionEntry) -> Result<Vec<u8>> {
    let mut file = File::open(&entry.path).map_err(|e| Error::io(&entry.path, e))?;
    file.seek(SeekFrom::Start(entry.offset))
        .map_err(|e| Error::io(&entry.path, e))?;
    let mut buf = vec![0u8; entry.length as usize];
    file.read_exact(&mut buf).map_err(|e| Error::io(&entry.path, e))?;
    Ok(buf)
}

/// Records of `buf` without their delimiter. A trailing delimiter does not
/// start a new record; an unterminated final record is still a record.
pub fn records(buf: &[u8], delimiter: u8) -> impl Iterator<Item = &[u8]> {
    let body = match buf.last() {
        Some(&b) if b == delimiter => &buf[..buf.len() - 1],
        _ => buf,
    };
    let mut pieces = body.split(move |&b| b == delimiter);
    let mut done = buf.is_empty();
    std::iter::from_fn(move || {
        if done {
            return None;
        }
        let next = pieces.next();
        if next.is_none() {
            done = true;
        }
        next
    })
}

/// Byte ranges of each record, for random access by the sampler.
pub fn record_spans(buf: &[u8], delimiter: u8) -> Vec<(usize, usize)> {
    let mut spans = Vec::new();
    let mut start = 0;
    for (i, &b) in buf.iter().enumerate() {
        if b == delimiter {
            spans.push((start, i));
            start = i + 1;
        }
    }
    if start < buf.len() {
        spans.push((start, buf.len()));
    }
    spans
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmpOp {
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
}

impl CmpOp {
    fn symbol(self) -> &'static str {
        match self {
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
            CmpOp::Eq => "==",
            CmpOp::Ne => "!=",
        }
    }

    fn holds(self, lhs: f64, rhs: f64) -> bool {
        match self {
            CmpOp::Lt => lhs < rhs,
            CmpOp::Le => lhs <= rhs,
            CmpOp::Gt => lhs > rhs,
            CmpOp::Ge => lhs >= rhs,
            CmpOp::Eq => lhs == rhs,
            CmpOp::Ne => lhs != rhs,
        }
    }
}

/// `field op value` over a comma-separated record, 0-based field index.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Predicate {
    pub field: usize,
    pub op: CmpOp,
    pub value: f64,
}

impl FromStr for Predicate {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        // two-character operators first
        for op in [CmpOp::Le, CmpOp::Ge, CmpOp::Eq, CmpOp::Ne, CmpOp::Lt, CmpOp::Gt] {
            if let Some((field, value)) = s.split_once(op.symbol()) {
                let field = field
                    .trim()
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad field index in predicate {s:?}")))?;
                let value = value
                    .trim()
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad value in predicate {s:?}")))?;
                return Ok(Predicate { field, op, value });
            }
        }
        Err(Error::Parse(format!("predicate {s:?} has no comparison operator")))
    }
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}{}", self.field, self.op.symbol(), self.value)
    }
}

/// How partial results of a measure combine.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MergeKind {
    Additive,
    SumCount,
}

/// What counts as "result" for each accumulative application.
#[derive(Debug, Clone, PartialEq)]
pub enum SignificanceMeasure {
    /// Words, a word being a maximal run of non-whitespace.
    WordCount,
    /// Whole-word occurrences of a word or phrase.
    PatternCount { pattern: String, case_insensitive: bool },
    /// Distinct (term, record) pairs.
    InvertedIndexSize,
    /// Records satisfying a numeric predicate.
    PredicateCount(Predicate),
    FieldSum { field: usize },
    FieldAvg { field: usize },
    /// Occurrences of a URL as a standalone token.
    UrlCount { url: String },
}

impl SignificanceMeasure {
    pub fn merge_kind(&self) -> MergeKind {
        match self {
            SignificanceMeasure::FieldAvg { .. } => MergeKind::SumCount,
            _ => MergeKind::Additive,
        }
    }

    /// Whether malformed records are possible (and tallied) for this measure.
    pub fn uses_fields(&self) -> bool {
        matches!(
            self,
            SignificanceMeasure::PredicateCount(_)
                | SignificanceMeasure::FieldSum { .. }
                | SignificanceMeasure::FieldAvg { .. }
        )
    }

    pub fn scanner(&self) -> Result<Scanner> {
        let pattern = match self {
            SignificanceMeasure::PatternCount {
                pattern,
                case_insensitive,
            } => {
                if pattern.is_empty() {
                    return Err(Error::InvalidInput("pattern is empty".into()));
                }
                let escaped = regex::escape(pattern);
                let src = if *case_insensitive {
                    format!("(?i){escaped}")
                } else {
                    escaped
                };
                Some(Regex::new(&src).map_err(|e| Error::InvalidInput(e.to_string()))?)
            }
            _ => None,
        };
        Ok(Scanner {
            measure: self.clone(),
            pattern,
        })
    }
}

impl fmt::Display for SignificanceMeasure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SignificanceMeasure::WordCount => f.write_str("word_count"),
            SignificanceMeasure::PatternCount {
                pattern,
                case_insensitive: false,
            } => write!(f, "pattern_count:{pattern}"),
            SignificanceMeasure::PatternCount {
                pattern,
                case_insensitive: true,
            } => write!(f, "pattern_count_ci:{pattern}"),
            SignificanceMeasure::InvertedIndexSize => f.write_str("inverted_index_size"),
            SignificanceMeasure::PredicateCount(p) => write!(f, "predicate_count:{p}"),
            SignificanceMeasure::FieldSum { field } => write!(f, "field_sum:{field}"),
            SignificanceMeasure::FieldAvg { field } => write!(f, "field_avg:{field}"),
            SignificanceMeasure::UrlCount { url } => write!(f, "url_count:{url}"),
        }
    }
}

impl FromStr for SignificanceMeasure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (name, arg) = match s.split_once(':') {
            Some((n, a)) => (n, Some(a)),
            None => (s, None),
        };
        let need = |what: &str| {
            arg.filter(|a| !a.is_empty())
                .ok_or_else(|| Error::Parse(format!("measure {name} needs a {what}")))
        };
        let field = || -> Result<usize> {
            need("field index")?
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("bad field index in {s:?}")))
        };
        Ok(match name {
            "word_count" => SignificanceMeasure::WordCount,
            "inverted_index_size" => SignificanceMeasure::InvertedIndexSize,
            "pattern_count" => SignificanceMeasure::PatternCount {
                pattern: need("pattern")?.to_string(),
                case_insensitive: false,
            },
            "pattern_count_ci" => SignificanceMeasure::PatternCount {
                pattern: need("pattern")?.to_string(),
                case_insensitive: true,
            },
            "predicate_count" => SignificanceMeasure::PredicateCount(need("predicate")?.parse()?),
            "field_sum" => SignificanceMeasure::FieldSum { field: field()? },
            "field_avg" => SignificanceMeasure::FieldAvg { field: field()? },
            "url_count" => SignificanceMeasure::UrlCount {
                url: need("url")?.to_string(),
            },
            other => return Err(Error::Parse(format!("unknown significance measure {other:?}"))),
        })
    }
}

impl Serialize for SignificanceMeasure {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for SignificanceMeasure {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(deserializer)?
            .parse()
            .map_err(serde::de::Error::custom)
    }
}

/// A significance value: a plain sum, or a (sum, count) pair for averages.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SigValue {
    Additive(f64),
    SumCount { sum: f64, count: f64 },
}

impl SigValue {
    pub fn zero(kind: MergeKind) -> Self {
        match kind {
            MergeKind::Additive => SigValue::Additive(0.0),
            MergeKind::SumCount => SigValue::SumCount { sum: 0.0, count: 0.0 },
        }
    }

    pub fn kind(&self) -> MergeKind {
        match self {
            SigValue::Additive(_) => MergeKind::Additive,
            SigValue::SumCount { .. } => MergeKind::SumCount,
        }
    }

    /// The scalar used for classification and cost: the sum component.
    pub fn magnitude(&self) -> f64 {
        match *self {
            SigValue::Additive(x) => x,
            SigValue::SumCount { sum, .. } => sum,
        }
    }

    /// The value as reported to a user (averages are reduced here).
    pub fn reduced(&self) -> f64 {
        match *self {
            SigValue::Additive(x) => x,
            SigValue::SumCount { count: 0.0, .. } => 0.0,
            SigValue::SumCount { sum, count } => sum / count,
        }
    }

    /// Multiplies every component by `num / den`, dividing last.
    pub fn scaled(&self, num: f64, den: f64) -> Self {
        match *self {
            SigValue::Additive(x) => SigValue::Additive(x * num / den),
            SigValue::SumCount { sum, count } => SigValue::SumCount {
                sum: sum * num / den,
                count: count * num / den,
            },
        }
    }
}

pub fn merge_significance(a: SigValue, b: SigValue) -> Result<SigValue> {
    match (a, b) {
        (SigValue::Additive(x), SigValue::Additive(y)) => Ok(SigValue::Additive(x + y)),
        (SigValue::SumCount { sum: s1, count: c1 }, SigValue::SumCount { sum: s2, count: c2 }) => {
            Ok(SigValue::SumCount {
                sum: s1 + s2,
                count: c1 + c2,
            })
        }
        _ => Err(Error::InvalidMerge),
    }
}

/// A measure compiled for repeated record evaluation.
#[derive(Debug, Clone)]
pub struct Scanner {
    measure: SignificanceMeasure,
    pattern: Option<Regex>,
}

/// Contribution of a single record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RecordScore {
    Value(SigValue),
    Malformed,
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

fn field(record: &str, index: usize) -> Option<f64> {
    record.split(FIELD_SEPARATOR).nth(index)?.trim().parse().ok()
}

impl Scanner {
    pub fn measure(&self) -> &SignificanceMeasure {
        &self.measure
    }

    pub fn score(&self, record: &[u8]) -> RecordScore {
        let text = String::from_utf8_lossy(record);
        let text = text.strip_suffix('\r').unwrap_or(&text);
        let additive = |n: usize| RecordScore::Value(SigValue::Additive(n as f64));
        match &self.measure {
            SignificanceMeasure::WordCount => additive(text.split_whitespace().count()),
            SignificanceMeasure::PatternCount { .. } => {
                additive(self.whole_word_matches(text))
            }
            SignificanceMeasure::InvertedIndexSize => {
                additive(text.split_whitespace().collect::<HashSet<_>>().len())
            }
            SignificanceMeasure::UrlCount { url } => additive(
                text.split_whitespace()
                    .map(|t| t.trim_matches(|c| matches!(c, '"' | '\'' | '<' | '>' | '(' | ')' | '[' | ']')))
                    .filter(|t| t == url)
                    .count(),
            ),
            SignificanceMeasure::PredicateCount(p) => match field(text, p.field) {
                Some(v) => additive(usize::from(p.op.holds(v, p.value))),
                None => RecordScore::Malformed,
            },
            SignificanceMeasure::FieldSum { field: i } => match field(text, *i) {
                Some(v) => RecordScore::Value(SigValue::Additive(v)),
                None => RecordScore::Malformed,
            },
            SignificanceMeasure::FieldAvg { field: i } => match field(text, *i) {
                Some(v) => RecordScore::Value(SigValue::SumCount { sum: v, count: 1.0 }),
                None => RecordScore::Malformed,
            },
        }
    }

    fn whole_word_matches(&self, text: &str) -> usize {
        let Some(re) = &self.pattern else { return 0 };
        let mut count = 0;
        let mut pos = 0;
        while pos <= text.len() {
            let Some(m) = re.find_at(text, pos) else { break };
            let before_ok = text[..m.start()].chars().next_back().is_none_or(|c| !is_word_char(c));
            let after_ok = text[m.end()..].chars().next().is_none_or(|c| !is_word_char(c));
            if before_ok && after_ok && !m.as_str().is_empty() {
                count += 1;
                pos = m.end();
            } else {
                // retry one character further on
                pos = m.start() + text[m.start()..].chars().next().map_or(1, char::len_utf8);
            }
        }
        count
    }
}

/// Outcome of a full scan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanTally {
    pub value: SigValue,
    pub records: u64,
    pub skipped: u64,
}

/// Scores every record of `buf`; malformed records are skipped and counted.
pub fn scan_records(buf: &[u8], delimiter: u8, scanner: &Scanner) -> ScanTally {
    let mut value = SigValue::zero(scanner.measure.merge_kind());
    let mut records_seen = 0;
    let mut skipped = 0;
    for rec in records(buf, delimiter) {
        records_seen += 1;
        match scanner.score(rec) {
            RecordScore::Value(v) => {
                value = merge_significance(value, v).expect("scanner yields its own kind");
            }
            RecordScore::Malformed => skipped += 1,
        }
    }
    ScanTally {
        value,
        records: records_seen,
        skipped,
    }
}

/// Exact significance of one portion by full scan.
pub fn exact_significance(entry: &PortionEntry, delimiter: u8, measure: &SignificanceMeasure) -> Result<ScanTally> {
    let buf = read_portion(entry)?;
    Ok(scan_records(&buf, delimiter, &measure.scanner()?))
}
