use std::path::PathBuf;

use crate::model::ClassKind;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("division by zero: {0}")]
    DivisionDomain(&'static str),

    #[error("class has zero total significance; CPP is undefined")]
    DegenerateClass,

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(
        "record of {record_len} bytes at offset {offset} in {path} exceeds the portion size of {portion_size} bytes"
    )]
    OversizeRecord {
        path: PathBuf,
        offset: u64,
        record_len: u64,
        portion_size: u64,
    },

    #[error("cannot merge significance values produced by different measures")]
    InvalidMerge,

    #[error("calibration is underdetermined: {0}")]
    CalibrationUnderdetermined(String),

    #[error("SLO is infeasible: PFT is {pft} h but the fastest achievable FT is {min_achievable_ft} h")]
    InfeasibleSlo { pft: f64, min_achievable_ft: f64 },

    #[error("invalid plan: class {0} has portions but no assigned server")]
    UnassignedClass(ClassKind),

    #[error("prediction diverges from simulation on {what}: predicted {predicted}, simulated {simulated}")]
    PredictionDivergence {
        what: &'static str,
        predicted: String,
        simulated: String,
    },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("usage error: {0}")]
    Usage(String),

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// The underlying error with stage labels removed.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            other => other,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

/// Labels errors from one pipeline stage.
pub(crate) trait StageContext<T> {
    fn stage(self, stage: &'static str) -> Result<T>;
}

impl<T> StageContext<T> for Result<T> {
    fn stage(self, stage: &'static str) -> Result<T> {
        self.map_err(|e| Error::Stage {
            stage,
            source: Box::new(e),
        })
    }
}
