use thiserror::Error;

/// Errors raised anywhere in the fitting pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("unequal series length: subject {subject} has {found} time points, expected {expected}")]
    UnequalSeriesLength {
        subject: String,
        found: usize,
        expected: usize,
    },

    #[error("missing value at ({subject},{time},{column})")]
    MissingValue {
        subject: String,
        time: i64,
        column: String,
    },

    #[error("duplicate observation for subject {subject} at time {time}")]
    DuplicateObservation { subject: String, time: i64 },

    #[error("non-consecutive times for subject {subject}")]
    NonConsecutiveTimes { subject: String },

    #[error("lag exhausts series: tau={tau} with T={times}")]
    LagExhaustsSeries { tau: usize, times: usize },

    #[error("holdout {holdout} out of range (must satisfy 0 < holdout < {limit})")]
    HoldoutOutOfRange { holdout: usize, limit: usize },

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("unknown {kind} '{value}'")]
    UnknownName { kind: &'static str, value: String },

    #[error("{family} variance undefined at mu={mu}")]
    VarianceDomain { family: &'static str, mu: f64 },

    #[error("correlation matrix not positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("degenerate variance at subject {subject}, example {index}")]
    DegenerateVariance { subject: usize, index: usize },

    #[error("degenerate design")]
    DegenerateDesign,

    #[error("over-parameterized scale estimate: N={examples} <= p={params}")]
    OverParameterized { examples: usize, params: usize },

    #[error("zero residual sum of squares")]
    ZeroResiduals,

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("no valid step after {0} backtracking doublings")]
    NoValidStep(usize),

    #[error("zero variance")]
    ZeroVariance,

    #[error("single-class labels")]
    SingleClass,

    #[error("all cross-validation cells failed")]
    AllCellsFailed,

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// Coarse failure class, used for CLI exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Usage,
    Data,
    Numerical,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        use Error::*;
        match self {
            InvalidConfig(_) | UnknownName { .. } => ErrorClass::Usage,
            UnequalSeriesLength { .. }
            | MissingValue { .. }
            | DuplicateObservation { .. }
            | NonConsecutiveTimes { .. }
            | LagExhaustsSeries { .. }
            | HoldoutOutOfRange { .. }
            | InvalidData(_)
            | ShapeMismatch(_)
            | ZeroVariance
            | SingleClass
            | Csv(_)
            | Json(_)
            | Io(_) => ErrorClass::Data,
            VarianceDomain { .. }
            | NotPositiveDefinite(_)
            | DegenerateVariance { .. }
            | DegenerateDesign
            | OverParameterized { .. }
            | ZeroResiduals
            | NonFinite(_)
            | NoValidStep(_)
            | AllCellsFailed => ErrorClass::Numerical,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
