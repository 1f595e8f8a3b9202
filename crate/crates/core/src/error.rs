use thiserror::Error;

pub type Result<T> = std::result::Result<T, MallowsError>;

/// Coarse classification used by front ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Usage,
    Data,
    Numerical,
}

#[derive(Error, Debug)]
pub enum MallowsError {
    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("invalid ranking: {0}")]
    InvalidRanking(String),

    #[error("invalid permutohedron point: {0}")]
    InvalidPoint(String),

    #[error("tied coordinates at index sets {groups:?}")]
    TiesPresent { groups: Vec<Vec<usize>> },

    #[error("sample is empty")]
    EmptySample,

    #[error("maximum likelihood consensus is not unique: sample mean ties at index sets {groups:?}")]
    NonUniqueMle { groups: Vec<Vec<usize>> },

    #[error("n = {n} exceeds the enumeration limit {max}; load a precomputed frequency table instead")]
    EnumerationLimit { n: usize, max: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("malformed frequency table (line {line}): {msg}")]
    TableFormat { line: usize, msg: String },

    #[error("frequency table checksum mismatch: declared {declared}, counted {counted}")]
    ChecksumMismatch { declared: String, counted: String },

    #[error("frequency table counts sum to {sum}, expected n! = {factorial}")]
    CountSum { sum: String, factorial: String },

    #[error("observed mean distance is zero: the precision estimate diverges")]
    DivergentTheta,

    #[error("eta0 = {eta} lies outside the interpolation grid [{lo}, {hi}]")]
    OutOfGrid { eta: f64, lo: f64, hi: f64 },

    #[error("theta grid does not bracket the posterior mass: {0}")]
    GridNotBracketing(String),

    #[error("inconsistent configuration: {0}")]
    InconsistentConfig(String),

    #[error("theta-linked prior precision requires a value of theta")]
    MissingTheta,

    #[error("trace is empty")]
    EmptyTrace,

    #[error("{path}: row {row}: {msg}")]
    Dataset { path: String, row: usize, msg: String },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl MallowsError {
    pub fn class(&self) -> ErrorClass {
        use MallowsError::*;
        match self {
            InvalidParameter(_) | InconsistentConfig(_) | MissingTheta | EnumerationLimit { .. } => {
                ErrorClass::Usage
            }
            DivergentTheta | OutOfGrid { .. } | GridNotBracketing(_) | Numerical(_) => {
                ErrorClass::Numerical
            }
            _ => ErrorClass::Data,
        }
    }
}
