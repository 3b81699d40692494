use core::fmt;

pub type Result<T> = core::result::Result<T, Error>;

/// Everything that can go wrong in the core algorithms.
///
/// Row numbers are 0-based indices into the batch that was being validated.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    TooFewClasses {
        k: usize,
    },
    InvalidProbability {
        index: usize,
        value: f64,
    },
    BadMass {
        sum: f64,
    },
    InvalidRow {
        row: usize,
        source: alloc::boxed::Box<Error>,
    },
    RaggedRow {
        row: usize,
        expected: usize,
        found: usize,
    },
    LabelOutOfRange {
        row: usize,
        label: usize,
        k: usize,
    },
    InvalidLambda(f64),
    InvalidK0 {
        k0: usize,
        k: usize,
    },
    InvalidAlpha(f64),
    InvalidRank {
        rank: usize,
        k: usize,
    },
    MissingLabels,
    EmptyInput,
    LengthMismatch {
        left: usize,
        right: usize,
    },
    InvalidScore {
        index: usize,
        value: f64,
    },
    InvalidGrid(&'static str),
    TooFewPoints {
        found: usize,
        needed: usize,
    },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::TooFewClasses { k } => write!(f, "need at least 2 classes, got {k}"),
            Error::InvalidProbability { index, value } => {
                write!(f, "probability at position {index} is invalid: {value}")
            }
            Error::BadMass { sum } => write!(f, "probabilities sum to {sum}, expected 1"),
            Error::InvalidRow { row, source } => write!(f, "row {row}: {source}"),
            Error::RaggedRow {
                row,
                expected,
                found,
            } => {
                write!(f, "row {row}: expected {expected} columns, found {found}")
            }
            Error::LabelOutOfRange { row, label, k } => {
                write!(f, "row {row}: label {label} out of range for {k} classes")
            }
            Error::InvalidLambda(l) => write!(f, "lambda must be finite and >= 0, got {l}"),
            Error::InvalidK0 { k0, k } => {
                write!(f, "k0 must lie in 1..{k} (exclusive), got {k0}")
            }
            Error::InvalidAlpha(a) => write!(f, "alpha must lie in (0, 1), got {a}"),
            Error::InvalidRank { rank, k } => write!(f, "rank {rank} outside 1..={k}"),
            Error::MissingLabels => f.write_str("labels are required for this operation"),
            Error::EmptyInput => f.write_str("input is empty"),
            Error::LengthMismatch { left, right } => {
                write!(f, "length mismatch: {left} vs {right}")
            }
            Error::InvalidScore { index, value } => {
                write!(f, "score at position {index} is invalid: {value}")
            }
            Error::InvalidGrid(why) => write!(f, "invalid lambda grid: {why}"),
            Error::TooFewPoints { found, needed } => {
                write!(f, "need at least {needed} curve points, got {found}")
            }
        }
    }
}

impl core::error::Error for Error {}
