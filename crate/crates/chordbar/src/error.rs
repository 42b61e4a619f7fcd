//! Error types shared across the crate.

use std::error::Error as StdError;
use std::fmt;

/// Structural problems: malformed patterns, bad permutations, chordality
/// violations, or inconsistent metadata supplied by the caller.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StructureError {
    /// An entry (row, col) lies outside the lower triangle or the matrix.
    InvalidIndex { row: usize, col: usize, n: usize },
    /// Row indices of a column are not strictly increasing.
    UnsortedColumn { col: usize },
    /// The same entry appears twice in one column.
    DuplicateEntry { row: usize, col: usize },
    /// A column is missing its diagonal entry.
    MissingDiagonal { col: usize },
    /// The supplied ordering is not a permutation of 0..n.
    InvalidPermutation,
    /// The pattern violates the fill property: `row > mid > col` with
    /// (row, col) and (mid, col) present but (row, mid) absent.
    NotChordal { row: usize, mid: usize, col: usize },
    /// A column outside the declared support holds a nonzero value.
    InconsistentSupport { col: usize },
    /// Two objects that must share a dimension or pattern do not.
    Mismatch(&'static str),
}

impl fmt::Display for StructureError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            StructureError::InvalidIndex { row, col, n } => {
                write!(f, "entry ({row}, {col}) is outside the lower triangle of an order-{n} matrix")
            }
            StructureError::UnsortedColumn { col } => {
                write!(f, "row indices in column {col} are not strictly increasing")
            }
            StructureError::DuplicateEntry { row, col } => {
                write!(f, "duplicate entry ({row}, {col})")
            }
            StructureError::MissingDiagonal { col } => {
                write!(f, "column {col} has no diagonal entry")
            }
            StructureError::InvalidPermutation => write!(f, "ordering is not a permutation of 0..n"),
            StructureError::NotChordal { row, mid, col } => {
                write!(
                    f,
                    "pattern is not filled: ({row}, {col}) and ({mid}, {col}) are present but ({row}, {mid}) is missing"
                )
            }
            StructureError::InconsistentSupport { col } => {
                write!(f, "column {col} holds a nonzero but is not in the declared support")
            }
            StructureError::Mismatch(what) => write!(f, "mismatched operands: {what}"),
        }
    }
}

impl StdError for StructureError {}

/// Numeric failures raised by the factorization and completion recursions.
///
/// `column` identifies where the recursion stopped: the column being
/// eliminated, or the representative vertex of a clique for the blocked
/// algorithms.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NumericError {
    /// A pivot fell below the positive-definiteness threshold.
    NotPositiveDefinite { column: usize },
    /// No positive-definite completion exists for the given values.
    NoPositiveCompletion { column: usize },
    /// A square-root argument or retained factor lost positivity.
    NumericalBreakdown { column: usize },
    /// A finite-difference probe point left the positive-definite cone.
    IndefiniteAtProbe,
}

impl fmt::Display for NumericError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            NumericError::NotPositiveDefinite { column } => {
                write!(f, "matrix is not positive definite (pivot at column {column})")
            }
            NumericError::NoPositiveCompletion { column } => {
                write!(f, "values admit no positive definite completion (column {column})")
            }
            NumericError::NumericalBreakdown { column } => {
                write!(f, "numerical breakdown in factored update at column {column}")
            }
            NumericError::IndefiniteAtProbe => {
                write!(f, "finite-difference probe point is not positive definite")
            }
        }
    }
}

impl StdError for NumericError {}

/// Either kind of failure, for operations that can hit both.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    Structure(StructureError),
    Numeric(NumericError),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Structure(e) => e.fmt(f),
            Error::Numeric(e) => e.fmt(f),
        }
    }
}

impl StdError for Error {}

impl From<StructureError> for Error {
    fn from(e: StructureError) -> Self {
        Error::Structure(e)
    }
}

impl From<NumericError> for Error {
    fn from(e: NumericError) -> Self {
        Error::Numeric(e)
    }
}
