use core::fmt;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A function input fell outside `[-1, 1]`.
    Domain { x: f64 },
    /// Rejection sampling gave up after the given number of attempts.
    RejectionBudget { what: &'static str, attempts: u64 },
    /// `lo >= hi` (or a non-finite bound) where a proper interval is needed.
    InvalidRange { lo: f64, hi: f64 },
    /// A value lies outside the bin edges by more than the allowed slack.
    OutOfRange { value: f64, lo: f64, hi: f64 },
    /// A histogram with zero total count.
    EmptyDataset,
    /// A histogram containing an empty class where every class must be populated.
    EmptyClass { class: usize },
    /// Two sequences that must have equal length did not.
    LengthMismatch { expected: usize, found: usize },
    /// A class index not below the number of classes.
    ClassIndex { class: usize, classes: usize },
    /// The class prior assigns zero mass to the true class.
    ZeroPrior { class: usize },
    /// A class prior that does not sum to one.
    PriorNotNormalized { sum: f64 },
    /// Parameter buffers of different shape were combined.
    ShapeMismatch { expected: usize, found: usize },
    /// A configuration value violates its contract.
    InvalidConfig(&'static str),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Domain { x } => write!(f, "input {x} outside [-1, 1]"),
            Error::RejectionBudget { what, attempts } => {
                write!(f, "rejection budget exhausted after {attempts} attempts while sampling {what}")
            }
            Error::InvalidRange { lo, hi } => write!(f, "invalid range [{lo}, {hi}]"),
            Error::OutOfRange { value, lo, hi } => {
                write!(f, "value {value} outside bin range [{lo}, {hi}]")
            }
            Error::EmptyDataset => f.write_str("histogram has zero total count"),
            Error::EmptyClass { class } => write!(f, "class {class} has zero count"),
            Error::LengthMismatch { expected, found } => {
                write!(f, "length mismatch: expected {expected}, found {found}")
            }
            Error::ClassIndex { class, classes } => {
                write!(f, "class index {class} out of range for {classes} classes")
            }
            Error::ZeroPrior { class } => write!(f, "class prior is zero at true class {class}"),
            Error::PriorNotNormalized { sum } => write!(f, "class prior sums to {sum}, not 1"),
            Error::ShapeMismatch { expected, found } => {
                write!(f, "parameter shape mismatch: expected {expected} values, found {found}")
            }
            Error::InvalidConfig(msg) => write!(f, "invalid configuration: {msg}"),
        }
    }
}

impl core::error::Error for Error {}
