//! Error type shared by all modules.

use std::fmt;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Instance violates a structural invariant (bad indices, n < 2, ...).
    InvalidInstance(String),
    /// Grid construction got a nonpositive radius, or one too small for the
    /// coordinate span to index cells exactly.
    InvalidRadius(String),
    /// Selection rank outside `1..=size`.
    RankOutOfRange { k: usize, size: usize },
    /// Brute-force selection would materialize more pairs than allowed.
    BudgetExceeded { required: usize, budget: usize },
    /// Heavy/light classification left no light cell pair to shrink over.
    NoLightPairs,
    /// An instrumented run emitted a comparison that is not a certified
    /// pairwise distance of the expected family.
    ProtocolViolation(String),
    /// The band DP could not reach `t`; the estimates fed to it were bad.
    RecoveryFailure(String),
    /// Weighted nearest-neighbor index over an empty point set.
    EmptyIndex,
    /// Dyadic bracketing could not pin the scale of `r*`.
    BracketFailure(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidInstance(msg) => write!(f, "invalid instance: {msg}"),
            Error::InvalidRadius(msg) => write!(f, "invalid radius: {msg}"),
            Error::RankOutOfRange { k, size } => {
                write!(f, "rank {k} out of range for {size} values")
            }
            Error::BudgetExceeded { required, budget } => {
                write!(f, "selection needs {required} pairs, budget is {budget}")
            }
            Error::NoLightPairs => write!(f, "no light cell pairs"),
            Error::ProtocolViolation(msg) => write!(f, "protocol violation: {msg}"),
            Error::RecoveryFailure(msg) => write!(f, "recovery failure: {msg}"),
            Error::EmptyIndex => write!(f, "empty weighted nearest-neighbor index"),
            Error::BracketFailure(msg) => write!(f, "bracket failure: {msg}"),
        }
    }
}

impl std::error::Error for Error {}

pub type Result<T> = std::result::Result<T, Error>;
