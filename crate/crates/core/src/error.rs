use std::fmt;
use std::path::PathBuf;

use crate::hermitian::ComplexMatrix;

/// Which link a failure was detected on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Link {
    Uplink,
    Downlink,
}

impl fmt::Display for Link {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Link::Uplink => f.write_str("uplink"),
            Link::Downlink => f.write_str("downlink"),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("matrix is not positive definite (pivot {pivot} = {value:e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("relay {relay} has zero quantization noise")]
    ZeroQuantizationNoise { relay: usize },

    #[error("conditioning block for relay {relay} is singular")]
    SingularConditioningBlock { relay: usize },

    #[error("relay {relay} has an all-zero channel row")]
    DegenerateRelay { relay: usize },

    #[error("{link} infeasible: {reason}")]
    Infeasible {
        link: Link,
        reason: String,
        /// Beamformers at the last iterate, when the uplink iteration produced any.
        last_beamformers: Option<Box<ComplexMatrix>>,
    },

    #[error("dual variables unavailable: solver did not reach an optimal central point")]
    DualsUnavailable,

    #[error("interference property `{property}` violated for user {user} (alpha = {alpha}, margin = {margin:e})")]
    PropertyViolation {
        property: &'static str,
        user: usize,
        alpha: f64,
        margin: f64,
        p: Vec<f64>,
    },

    #[error("parse error{}{}: {message}", .field.as_ref().map(|f| format!(" in `{f}`")).unwrap_or_default(), .line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    Parse {
        line: Option<usize>,
        field: Option<String>,
        message: String,
    },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl Error {
    pub fn is_infeasible(&self) -> bool {
        matches!(self, Error::Infeasible { .. })
    }

    pub(crate) fn infeasible(link: Link, reason: impl Into<String>) -> Self {
        Error::Infeasible {
            link,
            reason: reason.into(),
            last_beamformers: None,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
