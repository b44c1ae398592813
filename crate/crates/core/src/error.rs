use std::path::PathBuf;

use thiserror::Error;

/// Everything that can go wrong while building or querying an oracle.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("row {row} has a zero normal vector")]
    ZeroNormal { row: usize },

    #[error("direction vector must be non-zero")]
    ZeroDirection,

    #[error("non-finite value in {what}")]
    NonFinite { what: &'static str },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("polytope is not usable by the oracles: {0}")]
    Degenerate(String),

    #[error("anchor is not strictly interior (min slack {min_slack:.3e}, required {required:.3e})")]
    AnchorNotInterior { min_slack: f64, required: f64 },

    #[error("ray apex is not strictly inside the {what}")]
    ApexOutside { what: &'static str },

    #[error("linear program is infeasible")]
    Infeasible,

    #[error("polytope is unbounded{}", direction.map(|(j, s)| format!(" along {}x_{j}", if s < 0.0 { "-" } else { "+" })).unwrap_or_default())]
    Unbounded { direction: Option<(usize, f64)> },

    #[error("largest inscribed ball has unbounded radius")]
    UnboundedRadius,

    #[error("ray escapes to infinity: no facet ahead of the apex")]
    RayEscapes,

    #[error("hit-and-run chord is unbounded along direction {direction:?}")]
    UnboundedChord { direction: Vec<f64> },

    #[error("simplex iteration cap of {cap} exceeded")]
    IterationLimit { cap: usize },

    #[error("{path}:{line}: {msg}")]
    Parse { path: PathBuf, line: usize, msg: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. } | Error::Parse { .. } => 3,
            Error::InvalidParameter(_) => 1,
            _ => 2,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
