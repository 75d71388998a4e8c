use thiserror::Error;

/// Errors produced by the simulation, training, and I/O layers.
#[derive(Debug, Error)]
pub enum Error {
    /// A state, torque, or weight became NaN/Inf. Usually a sign of unstable
    /// gains or an oversized timestep.
    #[error("non-finite value at tick {tick}: {context}")]
    NonFinite { tick: u64, context: String },

    #[error("non-finite gradient")]
    NonFiniteGradient,

    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        expected: usize,
        got: usize,
        context: &'static str,
    },

    #[error("empty dataset")]
    EmptyDataset,

    #[error("input too short: {0} rows")]
    TooShort(usize),

    #[error("malformed file {path} at line {line}: {reason}")]
    Malformed {
        path: String,
        line: usize,
        reason: String,
    },

    #[error("unsupported checkpoint version: {0}")]
    VersionMismatch(String),

    #[error("episode does not match task: {0}")]
    TaskMismatch(String),

    #[error("no cycles detected in episode")]
    NoCycles,

    #[error("metric not defined for variant {0}")]
    UnsupportedVariant(&'static str),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn malformed(path: impl Into<String>, line: usize, reason: impl Into<String>) -> Self {
        Error::Malformed {
            path: path.into(),
            line,
            reason: reason.into(),
        }
    }

    /// Process exit code used by the CLI: 2 for usage problems, 3 for data
    /// problems, 4 for numeric ones.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidConfig(_) => 2,
            Error::NonFinite { .. } | Error::NonFiniteGradient => 4,
            _ => 3,
        }
    }
}
