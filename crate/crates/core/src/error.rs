use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("no samples fall in window {0}")]
    EmptyWindow(String),

    #[error("slope undefined over window {0}: abscissa variance is degenerate")]
    SlopeDegenerate(String),

    #[error("invalid trajectory: {0}")]
    InvalidTrajectory(String),

    #[error("argument outside the domain of {0}")]
    Domain(String),

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("feature arity mismatch: expected {expected}, got {got}")]
    ArityMismatch { expected: usize, got: usize },

    #[error("learner library is empty")]
    EmptyLibrary,

    #[error("leave-one-out split {0} is missing a class")]
    DegenerateSplit(usize),

    #[error("influence curve of ({i}, {j}) has zero variance")]
    ZeroVarianceIc { i: usize, j: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("missing trajectory for subject {id}, protocol {protocol}: {path}")]
    MissingTrajectory {
        id: String,
        protocol: usize,
        path: String,
    },

    #[error("{file}:{line}: {msg}")]
    Parse {
        file: String,
        line: usize,
        msg: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Short machine-readable tag, used by the CLI error prefix.
    pub fn code(&self) -> &'static str {
        match self {
            Error::EmptyWindow(_) => "empty-window",
            Error::SlopeDegenerate(_) => "slope-degenerate",
            Error::InvalidTrajectory(_) => "invalid-trajectory",
            Error::Domain(_) => "domain",
            Error::DegenerateData(_) => "degenerate-data",
            Error::ArityMismatch { .. } => "arity-mismatch",
            Error::EmptyLibrary => "empty-library",
            Error::DegenerateSplit(_) => "degenerate-split",
            Error::ZeroVarianceIc { .. } => "zero-variance-ic",
            Error::InvalidConfig(_) => "invalid-config",
            Error::MissingTrajectory { .. } => "missing-trajectory",
            Error::Parse { .. } => "parse",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
