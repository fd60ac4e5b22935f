use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("{path}: row {row}, column {col}: {message}")]
    Grid {
        path: String,
        row: usize,
        col: usize,
        message: String,
    },

    #[error("cell ({row}, {col}) is outside the {n_rows}x{n_cols} landscape")]
    OutOfBounds {
        row: usize,
        col: usize,
        n_rows: usize,
        n_cols: usize,
    },

    #[error("origin cell ({row}, {col}) has zero host density and cannot be infected")]
    UninfectableOrigin { row: usize, col: usize },

    #[error("cell ({row}, {col}) is already infected at t = {t}")]
    AlreadyInfected { row: usize, col: usize, t: f64 },

    #[error("non-finite rate encountered: {0}")]
    NonFiniteRate(String),

    #[error("training data contains a single class ({0}); both accepted and rejected rows are required")]
    SingleClass(&'static str),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error(
        "no particles accepted out of {simulated} simulated; cannot train a classifier. \
         Increase n_stage1 or loosen the summary thresholds"
    )]
    NoAcceptedParticles { simulated: usize },

    #[error(
        "no candidate reached the probability threshold {threshold} ({screened} screened, \
         best probability {best}); lower the threshold or retrain on more stage-1 particles"
    )]
    EmptyGate {
        threshold: f64,
        screened: usize,
        best: f64,
    },

    #[error("simulation budget of {budget} exhausted with {accepted} of {target} particles accepted")]
    BudgetExhausted {
        budget: usize,
        accepted: usize,
        target: usize,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
