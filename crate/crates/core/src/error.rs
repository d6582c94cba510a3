use std::path::PathBuf;

/// Every failure the library can report.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },

    #[error("matrix is not positive definite (pivot {pivot} = {value:e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },

    #[error("Jacobi eigensolver did not converge after {sweeps} sweeps")]
    NoConvergence { sweeps: usize },

    #[error("non-finite activation in coupling layer {layer}")]
    NonFiniteActivation { layer: usize },

    #[error("training diverged at epoch {epoch}: loss is not finite")]
    DivergedLoss { epoch: usize },

    #[error("parse error at row {row}, column {col}: {message}")]
    ParseError {
        row: usize,
        col: usize,
        message: String,
    },

    #[error("label column `{0}` not found")]
    MissingLabelColumn(String),

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("need at least 2 normal rows, found {0}")]
    TooFewNormals(usize),

    #[error("model file format version {found} is not supported (expected {expected})")]
    SchemaVersionMismatch { found: u32, expected: u32 },

    #[error("corrupt model file: {0}")]
    CorruptFile(String),

    #[error("metric needs both classes present")]
    SingleClass,

    #[error("need at least 2 training rows, found {0}")]
    NotEnoughRows(usize),

    #[error("AUROC matrix is incomplete: {0}")]
    IncompleteMatrix(String),

    #[error("at least one competitor is required")]
    NoCompetitors,

    #[error("competitor pool `{0}` is empty")]
    EmptyPool(String),

    #[error("k = {k} must be smaller than the number of rows ({rows})")]
    KTooLarge { k: usize, rows: usize },

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("rho = {0} is outside [0, 1)")]
    RhoOutOfRange(f64),

    #[error("mixture component {0} became empty")]
    DegenerateComponent(usize),

    #[error("t = {t} must lie in (0, d = {d})")]
    TOutOfRange { t: f64, d: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn dim(expected: usize, got: usize) -> Self {
        Error::DimMismatch { expected, got }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
