use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not square ({rows}x{cols})")]
    NonSquare { rows: usize, cols: usize },

    #[error("non-finite value in {0}")]
    NonFiniteInput(&'static str),

    #[error("rank-deficient design in {context}: condition estimate {condition:.3e}")]
    RankDeficientDesign { context: String, condition: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("insufficient history: need at least {needed} rows, got {got}")]
    InsufficientHistory { needed: usize, got: usize },

    #[error("insufficient rows: need at least {needed}, got {got}")]
    InsufficientRows { needed: usize, got: usize },

    #[error("latent dynamics are unstable: companion spectral radius {radius:.6}")]
    UnstableDynamics { radius: f64 },

    #[error("{0} is not positive semi-definite (min eigenvalue {1:.3e})")]
    NotPsd(&'static str, f64),

    #[error("singular cross product R'P: condition estimate {condition:.3e}")]
    SingularCrossProduct { condition: f64 },

    #[error("degenerate data: largest covariance eigenvalue {0:.3e}")]
    DegenerateData(f64),

    #[error("latent dimension {ell} exceeds data covariance rank r = {rank}")]
    EllExceedsRank { ell: usize, rank: usize },

    #[error("penalty undefined: s*ell = {s_ell} must be below N = {n}")]
    PenaltyDomain { s_ell: usize, n: usize },

    #[error("every grid cell failed to fit")]
    AllCellsFailed,

    #[error("basis is rank-deficient (numerical rank {rank} < {cols})")]
    RankDeficientBasis { rank: usize, cols: usize },

    #[error("Lorenz trajectory diverged at step {0}")]
    NonFiniteTrajectory(usize),

    #[error("singular information matrix: {0}")]
    SingularInformation(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("CSV parse error at row {row}, column {col}: {msg}")]
    CsvParse { row: usize, col: usize, msg: String },

    #[error("invalid model file: {0}")]
    InvalidModel(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Numerical failures as opposed to bad input or I/O.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::RankDeficientDesign { .. }
                | Error::UnstableDynamics { .. }
                | Error::NotPsd(..)
                | Error::SingularCrossProduct { .. }
                | Error::DegenerateData(_)
                | Error::EllExceedsRank { .. }
                | Error::PenaltyDomain { .. }
                | Error::AllCellsFailed
                | Error::RankDeficientBasis { .. }
                | Error::NonFiniteTrajectory(_)
                | Error::SingularInformation(_)
        )
    }
}
