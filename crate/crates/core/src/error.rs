use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("no cases: every subject is a control")]
    NoCases,

    #[error("no controls: every subject is a case")]
    NoControls,

    #[error("no genotype columns (q = 0)")]
    NoGenotypes,

    #[error("phenotype value {0} is not 0 or 1")]
    InvalidPhenotype(f64),

    #[error("negative genotype dosage {0}")]
    NegativeGenotype(f64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("design matrix is rank deficient (column {column})")]
    RankDeficient { column: usize },

    #[error("complete separation suspected: coefficient norm {norm:.3e} exceeds cap")]
    Separation { norm: f64 },

    #[error("Newton iterations did not converge after {iterations} steps (max |score| = {max_gradient:.3e})")]
    NonConvergence { iterations: usize, max_gradient: f64 },

    #[error("{0} is singular or ill-conditioned (condition number {1:.3e})")]
    Singular(&'static str, f64),

    #[error("degenerate score: {0}")]
    DegenerateScore(String),

    #[error("no H entry for alpha* = {0}")]
    MissingH(f64),

    #[error("invalid correlation matrix: {0}")]
    InvalidCorrelation(String),

    #[error("matrix is not positive semidefinite (smallest eigenvalue {0:.3e})")]
    NotPsd(f64),

    #[error("unknown scenario {0:?}")]
    UnknownScenario(String),

    #[error("population draw cap of {0} exceeded before quotas were filled")]
    DrawCapExceeded(u64),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Whether the error is caused by the input (as opposed to a numeric failure
    /// while fitting or integrating).
    pub fn is_input_error(&self) -> bool {
        !matches!(
            self,
            Error::RankDeficient { .. }
                | Error::Separation { .. }
                | Error::NonConvergence { .. }
                | Error::Singular(..)
                | Error::DegenerateScore(_)
                | Error::MissingH(_)
                | Error::NotPsd(_)
                | Error::DrawCapExceeded(_)
        )
    }
}
