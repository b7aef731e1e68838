use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("invalid embedding: {0}")]
    InvalidEmbedding(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: String, reason: String },

    #[error("singular shift {shift}: {reason}")]
    SingularShift { shift: String, reason: String },

    #[error("no convergence after {iterations} iterations (residual {residual:.3e})")]
    Convergence { iterations: usize, residual: f64 },

    #[error("steady state is not unique: {0}")]
    NonUniqueSteadyState(String),

    #[error("dense oracle refused: dimension {dim} exceeds cap {cap}")]
    OracleTooLarge { dim: usize, cap: usize },

    #[error("state is not stationary (residual {residual:.3e} > {tol:.1e})")]
    NonStationary { residual: f64, tol: f64 },

    #[error("correlation horizon too short: |G(t_max)|/|G(0)| = {ratio:.3e}")]
    HorizonTooShort { ratio: f64 },

    #[error("time grid is not uniform")]
    NonUniformGrid,

    #[error("invalid time: {0}")]
    InvalidTime(String),

    #[error("{subsystem} failed: {source}")]
    Subsystem {
        subsystem: String,
        #[source]
        source: Box<Error>,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn param(field: &str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field: field.to_string(),
            reason: reason.into(),
        }
    }

    pub(crate) fn within(self, subsystem: impl Into<String>) -> Self {
        Error::Subsystem {
            subsystem: subsystem.into(),
            source: Box::new(self),
        }
    }
}
