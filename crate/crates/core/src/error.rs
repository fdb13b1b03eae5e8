use thiserror::Error;

/// Errors raised by the fading-number library.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument is outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A documented precondition (unit direction, Hermitian input, ...) does not hold.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// The process model is invalid (non-stationary, wrong shapes, not PD).
    #[error("model error: {0}")]
    Model(String),

    /// The model file could not be parsed or validated.
    #[error("{path}:{line}:{column}: {message}")]
    ModelFile {
        path: String,
        line: usize,
        column: usize,
        message: String,
    },

    /// The process is not regular (singular prediction error, zero spectral density).
    #[error("regularity error: {0}")]
    Regularity(String),

    /// A Toeplitz or block-Toeplitz covariance is not positive definite.
    #[error("ill-posed covariance: {0}")]
    IllPosedCovariance(String),

    /// The input is not normalized the way a closed form requires.
    #[error("normalization error: {0}")]
    NotNormalized(String),

    /// A Monte Carlo estimator could not produce a usable estimate.
    #[error("estimation error: {0}")]
    Estimation(String),

    /// Projected laws along different directions disagree.
    #[error("isotropy violated: {0}")]
    IsotropyViolation(String),

    /// A numerical procedure (optimizer, quadrature) failed to converge.
    #[error("numerical non-convergence: {0}")]
    NonConvergence(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit status used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::NonConvergence(_) => 2,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
