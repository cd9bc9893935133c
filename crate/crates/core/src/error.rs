use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("kernel {0} has no density with respect to Lebesgue measure")]
    NoDensity(&'static str),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("no convergence after {iterations} iterations (last residual {residual:e})")]
    NoConvergence {
        iterations: usize,
        residual: f64,
        /// Residuals sampled along the run, oldest first.
        history: Vec<f64>,
    },

    #[error("numerical instability: {0}")]
    Instability(String),

    #[error("rejection sampler acceptance rate {rate:e} is below 1e-4; use a tighter envelope")]
    Efficiency { rate: f64 },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    /// True for errors caused by bad inputs rather than numerical trouble.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::Domain(_)
                | Error::NoDensity(_)
                | Error::Config(_)
                | Error::GridMismatch(_)
                | Error::Parse(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
