use num_complex::Complex64;
use thiserror::Error;

/// Errors raised anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("quadrature did not converge: estimate {estimate:e}, error bound {error_bound:e}")]
    QuadNonConvergence { estimate: f64, error_bound: f64 },

    #[error(
        "step halving did not converge after {halvings} halvings: \
         max deviation {deviation:e} between the last two estimates"
    )]
    OdeNonConvergence {
        halvings: usize,
        deviation: f64,
        /// Final output of the second-to-last estimate.
        coarse: Vec<Complex64>,
        /// Final output of the last estimate.
        fine: Vec<Complex64>,
    },

    #[error("extremum refinement failed on [{lo}, {hi}]: {reason}")]
    Refinement { lo: f64, hi: f64, reason: String },

    #[error("positivity violated: eigenvalue {0:e}")]
    Positivity(f64),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid subsystem selection: {0}")]
    Subsystem(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("Fock truncation violated: top-level population {population:e} at t = {time}")]
    FockTruncation { population: f64, time: f64 },

    #[error("invalid configuration: {field}: {message}")]
    Config { field: String, message: String },

    #[error("infeasible search: {0}")]
    Search(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config { field: field.into(), message: message.into() }
    }

    /// Process exit code used by the CLI.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. } | Error::Search(_) | Error::Dimension(_) | Error::Subsystem(_) | Error::InvalidState(_) => 2,
            Error::QuadNonConvergence { .. }
            | Error::OdeNonConvergence { .. }
            | Error::Refinement { .. }
            | Error::Positivity(_)
            | Error::FockTruncation { .. } => 3,
            Error::Io(_) | Error::Json(_) | Error::Csv(_) => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
