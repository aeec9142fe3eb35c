//! Error type shared by every module of the crate.

use thiserror::Error;

/// Crate-wide error enum. Every variant names the violated invariant so CLI
/// diagnostics stay actionable.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid spectrum: {0}")]
    InvalidSpectrum(String),

    #[error("boundary spectrum: eigenvalue {min_lambda:.3e} is below the interior floor {floor:.1e}; the metric diverges there")]
    BoundarySpectrum { min_lambda: f64, floor: f64 },

    #[error("eigenvalue inversion is ill-conditioned at the simplex boundary: prefix product underflowed with {remaining:.3e} probability mass unplaced")]
    BoundaryInversion { remaining: f64 },

    #[error("degenerate spectrum: eigenvalues {i} and {j} coincide, so the pair weight vanishes")]
    DegenerateSpectrum { i: usize, j: usize },

    #[error("invalid coset coordinates: {0}")]
    InvalidCoords(String),

    #[error("invalid density matrix: {0}")]
    InvalidState(String),

    #[error("matrix square root found eigenvalue {value:.3e} below -1e-10; input is not positive semidefinite")]
    NegativeEigenvalue { value: f64 },

    #[error("metric block is not positive semidefinite: pivot/eigenvalue {value:.3e} below -1e-10")]
    IndefiniteMetric { value: f64 },

    #[error("finite-difference step {h:.3e} is outside [1e-7, 1e-3]")]
    StepOutOfRange { h: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("Monte Carlo rejected {rejected} of {samples} samples (limit is 1%); the domain is dominated by boundary/degenerate points")]
    ExcessiveRejection { rejected: u64, samples: u64 },

    #[error("invalid point file: {0}")]
    InvalidPoint(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
