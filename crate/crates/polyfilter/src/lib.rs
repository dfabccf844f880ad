//! Polynomial-filtered first-order methods for low-rank spectral optimization.
//!
//! Many matrix optimization problems only interact with a symmetric matrix
//! `B(x)` through a spectral map applied to a small active part of its
//! spectrum (the positive eigenvalues, or the singular values above a
//! threshold). Classical first-order solvers nevertheless pay for a full
//! eigendecomposition in every iteration. The solvers in this crate replace
//! that decomposition with a Chebyshev-filtered subspace that is warm-started
//! from the previous iterate: each iteration applies a low-degree polynomial
//! in `B(x)` to the current basis, re-orthonormalizes, and extracts
//! Rayleigh-Ritz pairs. Because consecutive iterates barely move, a handful
//! of block products per iteration keeps the subspace locked onto the active
//! eigenspace.
//!
//! Module map:
//!
//! * [`linalg`] - dense/structured symmetric operators, orthonormalization,
//!   small symmetric eigensolves, extreme-eigenvalue estimation.
//! * [`chebyshev`] - scalar Chebyshev evaluation, filter specifications,
//!   blockwise filter application with overflow rescaling.
//! * [`subspace`] - filtered subspace updates, Rayleigh-Ritz extraction,
//!   principal angles, interval and dimension adaptation.
//! * [`pfpg`] - polynomial-filtered proximal gradient for spectral problems,
//!   with optional regularized extrapolation.
//! * [`pfam`] - polynomial-filtered Douglas-Rachford splitting for standard
//!   SDPs.
//! * [`problems`] - nearest correlation estimation, matrix completion via
//!   singular value thresholding, max-cut and planted SDP instances.
//! * [`oracle`] - slow, dense reference implementations used to validate the
//!   filtered paths.
//! * [`bench`] - experiment configuration, deterministic CSV/markdown
//!   reporting, trace comparison.
//! * [`io`] - MatrixMarket and SDPA-like sparse text formats.

pub mod bench;
pub mod chebyshev;
pub mod io;
pub mod linalg;
pub mod oracle;
pub mod pfam;
pub mod pfpg;
pub mod problems;
pub mod subspace;

use std::fmt;

/// Errors reported by solvers, decompositions and parsers in this crate.
#[derive(Debug)]
pub enum Error {
    /// Operand shapes are inconsistent with the requested operation.
    DimensionMismatch(String),
    /// A matrix or vector contains NaN or infinite entries.
    NonFinite(String),
    /// A solver or filter configuration failed validation.
    InvalidConfig(String),
    /// The suppression interval degenerated (`a >= b` or wrong sign).
    DegenerateInterval { a: f64, b: f64 },
    /// An input matrix was expected to be symmetric but is not.
    NotSymmetric(String),
    /// A dense factorization or linear solve failed.
    Factorization(String),
    /// I/O failure while reading or writing instance or trace files.
    Io(std::io::Error),
    /// A text format (MatrixMarket, SDPA-like, config file) failed to parse.
    Parse(String),
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::DimensionMismatch(msg) => write!(f, "dimension mismatch: {msg}"),
            Error::NonFinite(msg) => write!(f, "non-finite values: {msg}"),
            Error::InvalidConfig(msg) => write!(f, "invalid configuration: {msg}"),
            Error::DegenerateInterval { a, b } => {
                write!(f, "degenerate filter interval [{a}, {b}]")
            }
            Error::NotSymmetric(msg) => write!(f, "matrix not symmetric: {msg}"),
            Error::Factorization(msg) => write!(f, "factorization failed: {msg}"),
            Error::Io(err) => write!(f, "i/o error: {err}"),
            Error::Parse(msg) => write!(f, "parse error: {msg}"),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io(err) => Some(err),
            _ => None,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err)
    }
}
