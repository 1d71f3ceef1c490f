// SPDX-License-Identifier: Apache-2.0

use alloc::string::String;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// A covariance matrix failed the positive semidefinite check.
    #[error("matrix is not positive semidefinite: min eigenvalue {min_eigenvalue:e} below -{tolerance:e}")]
    NotPsd { min_eigenvalue: f64, tolerance: f64 },
    /// Two time points coincide where distinct times are required.
    #[error("duplicate or unordered time points at index {0}")]
    DuplicateTimes(usize),
    /// A matrix that must be inverted is singular.
    #[error("singular matrix: {0}")]
    Singular(String),
    /// Inputs with incompatible shapes.
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    /// A requested allocation exceeds the configured cap.
    #[error("resource limit exceeded: {requested} elements requested, cap is {cap}")]
    ResourceLimit { requested: usize, cap: usize },
    /// Cholesky factorisation failed even at the largest jitter.
    #[error("cholesky factorisation failed after jitter {jitter:e}")]
    CholeskyFailed { jitter: f64 },
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
