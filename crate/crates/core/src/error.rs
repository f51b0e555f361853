//! Error type shared across the library.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Run configuration is malformed or fails validation.
    #[error("config: {0}")]
    Config(String),

    /// Mesh construction, import, or assembly failure.
    #[error("mesh: {0}")]
    Mesh(String),

    /// Nodal field violates a precondition (range, unit norm, structural
    /// condition) or boundary data is inconsistent.
    #[error("field: {0}")]
    Field(String),

    /// Linear solver did not converge, or the flow hit a solver failure.
    #[error("solver: {0}")]
    Solver(String),

    /// Guarded flow observed an energy increase beyond tolerance.
    #[error("monotonicity: {0}")]
    Monotonicity(String),

    /// Defect diagnostics failed (under-resolved loop, bad level, ...).
    #[error("diagnostic: {0}")]
    Diagnostic(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
