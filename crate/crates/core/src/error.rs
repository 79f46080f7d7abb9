//! Crate-wide error type.

/// Errors produced by geometry, discretisation and solver stages.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Parameter or input outside its admissible range.
    #[error("argument error: {0}")]
    Argument(String),
    /// Curve parameter outside the knot range.
    #[error("parameter domain error: {0}")]
    ParamDomain(String),
    /// Mesh connectivity problem (non-manifold edge, missing tag, ...).
    #[error("topology error: {0}")]
    Topology(String),
    /// Degenerate or inverted geometry.
    #[error("geometry error: {0}")]
    Geometry(String),
    /// Basis construction failed (ill-conditioned Vandermonde, bad nodal set).
    #[error("basis error: {0}")]
    Basis(String),
    /// A NEFEM chart whose rectangle map is not a bijection.
    #[error("invalid chart: {0}")]
    InvalidChart(String),
    /// Local element system singular or degenerate.
    #[error("element degeneracy: {0}")]
    ElementDegeneracy(String),
    /// Global system could not be assembled consistently.
    #[error("assembly error: {0}")]
    Assembly(String),
    /// Direct factorization failed.
    #[error("singular system: {0}")]
    SingularSystem(String),
    /// Boundary data violates the divergence compatibility condition.
    #[error("incompatible data: {0}")]
    IncompatibleData(String),
    /// Benchmark construction failed (e.g. geometry fit tolerance).
    #[error("benchmark error: {0}")]
    Benchmark(String),
    /// File syntax problem.
    #[error("parse error: {0}")]
    Parse(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
