//! Error type shared by every solver module.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("dimension mismatch: expected {expected} values, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("fields are defined on different meshes")]
    MeshMismatch,

    #[error("non-finite input at node {node}")]
    NonFiniteInput { node: usize },

    #[error("positivity violated at node {node}: value {value:e} (reduce the time step)")]
    PositivityViolation { node: usize, value: f64 },

    #[error("monotonicity violated for {field} at node {node}: step {delta:e}")]
    MonotonicityViolation {
        field: &'static str,
        node: usize,
        delta: f64,
    },

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("invalid learning technology: {0}")]
    InvalidTech(String),

    #[error("closed-form oracle requires unit mass, got {mass}")]
    OracleDomain { mass: f64 },

    #[error("strategy inconsistent with optimal control at node {node}: given {given}, optimal {optimal}")]
    ControlInconsistent {
        node: usize,
        given: f64,
        optimal: f64,
    },

    #[error("perturbation drives density negative at node {node}: {value:e}")]
    NegativeDensity { node: usize, value: f64 },

    #[error("plug-back residual {residual:e} exceeds tolerance {tolerance:e}")]
    ResidualTooLarge { residual: f64, tolerance: f64 },

    #[error("no Pareto tail: fitted slope {slope} vs expected {expected}")]
    NoTail { slope: f64, expected: f64 },

    #[error("not converged after {iterations} iterations (last residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("fit window contains fewer than two nodes")]
    EmptyWindow,

    #[error("tail mass underflows at node {node}")]
    DegenerateTail { node: usize },

    #[error("production series is not positive at index {index}")]
    NonPositiveY { index: usize },
}

impl Error {
    /// True for failures caused by the numerics rather than by the caller's input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::PositivityViolation { .. }
                | Error::MonotonicityViolation { .. }
                | Error::ResidualTooLarge { .. }
                | Error::NoTail { .. }
                | Error::NotConverged { .. }
                | Error::NonFiniteInput { .. }
                | Error::DegenerateTail { .. }
        )
    }
}

pub(crate) fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}

pub(crate) fn check_finite(values: &[f64]) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(node) => Err(Error::NonFiniteInput { node }),
        None => Ok(()),
    }
}
