//! Crate-wide error type.

use thiserror::Error;

/// Errors raised by the numerics substrate, the agents, the coordinator, and
/// the experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    /// Operand dimensions disagree.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// A Cholesky pivot was not strictly positive.
    #[error("matrix is not positive definite (pivot {pivot} at index {index})")]
    NotPositiveDefinite { index: usize, pivot: f64 },

    /// An oracle was invoked on an agent of the wrong interface kind.
    #[error("wrong agent kind: {operation} requires a {required} agent, got {actual}")]
    WrongKind {
        operation: &'static str,
        required: &'static str,
        actual: &'static str,
    },

    /// A quadratic bound does not dominate the objective it must majorize.
    #[error("quadratic bound violated: H - Q has eigenvalue {eigenvalue} below tolerance")]
    DominanceViolated { eigenvalue: f64 },

    /// Second-order updates were requested but no Hessian oracle exists.
    #[error("hessian oracle unavailable")]
    HessianUnavailable,

    /// The coordinator needs at least one agent.
    #[error("empty agent list")]
    EmptyAgentList,

    /// An iterate produced NaN or infinity (divergent hyperparameters).
    #[error("non-finite iterate at iteration {iteration}")]
    NonFinite { iteration: usize },

    /// Curvature bounds must satisfy 0 < mu <= beta.
    #[error("invalid curvature bounds: mu = {mu}, beta = {beta}")]
    InvalidCurvature { mu: f64, beta: f64 },

    /// Diagnostics requested information an oracle-backed agent cannot provide.
    #[error("oracle unavailable: {what}")]
    OracleUnavailable { what: &'static str },

    /// One of the standing assumptions fails.
    #[error("assumption violated: {what}")]
    AssumptionViolated { what: String },

    /// Relative error is undefined when the optimal value is (numerically) zero.
    #[error("optimal objective value is zero; relative error undefined")]
    ZeroOptimalValue,

    /// The brute-force minimizer exceeded its iteration cap.
    #[error("brute-force minimizer failed to converge (gradient norm {gradient_norm})")]
    NoConvergence { gradient_norm: f64 },

    /// Bad solver or experiment configuration.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// Agent count is not divisible as the requested mix requires.
    #[error("agent count {agents} not divisible for mix {mix}")]
    IndivisibleSplit { agents: usize, mix: String },

    /// Acceleration is unsupported for configurations mixing primal agents
    /// with other kinds.
    #[error("acceleration unsupported for configurations mixing primal agents with other kinds")]
    UnsupportedMix,

    /// An internal consistency check failed (two routes to the same quantity disagree).
    #[error("self-check failed: {0}")]
    SelfCheck(String),

    /// Trace or configuration file I/O.
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// Convenience alias used across the crate.
pub type Result<T> = std::result::Result<T, Error>;
