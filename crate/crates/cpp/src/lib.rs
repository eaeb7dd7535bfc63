//! Consensus planning solver for mixed agent interfaces.
//!
//! A set of agents, each owning a convex cost over a shared plan, must agree
//! on one consensus plan minimizing the total cost. Agents expose one of
//! three interfaces — primal (gradient), dual (price-to-plan), or proximal
//! (augmented subproblem) — and a coordinator alternates agent updates, a
//! weighted consensus average, and price updates until the plans agree.
//! Any mix of interfaces is supported; single-interface configurations
//! reduce to linearized (Bregman) ADMM, dual ascent, and consensus ADMM
//! respectively.
//!
//! The crate also ships runtime-checkable convergence certificates
//! ([`diagnostics`]), a Nesterov-style momentum wrapper with adaptive
//! restart ([`acceleration`]), independent reference oracles
//! ([`mod@reference`]), and a reproducible experiment harness with a CLI
//! ([`harness`]).
//!
//! All core math is generic over the floating-point scalar via
//! [`Scalar`]; the aliases below fix `f64`, which the harness and CLI use
//! throughout.

pub mod acceleration;
pub mod agents;
pub mod coordinator;
pub mod diagnostics;
mod error;
pub mod harness;
pub mod numerics;
pub mod reference;
mod scalar;
pub mod trace;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub use agents::{AgentKind, AgentSpec, Objective, OracleBundle, QuadraticObjective};
pub use coordinator::{
    default_rho, initialize, iterate, solve, solve_diagnosed, CoordinatorState, RunResult,
    SolveConfig, VariantFlags,
};
pub use diagnostics::{CertificateAuditor, CertificateReport, SaddlePoint};
pub use reference::{brute_force_unified_update, direct_solve};

/// `f64` instantiations used by the harness, the CLI, and most callers.
pub type Vector64 = numerics::Vector<f64>;
pub type Matrix64 = numerics::SymmetricMatrix<f64>;
pub type Agent64 = agents::AgentSpec<f64>;
pub type State64 = coordinator::CoordinatorState<f64>;
pub type Saddle64 = diagnostics::SaddlePoint<f64>;
