//! Numerical laboratory for the logarithmic p-Laplacian.
//!
//! The logarithmic p-Laplacian is the nonlocal, nonlinear operator of
//! logarithmic order obtained by differentiating the fractional p-Laplacian
//! family in the order parameter at zero. This crate provides:
//!
//! * exact special constants of the operator ([`constants`]),
//! * bounded domains with exact boundary distances and the boundary
//!   weight `h_Ω` ([`geometry`]),
//! * singular-integral quadrature building blocks: graded radial rules and
//!   cell-pair kernel weights ([`quad`]),
//! * pointwise evaluation of the logarithmic and fractional p-Laplacians on
//!   compactly supported test fields ([`operator`]),
//! * discrete Dirichlet energies on cell grids, first eigenvalues by
//!   Rayleigh-quotient minimization, and the eigenvalue-derivative,
//!   Faber-Krahn, scaling and maximum-principle experiments ([`energy`]),
//! * dyadic Whitney decompositions, the explicit half-space cube pairing,
//!   and empirical evaluation of the logarithmic boundary Hardy
//!   inequality ([`whitney`]),
//! * a command-line front end with reproducible CSV/JSON outputs ([`cli`]).

pub mod cli;
pub mod constants;
pub mod energy;
pub mod geometry;
pub mod operator;
pub mod quad;
pub mod whitney;

/// Errors shared by every module of the crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Argument outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// Point/domain dimension disagreement.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    /// A quadrature did not reach the requested tolerance.
    #[error("tolerance {requested:e} not achieved; best estimate {achieved:e}")]
    Tolerance { requested: f64, achieved: f64 },
    /// The requested integral does not converge.
    #[error("divergent configuration: {0}")]
    Divergent(String),
    /// Iterative solver ran out of iterations.
    #[error("no convergence within {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    /// Dirichlet solve requested outside the convex regime.
    #[error("nonconvex regime: {0}")]
    Nonconvex(String),
    /// Malformed experiment configuration.
    #[error("invalid config: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
