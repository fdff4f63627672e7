//! Dual-space solvers for norm-regularized reconstruction problems.
//!
//! The crate covers five solver families that share one structure: a finite
//! set of linear measurements, a convex data-fit term, and a norm (or norm
//! power) regularizer whose duality map determines the shape of the solution.
//!
//! * [`duality`] - conjugate maps between sequence spaces with p-norms and
//!   the pairing identities they satisfy.
//! * [`hilbert`] - kernel ridge reconstruction and Tikhonov-regularized
//!   linear systems, where the duality map is the identity.
//! * [`lp`] - coefficient recovery under p-norm regularization, including
//!   sparse l1 solutions and their reduction to extreme points.
//! * [`measures`] - spike deconvolution over a continuous domain with a
//!   total-variation (mass) regularizer.
//! * [`gtv`] - sparse kernel expansions induced by a shift-invariant
//!   operator, fit with an l1 penalty on the expansion weights.
//!
//! [`problem`] holds the shared problem model (operators, losses,
//! regularizers, solve reports) and [`oracle`] holds deliberately slow
//! reference solvers used by the test suite to cross-check every fast path.

pub mod acceptance;
pub mod duality;
pub mod gtv;
pub mod hilbert;
pub mod lp;
pub mod measures;
pub mod oracle;
pub mod problem;

use thiserror::Error;

/// Crate-wide error type.
///
/// Validation failures (bad shapes, bad exponents, inadmissible operators)
/// are distinguished from numerical failures (non-convergence, degenerate
/// pruning) so callers can map them to different exit paths.
#[derive(Error, Debug, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("unsupported norm exponent p = {p}: conjugation requires finite p > 1 (p = 1 has a set-valued dual map)")]
    UnsupportedExponent { p: f64 },

    #[error("regularization exponent {p} is outside the admissible range [1, inf)")]
    InvalidNormPower { p: f64 },

    #[error("super-exponential rate alpha = {alpha} is inadmissible: the induced kernel is positive-definite with integrable inverse response only for alpha strictly inside (0, 2)")]
    InadmissibleRate { alpha: f64 },

    #[error("sites {first} and {second} coincide (relative distance {distance:.3e} below 1e-9): measurement rows would be dependent")]
    DuplicateSites {
        first: usize,
        second: usize,
        distance: f64,
    },

    #[error("matrix is not symmetric: max |H - H^T| = {max_asymmetry:.3e} exceeds tolerance")]
    NotSymmetric { max_asymmetry: f64 },

    #[error("invalid problem: {message}")]
    InvalidProblem { message: String },

    #[error("{solver} failed to converge after {iterations} iterations (residual {residual:.3e})")]
    NonConvergence {
        solver: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("pruning failed: {message}")]
    DegeneratePruning { message: String },

    #[error("oracle limit exceeded: {message}")]
    OracleLimit { message: String },
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
