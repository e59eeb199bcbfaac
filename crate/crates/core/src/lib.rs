//! Straggler-resilient distributed matrix-vector multiplication with
//! cross-parity-check convolutional codes.
//!
//! The pipeline runs bottom-up:
//! [`polyring`] supplies exact Laurent polynomials in `D`, [`codegen`] builds
//! the parity-check and systematic generator matrices, [`planner`] turns a
//! generator into per-worker task lists, [`peeling`] recovers straggler
//! outputs, [`rs_baseline`] is the Vandermonde comparison scheme and
//! [`runtime`] simulates workers and the master.
//!
//! Numeric code is generic over the scalar; the aliases below fix the common
//! choices.

pub mod codegen;
pub mod peeling;
pub mod planner;
pub mod polyring;
pub mod rs_baseline;
pub mod runtime;
pub mod scalar;

use thiserror::Error;

pub use codegen::{build_generator, build_parity_check, compute_z, CodeError, CodeParams, PolyMatrix};
pub use peeling::{decode, DecodeMode, DecodeTrace, PeelError, StragglerSet, SymbolGrid};
pub use planner::{build_plan, choose_delta, JobPlan, PlanError, StorageBudget};
pub use polyring::{LaurentPoly, PolyError};
pub use rs_baseline::{RsConfig, RsError};
pub use runtime::io::IoError;
pub use runtime::master::MasterError;
pub use runtime::matrix::MatrixError;
pub use runtime::sim::SimError;
pub use scalar::Rational;

/// Polynomial with exact rational coefficients.
pub type Poly = LaurentPoly<Rational>;
/// Matrix of exact polynomials.
pub type PolyMat = PolyMatrix<Rational>;
/// Double-precision numeric matrix.
pub type Matrix64 = runtime::matrix::Matrix<f64>;
/// Double-precision symbol grid.
pub type Grid64 = SymbolGrid<f64>;
/// Exact symbol grid.
pub type ExactGrid = SymbolGrid<Rational>;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Poly(#[from] PolyError),
    #[error(transparent)]
    Code(#[from] CodeError),
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error(transparent)]
    Peel(#[from] PeelError),
    #[error(transparent)]
    Rs(#[from] RsError),
    #[error(transparent)]
    Matrix(#[from] MatrixError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Master(#[from] MasterError),
    #[error(transparent)]
    Io(#[from] IoError),
}
