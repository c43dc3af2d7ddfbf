//! Numerical toolkit for pathwise fractional stochastic calculus.
//!
//! The crate covers Gaussian process models and their kernels, exact path
//! simulation, Riemann–Liouville derivatives and the generalized
//! Lebesgue–Stieltjes integral, a constructive replication algorithm with
//! bounded integrands, Itô-side utilities, and expected-utility maximization.

// `!(x > 0.0)` style guards are used on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod fractional_calculus;
pub mod martingale_tools;
pub mod path_simulation;
pub mod process_models;
pub mod quadrature;
pub mod replication;
pub mod stats;
pub mod utility_max;

pub use error::{Error, Result};
pub use fractional_calculus::{FracOrder, NormResult, PathFn, PiecewiseLinear};
pub use martingale_tools::{ClaimSpec, DensityProcess, ThetaProcess};
pub use path_simulation::{GaussianPath, GridKind, JointPath, SampleGrid, SamplingMethod};
pub use process_models::{ConditionReport, CovarianceModel, Variant};
pub use replication::{ReplicationConfig, ReplicationTrace, Strategy};
pub use utility_max::{UtilityFunction, UtilityProblem};
