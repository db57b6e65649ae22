//! Operating characteristics and simulation for the Shiryaev-Roberts family
//! of sequential change-point detection procedures.
//!
//! All three procedures share the statistic recursion
//! `R_n = (1 + R_{n-1}) * lr(X_n)` and stop the first time `R_n` reaches a
//! threshold. They differ only in how the statistic is initialized:
//!
//! * classical SR starts at `R_0 = 0`,
//! * SR-r starts at a deterministic head start `R_0 = r`,
//! * SRP starts from a draw of the quasi-stationary distribution of the
//!   statistic below the threshold.
//!
//! The crate evaluates their exact operating characteristics by solving a
//! family of second-kind Fredholm integral equations with a Nystrom scheme
//! ([`fredholm`]), solves the quasi-stationary eigenproblem by two
//! independent routes ([`quasi_stationary`]), carries closed forms for the
//! exponential benchmark model with unit pre-change rate and doubled
//! post-change rate ([`exact_exp`]), and cross-validates everything with a
//! deterministic parallel Monte Carlo harness ([`montecarlo`]).
//!
//! Numeric code is generic over the scalar type through [`scalar::Real`];
//! the aliases below fix `f64`, which is what every documented tolerance is
//! calibrated for.

#![forbid(unsafe_code)]
#![warn(missing_docs)]

pub mod calibrate;
pub mod error;
pub mod exact_exp;
pub mod fredholm;
pub mod grid;
pub mod linalg;
pub mod metrics;
pub mod model;
pub mod montecarlo;
pub mod procedures;
pub mod quasi_stationary;
pub mod roots;
pub mod scalar;
pub mod special;
pub mod stats;

pub use error::{Error, Result};
pub use scalar::Real;

/// Quadrature grid over the statistic's range, in double precision.
pub type GridF64 = grid::QuadratureGrid<f64>;
/// Function table attached to a quadrature grid, in double precision.
pub type GridFunctionF64 = grid::GridFunction<f64>;
/// Exponential observation model in double precision.
pub type ExponentialModelF64 = model::ExponentialModel<f64>;
/// Gaussian mean-shift observation model in double precision.
pub type GaussianMeanShiftModelF64 = model::GaussianMeanShiftModel<f64>;
/// Solved operating characteristics in double precision.
pub type OperatingCharacteristicsF64 = fredholm::OperatingCharacteristics<f64>;
/// Quasi-stationary solution in double precision.
pub type QuasiStationaryF64 = quasi_stationary::QuasiStationary<f64>;
/// Monte Carlo estimate in double precision.
pub type McEstimateF64 = montecarlo::McEstimate<f64>;
