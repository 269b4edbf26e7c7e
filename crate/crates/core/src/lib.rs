//! l2-regularized regression with exact divergence formulas in both the
//! penalty (lambda) and constraint (rho) indexings.
//!
//! The pipeline: a [`problem`] builder produces a `(y, N, Omega)` triple for
//! one of four model families; [`engine`] runs the Demmler–Reinsch
//! decomposition and solves both the penalty-form and constraint-form
//! problems with closed-form divergences; [`selection`] scores fits by AIC
//! and GCV; [`oracles`] verifies every analytic formula against independent
//! numerical routes; [`experiments`] reproduces the simulation study.

pub mod engine;
pub mod error;
pub mod experiments;
pub mod io;
pub mod oracles;
pub mod problem;
pub mod selection;
pub mod spline;
pub mod svg;
pub mod validate;

pub use engine::{decompose, fit_constraint, fit_penalty, ConstraintFit, DrSystem, PenaltyFit};
pub use error::{Error, Result};
pub use problem::{
    build_functional, build_penalized_spline, build_ridge, build_smoothing_spline, KernelId,
    ProblemKind, RegressionProblem,
};
