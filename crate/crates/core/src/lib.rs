//! Nonparametric estimation of the squared diffusion coefficient of a
//! one-dimensional SDE `dX_t = b(X_t) dt + σ(X_t) dW_t` on `[0, 1]` from
//! discretely observed paths.
//!
//! The estimator regresses the squared increments
//! `U = (X_{(k+1)Δ} − X_{kΔ})² / Δ` on a finite basis (clamped B-splines,
//! rescaled Fourier, or Hermite functions) under an ℓ2-ball constraint on the
//! coefficient vector, optionally capping the fitted function from above.
//! The dimension is picked by penalized least-squares contrast.
//!
//! Modules:
//!
//! - [`sde`]: built-in models and Euler–Maruyama path generation with
//!   per-path RNG sub-streams.
//! - [`bases`]: knot vectors, basis evaluation, design matrices.
//! - [`regression`]: responses, the constrained least-squares solver, fitted
//!   and truncated estimators.
//! - [`selection`]: penalized dimension selection, oracle dimension, and
//!   calibration of the penalty constant.
//! - [`metrics`]: empirical norms, Gram diagnostics, the MISE harness.
//! - [`baseline`]: the Nadaraya–Watson kernel estimator.
//! - [`study`]: the preset experiment grids and their CSV layouts.

pub mod bases;
pub mod baseline;
pub mod error;
pub mod metrics;
pub mod regression;
pub mod sde;
pub mod selection;
pub mod study;

pub use error::{Error, Result};
