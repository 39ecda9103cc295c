//! Conformal prediction regions for deterministic ODE models.
//!
//! The crate fits parametric ODE systems to time-series data, refits them
//! once per left-out observation, and turns the leave-one-out ensemble into
//! per-coordinate prediction intervals:
//!
//! - [`conformal::cuqdyn1`]: coordinate-wise jackknife+ on the ODE regressor.
//! - [`conformal::cuqdyn2`]: median prediction plus a standardized-residual
//!   quantile scaled by the per-coordinate residual RMS.
//!
//! The [`harness`] module runs seeded Monte-Carlo coverage experiments on the
//! built-in benchmark systems in [`models`].

pub mod conformal;
pub mod data;
pub mod error;
pub mod estimate;
pub mod harness;
pub mod models;
pub mod ode;
pub mod seed;

pub use error::{Error, Result};
