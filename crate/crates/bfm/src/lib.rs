//! Bi-failure-modes (BFM) competing-risks lifetime model.
//!
//! The BFM lifetime is `X = min(X₁, X₂)` with `X₁` Dhillon and `X₂`
//! exponential-power. The crate provides its reliability functions, mean
//! residual life, cause-specific risks, censored maximum-likelihood and
//! Hamiltonian Monte Carlo fitting, competitor models with selection criteria,
//! and the dataset/report formats used by the `bfm` command-line tool.

// `!(x > 0.0)` is the NaN-rejecting form used for all domain checks.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod config;
pub mod data;
pub mod distribution;
pub mod error;
pub mod hazard;
pub mod hmc;
pub mod metrics;
pub mod mle;
pub mod models;
pub mod optim;
pub mod risk;
pub mod specfun;

pub use distribution::{BfmParams, CauseLabel, LifetimeDraw};
pub use error::{BfmError, Result};
