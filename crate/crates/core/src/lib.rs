//! Identification of sparse linear dynamic networks from multivariate time
//! series.
//!
//! Every node signal is regressed on the K most recent past samples of all
//! nodes. The per-node parameter vector is estimated with SPICE (sparse
//! iterative covariance estimation), which is tuning free and equivalent to a
//! weighted square-root LASSO. Thresholding the estimated taps reveals the
//! network topology.
//!
//! Modules:
//! - [`netmodel`]: signals, regression problems and network estimates.
//! - [`spice`]: the per-node solver and its optimality check.
//! - [`datagen`]: random stable networks and their simulation.
//! - [`metrics`]: TPR / FPR / dis and NMSE scoring.
//! - [`harness`]: end-to-end estimation and Monte-Carlo experiments.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod datagen;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod netmodel;
pub mod spice;

pub use error::{Error, Result};
