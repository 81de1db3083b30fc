//! Distributional features for heterogeneous image classification.
//!
//! Per-sample pixel distributions are summarized by empirical quantile
//! functions on a shared trimmed probability grid, compressed onto a learned
//! orthonormal quantlet basis, and used as functional predictors in an
//! L1-penalized logistic classifier.
//!
//! The crate is `no_std` + `alloc` when the default `std` feature is
//! disabled. The `parallel` feature fans independent per-sample and
//! per-fold work out over rayon; results are identical to the sequential
//! build because every reduction happens inside a single work item and
//! outputs are collected in input order.
//!
//! Pipeline overview:
//!
//! 1. [`epm`] turns multi-phase intensity series into per-voxel RMSD maps.
//! 2. [`quantile`] computes empirical quantile functions on a
//!    [`quantile::ProbabilityGrid`].
//! 3. [`dictionary`] builds the overcomplete Gaussian + Beta-CDF dictionary.
//! 4. [`quantlet`] selects, ranks, orthonormalizes and denoises a reduced
//!    basis, and projects quantile functions onto it.
//! 5. [`classifier`] assembles the design and fits the penalized logistic
//!    model through [`l1solver`].
//! 6. [`evaluation`] runs the fixed-λ leave-one-out protocol and metrics.
//! 7. [`synth`] generates seeded cohorts with known ground truth.
//!
//! [`pipeline`] strings the quantile, dictionary and quantlet stages together
//! per image region and fills classifier records with the coefficients.

#![cfg_attr(not(feature = "std"), no_std)]
// `!(x > y)` is used on purpose so that NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop, clippy::type_complexity)]

extern crate alloc;

pub mod classifier;
pub mod dictionary;
pub mod epm;
pub mod error;
pub mod evaluation;
pub mod l1solver;
pub mod linalg;
pub mod pipeline;
pub mod quantile;
pub mod quantlet;
pub mod special;
pub mod synth;

mod par;

pub use error::{Error, Result};

/// Crate version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
