//! Self-diagnosing GAN training on low-dimensional synthetic data.
//!
//! The pipeline has three phases:
//!
//! 1. train a GAN while recording the log-density-ratio estimate (LDR) of
//!    every training point ([`gan::train_phase1`]);
//! 2. turn the per-point LDR mean and variance into a clipped discrepancy
//!    score ([`diagnostics::ScoreTable`]) and keep training with minibatches
//!    drawn in proportion to it, alongside an auxiliary discriminator that
//!    still sees uniform batches ([`gan::train_phase2`]);
//! 3. correct the biased generator with discriminator rejection sampling
//!    driven by the auxiliary discriminator ([`drs`]).
//!
//! [`metrics`] holds the evaluation suite and [`bayes`] the Laplace
//! approximation that explains why minor samples have high LDR variance.

// `!(x > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bayes;
pub mod datasets;
pub mod diagnostics;
pub mod drs;
pub mod error;
pub mod gan;
pub mod io;
pub mod metrics;
pub mod numcore;
pub mod pipeline;
pub mod rng;

pub use error::{Error, Result};
