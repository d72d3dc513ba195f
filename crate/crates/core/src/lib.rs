//! Weighted low-rank matrix approximation with block-structured weights and
//! its use for video background modeling.
//!
//! - [`matrix`]: dense linear algebra (SVD, hard thresholding, projections).
//! - [`ghs`]: the closed-form constrained solution and SVT shrinkage.
//! - [`wlr`]: the alternating weighted solver with per-iteration diagnostics.
//! - [`background`]: batch and batch-incremental background estimation.
//! - [`metrics`]: PSNR, SSIM/MSSIM, MS-SSIM, ROC and AUC.
//! - [`frames`], [`synth`], [`config`]: frame I/O, synthetic video, settings.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod background;
pub mod config;
pub mod error;
pub mod frames;
pub mod ghs;
pub mod matrix;
pub mod metrics;
pub mod parallel;
pub mod synth;
pub mod wlr;

pub use error::{Error, Result};
pub use matrix::DenseMatrix;
pub use parallel::Execution;
