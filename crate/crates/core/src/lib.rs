//! Dynamic video frame interpolation with a learned difficulty pre-assessment.
//!
//! A small hierarchical windowed-attention network scores how hard a frame
//! pair is to interpolate. Pairs scoring at or above a threshold go to a
//! cheap blending backend; the rest go to a slower block-matching backend.
//!
//! Module map:
//!
//! - [`numerics`]: tensors, reverse-mode autodiff, conv / deformable conv /
//!   pixel shuffle / shifted-window attention.
//! - [`model`]: the difficulty network (Siamese extraction, feature fusion,
//!   patch-wise score head).
//! - [`training`]: losses, Adam, training loop, checkpoint files.
//! - [`backends`]: fast and accurate interpolation backends with latency
//!   accounting.
//! - [`dataset`]: triplet extraction, automatic difficulty annotation,
//!   synthetic motion suites, JSONL manifests.
//! - [`metrics`]: PSNR, SSIM, accuracy under tolerance, subset reports.
//! - [`router`]: score → threshold → backend routing and threshold sweeps.
//! - [`cli`]: the `vfi-dpa` command-line front end.
//!
//! Runnable walkthroughs for each capability live in `examples/`.

pub mod backends;
pub mod cli;
pub mod dataset;
mod error;
pub mod frame;
pub mod metrics;
pub mod model;
pub mod numerics;
pub mod router;
pub mod seed;
pub mod training;

pub use error::{CheckpointError, Error, Result};
pub use frame::Frame;
