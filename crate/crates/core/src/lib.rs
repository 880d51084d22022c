//! Double descent laboratory.
//!
//! Model families whose capacity can be dialed through the interpolation
//! threshold, and a sweep harness that records train/test risk and
//! solution norms along the way:
//!
//! - [`features`] + [`minnorm`]: random Fourier / ReLU features fitted by
//!   minimum-norm least squares.
//! - [`kernel`]: the Gaussian kernel interpolant, the infinite-feature limit.
//! - [`circle`]: a one-dimensional Fourier model on the circle with exact
//!   excess-risk evaluation.
//! - [`trees`]: best-first regression trees, random forests and L2-boosting.
//! - [`nn`]: two-layer networks trained by momentum SGD with weight reuse.
//! - [`theory`]: fill distance and the kernel interpolation error bound.
//! - [`sweep`]: capacity sweeps, threshold detection, CSV and SVG output.

pub mod circle;
pub mod dataset;
pub mod error;
pub mod features;
pub mod kernel;
pub mod minnorm;
pub mod nn;
pub mod seed;
pub mod sweep;
pub mod theory;
pub mod trees;

pub use dataset::Dataset;
pub use error::{Error, Result};
