//! Stock co-movement analytics.
//!
//! Binned return panels and their cross-sectional dispersion, tick-level
//! covariance estimators (realized and Hayashi-Yoshida), Pearson correlation
//! matrices, their eigen-spectra, and low-dimensional maps of correlation
//! structure obtained by simulated-annealing multidimensional scaling.
//! A synthetic diffusion generator provides ground truth for all of it.

// NaN must fail validation, hence `!(x > 0.0)` rather than `x <= 0.0`
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod data;
pub mod embedding;
pub mod error;
pub mod estimators;
pub mod pipeline;
pub mod spectral;
pub mod stats;
pub mod synth;

pub use error::{Error, Result};
