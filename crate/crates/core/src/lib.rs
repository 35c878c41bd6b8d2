//! Numerical kernels for stereo camera-trap surveys, free of `std`.
//!
//! - [`geometry`]: camera model, rectification, depth, essential matrix
//! - [`stereo`]: census cost volume, semi-global matching, disparity
//! - [`flow`]: dense polynomial-expansion optical flow
//! - [`quality`]: temporal disparity error
//! - [`sampler`]: background model and frame selection
//! - [`distance`]: detection distances from depth maps
//! - [`ctds`]: binned point-transect detection-function fits
#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod ctds;
pub mod distance;
pub mod error;
pub mod flow;
pub mod geometry;
pub mod ingest;
mod math;
pub mod quality;
pub mod raster;
pub mod sampler;
pub mod stereo;

pub use error::{Error, Result};
