//! Files, configuration and batch processing around `stereotrap-core`:
//! frame and raster formats, calibration and detection documents, the
//! observation store, the stage functions and the survey pipeline.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod calibration;
pub mod config;
pub mod detections;
pub mod error;
pub mod io;
pub mod pipeline;
pub mod report;
pub mod stages;
pub mod store;

pub use error::{Error, Result};
pub use stereotrap_core as core;
