//! Frame ingestion: side-by-side splitting and band averaging.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::raster::{GrayImage, Raster};

/// Interleaved three-band frame with values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RgbFrame {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<[f32; 3]>,
}

impl RgbFrame {
    pub fn new(width: usize, height: usize, pixels: Vec<[f32; 3]>) -> Result<Self> {
        if pixels.len() != width * height {
            return Err(Error::DimensionMismatch {
                expected: (width, height),
                actual: (pixels.len(), 1),
            });
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }
}

/// Unweighted mean of the three bands. The cameras run without IR cut
/// filter, so no band carries privileged information.
pub fn to_grayscale(frame: &RgbFrame) -> GrayImage {
    let data = frame
        .pixels
        .iter()
        .map(|[r, g, b]| ((*r as f64 + *g as f64 + *b as f64) / 3.0) as f32)
        .collect();
    Raster::from_vec(frame.width, frame.height, data).expect("length checked in RgbFrame::new")
}

/// Splits a horizontally concatenated stereo frame into `(left, right)`.
pub fn split_sbs(frame: &GrayImage) -> Result<(GrayImage, GrayImage)> {
    let (w2, h) = frame.dims();
    if w2 % 2 != 0 {
        return Err(Error::OddWidth(w2));
    }
    let w = w2 / 2;
    let left = Raster::from_fn(w, h, |x, y| frame.get(x, y));
    let right = Raster::from_fn(w, h, |x, y| frame.get(x + w, y));
    Ok((left, right))
}
