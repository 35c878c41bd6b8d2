//! Dense single-channel rasters with a per-pixel validity mask.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
#[allow(unused_imports)]
use crate::math::Float64Ext;

/// Row-major `f32` raster. Every pixel carries a validity flag; the stored
/// value of an invalid pixel is unspecified and ignored by `==`.
#[derive(Debug, Clone)]
pub struct Raster {
    width: usize,
    height: usize,
    data: Vec<f32>,
    valid: Vec<bool>,
}

impl PartialEq for Raster {
    fn eq(&self, other: &Self) -> bool {
        self.dims() == other.dims()
            && self.valid == other.valid
            && self
                .data
                .iter()
                .zip(&other.data)
                .zip(&self.valid)
                .all(|((a, b), ok)| !ok || a == b)
    }
}

/// Grayscale intensities in `[0, 1]`.
pub type GrayImage = Raster;
/// Metric depth in meters.
pub type DepthMap = Raster;

impl Raster {
    /// Constant raster, every pixel valid.
    pub fn filled(width: usize, height: usize, value: f32) -> Self {
        Self {
            width,
            height,
            data: vec![value; width * height],
            valid: vec![true; width * height],
        }
    }

    /// Raster with every pixel invalid.
    pub fn invalid(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![0.0; width * height],
            valid: vec![false; width * height],
        }
    }

    /// Builds a raster from row-major values. Non-finite values become invalid
    /// pixels, which makes NaN a convenient "missing" marker.
    pub fn from_vec(width: usize, height: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::DimensionMismatch {
                expected: (width, height),
                actual: (data.len(), 1),
            });
        }
        let valid = data.iter().map(|v| v.is_finite()).collect();
        Ok(Self {
            width,
            height,
            data,
            valid,
        })
    }

    pub fn from_parts(
        width: usize,
        height: usize,
        data: Vec<f32>,
        valid: Vec<bool>,
    ) -> Result<Self> {
        if data.len() != width * height || valid.len() != width * height {
            return Err(Error::DimensionMismatch {
                expected: (width, height),
                actual: (data.len(), valid.len()),
            });
        }
        Ok(Self {
            width,
            height,
            data,
            valid,
        })
    }

    /// Evaluates `f(x, y)` for every pixel; `None` marks the pixel invalid.
    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> Option<f32>,
    ) -> Self {
        let mut out = Self::invalid(width, height);
        for y in 0..height {
            for x in 0..width {
                if let Some(v) = f(x, y) {
                    out.set(x, y, v);
                }
            }
        }
        out
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize) -> usize {
        y * self.width + x
    }

    /// Value at `(x, y)` if the pixel is valid.
    #[inline]
    pub fn get(&self, x: usize, y: usize) -> Option<f32> {
        let i = self.index(x, y);
        if self.valid[i] {
            Some(self.data[i])
        } else {
            None
        }
    }

    /// Raw stored value, ignoring validity.
    #[inline]
    pub fn value(&self, x: usize, y: usize) -> f32 {
        self.data[self.index(x, y)]
    }

    #[inline]
    pub fn is_valid(&self, x: usize, y: usize) -> bool {
        self.valid[self.index(x, y)]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: f32) {
        let i = self.index(x, y);
        self.data[i] = value;
        self.valid[i] = true;
    }

    #[inline]
    pub fn invalidate(&mut self, x: usize, y: usize) {
        let i = self.index(x, y);
        self.valid[i] = false;
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn valid_mask(&self) -> &[bool] {
        &self.valid
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|v| **v).count()
    }

    /// Row-major values with invalid pixels replaced by NaN.
    pub fn to_nan_vec(&self) -> Vec<f32> {
        self.data
            .iter()
            .zip(&self.valid)
            .map(|(v, ok)| if *ok { *v } else { f32::NAN })
            .collect()
    }

    /// Applies `f` to every valid value; invalid pixels stay invalid.
    pub fn map_valid(&self, mut f: impl FnMut(f32) -> Option<f32>) -> Self {
        let mut out = Self::invalid(self.width, self.height);
        for i in 0..self.data.len() {
            if self.valid[i] {
                if let Some(v) = f(self.data[i]) {
                    out.data[i] = v;
                    out.valid[i] = true;
                }
            }
        }
        out
    }

    pub fn same_dims(&self, other: &Raster) -> Result<()> {
        if self.dims() != other.dims() {
            return Err(Error::DimensionMismatch {
                expected: self.dims(),
                actual: other.dims(),
            });
        }
        Ok(())
    }

    /// Bilinear sample at sub-pixel position `(x, y)`, pixel centers at
    /// integer coordinates. Returns `None` outside `[0, w-1] x [0, h-1]` or
    /// when a neighbor with non-zero weight is invalid.
    pub fn sample_bilinear(&self, x: f64, y: f64) -> Option<f64> {
        const EDGE_EPS: f64 = 1e-9;
        if !(x.is_finite() && y.is_finite()) || self.width == 0 || self.height == 0 {
            return None;
        }
        let max_x = (self.width - 1) as f64;
        let max_y = (self.height - 1) as f64;
        if x < -EDGE_EPS || y < -EDGE_EPS || x > max_x + EDGE_EPS || y > max_y + EDGE_EPS {
            return None;
        }
        let x = x.clamp(0.0, max_x);
        let y = y.clamp(0.0, max_y);
        let x0 = x.floor() as usize;
        let y0 = y.floor() as usize;
        let fx = x - x0 as f64;
        let fy = y - y0 as f64;
        let mut acc = 0.0;
        for (dy, wy) in [(0usize, 1.0 - fy), (1, fy)] {
            if wy == 0.0 {
                continue;
            }
            for (dx, wx) in [(0usize, 1.0 - fx), (1, fx)] {
                if wx == 0.0 {
                    continue;
                }
                let v = self.get(x0 + dx, y0 + dy)?;
                acc += wx * wy * v as f64;
            }
        }
        Some(acc)
    }
}

/// Disparities in pixels for each pixel of the left rectified view.
#[derive(Debug, Clone, PartialEq)]
pub struct DisparityMap {
    raster: Raster,
    max_disparity: f32,
}

impl DisparityMap {
    /// Wraps a raster; valid values outside `[0, max_disparity]` are invalidated.
    pub fn new(mut raster: Raster, max_disparity: f32) -> Self {
        for i in 0..raster.data.len() {
            let v = raster.data[i];
            if raster.valid[i] && !(v >= 0.0 && v <= max_disparity) {
                raster.valid[i] = false;
            }
        }
        Self {
            raster,
            max_disparity,
        }
    }

    /// Wraps a raster whose range is unknown (e.g. read back from disk), using
    /// the largest valid value as the range bound.
    pub fn from_raster(raster: Raster) -> Self {
        let max = raster
            .data
            .iter()
            .zip(&raster.valid)
            .filter(|(v, ok)| **ok && **v >= 0.0)
            .map(|(v, _)| *v)
            .fold(0.0f32, f32::max);
        Self::new(raster, max)
    }

    pub fn max_disparity(&self) -> f32 {
        self.max_disparity
    }

    pub fn raster(&self) -> &Raster {
        &self.raster
    }

    pub fn into_raster(self) -> Raster {
        self.raster
    }

    pub fn dims(&self) -> (usize, usize) {
        self.raster.dims()
    }

    pub fn get(&self, x: usize, y: usize) -> Option<f32> {
        self.raster.get(x, y)
    }

    pub(crate) fn invalidate(&mut self, x: usize, y: usize) {
        self.raster.invalidate(x, y);
    }
}

impl AsRef<Raster> for DisparityMap {
    fn as_ref(&self) -> &Raster {
        &self.raster
    }
}

impl AsRef<Raster> for Raster {
    fn as_ref(&self) -> &Raster {
        self
    }
}
