use super::RectifiedRig;
use crate::raster::{DepthMap, DisparityMap};

/// Disparities at or below this many pixels are treated as unreliable.
pub const DEFAULT_MIN_DISPARITY: f64 = 0.1;

/// `z = b * f / d`, or `None` when `d` does not exceed `min_disparity`.
#[inline]
pub fn depth_from_disparity(
    baseline: f64,
    fx: f64,
    disparity: f64,
    min_disparity: f64,
) -> Option<f64> {
    if disparity.is_finite() && disparity > min_disparity {
        Some(baseline * fx / disparity)
    } else {
        None
    }
}

/// Depth in meters for a disparity measured on the rectified pair.
pub fn disparity_to_depth(disparity: f64, rig: &RectifiedRig) -> Option<f64> {
    depth_from_disparity(rig.baseline, rig.fx, disparity, DEFAULT_MIN_DISPARITY)
}

/// Elementwise conversion; the validity mask carries over and is further
/// restricted to disparities above `min_disparity`.
pub fn depth_map(disparity: &DisparityMap, rig: &RectifiedRig, min_disparity: f64) -> DepthMap {
    disparity.raster().map_valid(|d| {
        depth_from_disparity(rig.baseline, rig.fx, d as f64, min_disparity).map(|z| z as f32)
    })
}
