//! Dense disparity from a rectified pair: census matching cost, semi-global
//! aggregation, winner-take-all extraction and a left-right check.

mod census;
mod disparity;
mod sgm;

pub use census::{
    census_cost_volume, census_cost_volume_with_window, census_transform, CostVolume,
    COST_SENTINEL, DEFAULT_CENSUS_WINDOW,
};
pub use disparity::{
    extract_disparity, extract_disparity_with, extract_right_disparity, lr_consistency,
    MatchingCost, Subpixel, DEFAULT_LR_TOLERANCE,
};
pub use sgm::{sgm_aggregate, AggregatedVolume, DEFAULT_P1, DEFAULT_P2};

use crate::error::Result;
use crate::raster::{DisparityMap, GrayImage};

pub const DEFAULT_MAX_DISPARITY: usize = 192;

/// Full matching pipeline with its parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct StereoMatcher {
    pub max_disparity: usize,
    pub p1: u16,
    pub p2: u16,
    pub census_window: usize,
    /// Left-right tolerance in pixels; `None` skips the check.
    pub lr_tolerance: Option<f32>,
    pub subpixel: Subpixel,
}

impl Default for StereoMatcher {
    fn default() -> Self {
        Self {
            max_disparity: DEFAULT_MAX_DISPARITY,
            p1: DEFAULT_P1,
            p2: DEFAULT_P2,
            census_window: DEFAULT_CENSUS_WINDOW,
            lr_tolerance: Some(DEFAULT_LR_TOLERANCE),
            subpixel: Subpixel::Equiangular,
        }
    }
}

impl StereoMatcher {
    /// Left-view disparity map of a rectified pair.
    pub fn compute(&self, left: &GrayImage, right: &GrayImage) -> Result<DisparityMap> {
        let raw =
            census_cost_volume_with_window(left, right, self.max_disparity, self.census_window)?;
        let agg = sgm_aggregate(&raw, self.p1, self.p2)?;
        drop(raw);
        let disp = extract_disparity_with(&agg, self.subpixel);
        match self.lr_tolerance {
            Some(tol) => {
                let right_disp = extract_right_disparity(&agg, self.subpixel);
                lr_consistency(&disp, &right_disp, tol)
            }
            None => Ok(disp),
        }
    }
}
