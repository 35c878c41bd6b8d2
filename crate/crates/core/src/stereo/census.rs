use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::raster::GrayImage;

/// Cost assigned to candidates without a counterpart (outside the right
/// image or on an invalid pixel). Far above any Hamming distance.
pub const COST_SENTINEL: u8 = 255;

pub const DEFAULT_CENSUS_WINDOW: usize = 5;

/// Matching cost per left pixel and disparity, laid out as
/// `[(y * width + x) * disparities + d]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CostVolume {
    width: usize,
    height: usize,
    disparities: usize,
    costs: Vec<u8>,
    left_valid: Vec<bool>,
    right_valid: Vec<bool>,
}

impl CostVolume {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Number of disparity planes, `max_disparity + 1`.
    pub fn disparities(&self) -> usize {
        self.disparities
    }

    #[inline]
    pub fn cost(&self, x: usize, y: usize, d: usize) -> u8 {
        self.costs[(y * self.width + x) * self.disparities + d]
    }

    #[inline]
    pub(crate) fn pixel_costs(&self, x: usize, y: usize) -> &[u8] {
        let i = (y * self.width + x) * self.disparities;
        &self.costs[i..i + self.disparities]
    }

    /// Whether left pixel `(x, y)` has a real match candidate at `d`.
    #[inline]
    pub fn candidate_valid(&self, x: usize, y: usize, d: usize) -> bool {
        d <= x && self.left_valid[y * self.width + x] && self.right_valid[y * self.width + x - d]
    }

    pub(crate) fn left_valid(&self, x: usize, y: usize) -> bool {
        self.left_valid[y * self.width + x]
    }

    pub(crate) fn right_valid(&self, x: usize, y: usize) -> bool {
        self.right_valid[y * self.width + x]
    }

    pub(crate) fn left_valid_mask(&self) -> &[bool] {
        &self.left_valid
    }

    pub(crate) fn right_valid_mask(&self) -> &[bool] {
        &self.right_valid
    }
}

/// Census descriptor per pixel: bit set where the neighbor is darker than
/// the center. Neighbors beyond the border are clamped; invalid neighbors
/// contribute a zero bit.
pub fn census_transform(img: &GrayImage, window: usize) -> Result<Vec<u64>> {
    if window.is_multiple_of(2) || window < 3 || window * window - 1 > 64 {
        return Err(Error::InvalidParameter(
            "census window must be odd, between 3 and 7",
        ));
    }
    let (w, h) = img.dims();
    let r = (window / 2) as isize;
    let mut out = vec![0u64; w * h];
    for y in 0..h {
        for x in 0..w {
            let Some(center) = img.get(x, y) else {
                continue;
            };
            let mut bits = 0u64;
            for dy in -r..=r {
                for dx in -r..=r {
                    if dx == 0 && dy == 0 {
                        continue;
                    }
                    let nx = (x as isize + dx).clamp(0, w as isize - 1) as usize;
                    let ny = (y as isize + dy).clamp(0, h as isize - 1) as usize;
                    bits <<= 1;
                    if let Some(v) = img.get(nx, ny) {
                        if v < center {
                            bits |= 1;
                        }
                    }
                }
            }
            out[y * w + x] = bits;
        }
    }
    Ok(out)
}

/// Census cost volume with the default 5x5 window.
pub fn census_cost_volume(
    left: &GrayImage,
    right: &GrayImage,
    max_disparity: usize,
) -> Result<CostVolume> {
    census_cost_volume_with_window(left, right, max_disparity, DEFAULT_CENSUS_WINDOW)
}

/// Hamming distance between left census at `(x, y)` and right census at
/// `(x - d, y)` for every `d` in `0..=max_disparity`.
pub fn census_cost_volume_with_window(
    left: &GrayImage,
    right: &GrayImage,
    max_disparity: usize,
    window: usize,
) -> Result<CostVolume> {
    left.same_dims(right)?;
    let (w, h) = left.dims();
    let cl = census_transform(left, window)?;
    let cr = census_transform(right, window)?;
    let nd = max_disparity + 1;
    let mut costs = vec![COST_SENTINEL; w * h * nd];
    for y in 0..h {
        for x in 0..w {
            if !left.is_valid(x, y) {
                continue;
            }
            let base = (y * w + x) * nd;
            let desc = cl[y * w + x];
            for d in 0..=max_disparity.min(x) {
                if right.is_valid(x - d, y) {
                    costs[base + d] = (desc ^ cr[y * w + x - d]).count_ones() as u8;
                }
            }
        }
    }
    Ok(CostVolume {
        width: w,
        height: h,
        disparities: nd,
        costs,
        left_valid: left.valid_mask().to_vec(),
        right_valid: right.valid_mask().to_vec(),
    })
}
