use super::census::CostVolume;
use super::sgm::AggregatedVolume;
use crate::error::Result;
use crate::raster::{DisparityMap, Raster};

/// Read access shared by raw and aggregated cost volumes.
pub trait MatchingCost {
    fn dims(&self) -> (usize, usize);
    fn disparities(&self) -> usize;
    fn cost_at(&self, x: usize, y: usize, d: usize) -> f32;
    fn candidate_valid(&self, x: usize, y: usize, d: usize) -> bool;
    fn left_pixel_valid(&self, x: usize, y: usize) -> bool;
    fn right_pixel_valid(&self, x: usize, y: usize) -> bool;
}

impl MatchingCost for CostVolume {
    fn dims(&self) -> (usize, usize) {
        (self.width(), self.height())
    }
    fn disparities(&self) -> usize {
        CostVolume::disparities(self)
    }
    fn cost_at(&self, x: usize, y: usize, d: usize) -> f32 {
        self.cost(x, y, d) as f32
    }
    fn candidate_valid(&self, x: usize, y: usize, d: usize) -> bool {
        CostVolume::candidate_valid(self, x, y, d)
    }
    fn left_pixel_valid(&self, x: usize, y: usize) -> bool {
        self.left_valid(x, y)
    }
    fn right_pixel_valid(&self, x: usize, y: usize) -> bool {
        self.right_valid(x, y)
    }
}

impl MatchingCost for AggregatedVolume {
    fn dims(&self) -> (usize, usize) {
        (self.width(), self.height())
    }
    fn disparities(&self) -> usize {
        AggregatedVolume::disparities(self)
    }
    fn cost_at(&self, x: usize, y: usize, d: usize) -> f32 {
        self.cost(x, y, d)
    }
    fn candidate_valid(&self, x: usize, y: usize, d: usize) -> bool {
        AggregatedVolume::candidate_valid(self, x, y, d)
    }
    fn left_pixel_valid(&self, x: usize, y: usize) -> bool {
        self.left_valid(x, y)
    }
    fn right_pixel_valid(&self, x: usize, y: usize) -> bool {
        self.right_valid(x, y)
    }
}

/// Sub-pixel interpolation around the integer winner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Subpixel {
    /// Symmetric V fit through the winner and its two neighbors.
    #[default]
    Equiangular,
    /// Parabola through the same three costs.
    Parabolic,
    /// Integer disparities only.
    None,
}

impl Subpixel {
    /// Offset in `[-0.5, 0.5]` of the interpolated minimum from the center
    /// sample.
    pub fn offset(self, prev: f32, center: f32, next: f32) -> f32 {
        let (prev, center, next) = (prev as f64, center as f64, next as f64);
        let delta = match self {
            Subpixel::None => 0.0,
            Subpixel::Equiangular => {
                let denom = 2.0 * (prev - center).max(next - center);
                if denom > 0.0 {
                    (prev - next) / denom
                } else {
                    0.0
                }
            }
            Subpixel::Parabolic => {
                let denom = 2.0 * (prev - 2.0 * center + next);
                if denom > 0.0 {
                    (prev - next) / denom
                } else {
                    0.0
                }
            }
        };
        delta.clamp(-0.5, 0.5) as f32
    }
}

/// Lowest-cost valid candidate, smallest disparity on ties.
fn winner(costs: impl Iterator<Item = (usize, f32)>) -> Option<(usize, f32)> {
    let mut best: Option<(usize, f32)> = None;
    for (d, c) in costs {
        if best.is_none_or(|(_, b)| c < b) {
            best = Some((d, c));
        }
    }
    best
}

/// Winner-take-all disparity for the left view with equiangular refinement.
pub fn extract_disparity<V: MatchingCost>(volume: &V) -> DisparityMap {
    extract_disparity_with(volume, Subpixel::Equiangular)
}

pub fn extract_disparity_with<V: MatchingCost>(volume: &V, subpixel: Subpixel) -> DisparityMap {
    let (w, h) = volume.dims();
    let nd = volume.disparities();
    let raster = Raster::from_fn(w, h, |x, y| {
        if !volume.left_pixel_valid(x, y) {
            return None;
        }
        let valid = |d: usize| volume.candidate_valid(x, y, d);
        let (d, c) = winner(
            (0..nd)
                .filter(|&d| valid(d))
                .map(|d| (d, volume.cost_at(x, y, d))),
        )?;
        // range borders stay integer
        if d == 0 || d + 1 >= nd || !valid(d - 1) || !valid(d + 1) {
            return Some(d as f32);
        }
        let off = subpixel.offset(volume.cost_at(x, y, d - 1), c, volume.cost_at(x, y, d + 1));
        Some(d as f32 + off)
    });
    DisparityMap::new(raster, (nd - 1) as f32)
}

/// Disparity for the right view read from the left-referenced volume: right
/// pixel `x` at disparity `d` corresponds to left pixel `x + d`.
pub fn extract_right_disparity<V: MatchingCost>(volume: &V, subpixel: Subpixel) -> DisparityMap {
    let (w, h) = volume.dims();
    let nd = volume.disparities();
    let raster = Raster::from_fn(w, h, |x, y| {
        if !volume.right_pixel_valid(x, y) {
            return None;
        }
        let valid = |d: usize| x + d < w && volume.candidate_valid(x + d, y, d);
        let cost = |d: usize| volume.cost_at(x + d, y, d);
        let (d, c) = winner((0..nd).filter(|&d| valid(d)).map(|d| (d, cost(d))))?;
        if d == 0 || d + 1 >= nd || !valid(d - 1) || !valid(d + 1) {
            return Some(d as f32);
        }
        Some(d as f32 + subpixel.offset(cost(d - 1), c, cost(d + 1)))
    });
    DisparityMap::new(raster, (nd - 1) as f32)
}

pub const DEFAULT_LR_TOLERANCE: f32 = 1.0;

/// Keeps a left disparity only if the right view, sampled where it points,
/// agrees within `tolerance` pixels. An infinite tolerance disables the check.
pub fn lr_consistency(
    left: &DisparityMap,
    right: &DisparityMap,
    tolerance: f32,
) -> Result<DisparityMap> {
    left.raster().same_dims(right.raster())?;
    let mut out = left.clone();
    if tolerance == f32::INFINITY {
        return Ok(out);
    }
    let (w, h) = left.dims();
    for y in 0..h {
        for x in 0..w {
            let Some(dl) = left.get(x, y) else {
                continue;
            };
            let xr = libm::roundf(x as f32 - dl);
            let consistent = xr >= 0.0
                && (xr as usize) < w
                && right
                    .get(xr as usize, y)
                    .is_some_and(|dr| libm::fabsf(dl - dr) <= tolerance);
            if !consistent {
                out.invalidate(x, y);
            }
        }
    }
    Ok(out)
}
