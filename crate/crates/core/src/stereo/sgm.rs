use alloc::vec;
use alloc::vec::Vec;

use super::census::{CostVolume, COST_SENTINEL};
use crate::error::{Error, Result};

pub const DEFAULT_P1: u16 = 10;
pub const DEFAULT_P2: u16 = 120;

const DIRECTIONS: [(isize, isize); 8] = [
    (1, 0),
    (-1, 0),
    (0, 1),
    (0, -1),
    (1, 1),
    (-1, 1),
    (1, -1),
    (-1, -1),
];

/// Path-cost sums over all scanline directions.
#[derive(Debug, Clone)]
pub struct AggregatedVolume {
    width: usize,
    height: usize,
    disparities: usize,
    left_valid: Vec<bool>,
    right_valid: Vec<bool>,
    paths: u16,
    sums: Vec<u16>,
}

impl AggregatedVolume {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn disparities(&self) -> usize {
        self.disparities
    }

    pub fn paths(&self) -> u16 {
        self.paths
    }

    /// Aggregated cost averaged over the paths, so it stays on the scale of
    /// the raw matching cost.
    #[inline]
    pub fn cost(&self, x: usize, y: usize, d: usize) -> f32 {
        self.sum(x, y, d) as f32 / self.paths as f32
    }

    #[inline]
    pub fn sum(&self, x: usize, y: usize, d: usize) -> u16 {
        self.sums[(y * self.width + x) * self.disparities + d]
    }

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
}

/// One step of the path recurrence:
/// `L(p,d) = C(p,d) + min(L(q,d), L(q,d±1) + p1, min_k L(q,k) + p2) - min_k L(q,k)`.
fn path_step(cost: &[u8], prev: Option<&[u16]>, out: &mut [u16], p1: u32, p2: u32) {
    let Some(prev) = prev else {
        for (o, c) in out.iter_mut().zip(cost) {
            *o = *c as u16;
        }
        return;
    };
    let nd = cost.len();
    let min_prev = *prev.iter().min().expect("at least one disparity") as u32;
    for d in 0..nd {
        let mut best = prev[d] as u32;
        if d > 0 {
            best = best.min(prev[d - 1] as u32 + p1);
        }
        if d + 1 < nd {
            best = best.min(prev[d + 1] as u32 + p1);
        }
        best = best.min(min_prev + p2);
        out[d] = (cost[d] as u32 + best - min_prev) as u16;
    }
}

/// Semi-global aggregation of `volume` along eight scanline directions.
pub fn sgm_aggregate(volume: &CostVolume, p1: u16, p2: u16) -> Result<AggregatedVolume> {
    if p1 == 0 || p2 < p1 {
        return Err(Error::InvalidParameter("SGM penalties need p2 >= p1 > 0"));
    }
    // every path cost is bounded by sentinel + p2; the 8-path sum must fit u16
    if (COST_SENTINEL as u32 + p2 as u32) * DIRECTIONS.len() as u32 > u16::MAX as u32 {
        return Err(Error::InvalidParameter("SGM penalty p2 too large"));
    }
    let (w, h, nd) = (volume.width(), volume.height(), volume.disparities());
    let (p1, p2) = (p1 as u32, p2 as u32);
    let mut sums = vec![0u16; w * h * nd];

    for &(dx, dy) in &DIRECTIONS {
        if dy == 0 {
            let mut prev = vec![0u16; nd];
            let mut cur = vec![0u16; nd];
            for y in 0..h {
                for i in 0..w {
                    let x = if dx > 0 { i } else { w - 1 - i };
                    path_step(
                        volume.pixel_costs(x, y),
                        (i > 0).then_some(&prev[..]),
                        &mut cur,
                        p1,
                        p2,
                    );
                    let base = (y * w + x) * nd;
                    for d in 0..nd {
                        sums[base + d] += cur[d];
                    }
                    core::mem::swap(&mut prev, &mut cur);
                }
            }
        } else {
            let mut prev_row = vec![0u16; w * nd];
            let mut cur_row = vec![0u16; w * nd];
            for j in 0..h {
                let y = if dy > 0 { j } else { h - 1 - j };
                for x in 0..w {
                    let px = x as isize - dx;
                    let prev = if j > 0 && px >= 0 && (px as usize) < w {
                        let px = px as usize;
                        Some(&prev_row[px * nd..(px + 1) * nd])
                    } else {
                        None
                    };
                    let out = &mut cur_row[x * nd..(x + 1) * nd];
                    path_step(volume.pixel_costs(x, y), prev, out, p1, p2);
                    let base = (y * w + x) * nd;
                    for d in 0..nd {
                        sums[base + d] += out[d];
                    }
                }
                core::mem::swap(&mut prev_row, &mut cur_row);
            }
        }
    }
    Ok(AggregatedVolume {
        width: w,
        height: h,
        disparities: nd,
        left_valid: volume.left_valid_mask().to_vec(),
        right_valid: volume.right_valid_mask().to_vec(),
        paths: DIRECTIONS.len() as u16,
        sums,
    })
}
