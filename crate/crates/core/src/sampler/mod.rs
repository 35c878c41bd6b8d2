//! Still-frame selection from observation videos: fixed rate, or adaptive
//! by accumulating the foreground ratio of a background model.

mod gmm;

pub use gmm::{Component, Foreground, GmmModel, GmmParams};

use alloc::vec::Vec;

use crate::error::{Error, Result};
#[allow(unused_imports)]
use crate::math::Float64Ext;
use crate::raster::GrayImage;

pub const DEFAULT_THRESHOLD: f64 = 0.10;
pub const DEFAULT_BURN_IN: usize = 30;

// slack for sums like 0.01 + 0.09 that land a hair under the threshold
const ACCUMULATOR_EPS: f64 = 1e-9;

/// Selected frames of one video.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SamplePlan {
    /// Sorted, unique frame indices (0-based).
    pub indices: Vec<usize>,
    /// Foreground ratio of every frame; empty for fixed-rate plans.
    pub ratios: Vec<f64>,
    /// Accumulation threshold; `None` for fixed-rate plans.
    pub threshold: Option<f64>,
}

/// Frames at `round(k * fps / rate)` for `k = 0, 1, ...` below `n_frames`.
pub fn fixed_rate_sample(n_frames: usize, fps: f64, rate: f64) -> Result<SamplePlan> {
    if !(fps > 0.0 && rate > 0.0 && fps.is_finite() && rate.is_finite()) {
        return Err(Error::InvalidParameter(
            "fps and sampling rate must be positive",
        ));
    }
    let mut indices = Vec::new();
    if rate >= fps {
        indices.extend(0..n_frames);
    } else {
        let stride = fps / rate;
        let mut k = 0usize;
        loop {
            let i = (k as f64 * stride).round() as usize;
            if i >= n_frames {
                break;
            }
            if indices.last() != Some(&i) {
                indices.push(i);
            }
            k += 1;
        }
    }
    Ok(SamplePlan {
        indices,
        ratios: Vec::new(),
        threshold: None,
    })
}

/// Emits frame `n` once the running sum of foreground ratios since the last
/// emission reaches `threshold`, then resets the sum to zero. The first
/// `burn_in` frames neither accumulate nor emit.
pub fn accumulate_plan(ratios: &[f64], threshold: f64, burn_in: usize) -> Result<SamplePlan> {
    if !(threshold > 0.0) {
        return Err(Error::InvalidParameter(
            "accumulation threshold must be positive",
        ));
    }
    let mut indices = Vec::new();
    let mut acc = 0.0;
    for (n, r) in ratios.iter().enumerate().skip(burn_in) {
        acc += r;
        if acc >= threshold - ACCUMULATOR_EPS {
            indices.push(n);
            acc = 0.0;
        }
    }
    Ok(SamplePlan {
        indices,
        ratios: ratios.to_vec(),
        threshold: Some(threshold),
    })
}

/// Runs the background model over `frames` and accumulates foreground ratios.
pub fn adaptive_sample<'a>(
    frames: impl IntoIterator<Item = &'a GrayImage>,
    threshold: f64,
    params: &GmmParams,
    burn_in: usize,
) -> Result<SamplePlan> {
    let mut model: Option<GmmModel> = None;
    let mut ratios = Vec::new();
    for frame in frames {
        let m = match &mut model {
            Some(m) => m,
            None => model.insert(GmmModel::new(frame.width(), frame.height(), *params)?),
        };
        ratios.push(m.update(frame)?.ratio);
    }
    accumulate_plan(&ratios, threshold, burn_in)
}
