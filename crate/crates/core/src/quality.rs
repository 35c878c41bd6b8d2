//! Temporal consistency of disparity videos and per-observation summaries.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::flow::FlowField;
#[allow(unused_imports)]
use crate::math::Float64Ext;
use crate::raster::Raster;

/// What the per-frame sum is divided by.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum PixelNormalization {
    /// Mean over pixels where both the current and the warped previous
    /// disparity are valid.
    #[default]
    ValidOnly,
    /// Divide by the full frame size regardless of validity.
    AllPixels,
}

/// Result of [`temporal_error`].
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TemporalErrorReport {
    pub e_t: f64,
    /// One entry per consecutive frame pair; `None` when no pixel of the
    /// pair could be compared.
    pub per_frame_errors: Vec<Option<f64>>,
    pub n_frames: usize,
    pub n_pixels: usize,
    pub valid_pixel_fraction: f64,
}

/// Mean absolute difference between each disparity frame and the previous
/// frame warped along the flow:
///
/// `E_t = 1 / ((N_T - 1) N_P) * sum_n sum_(x,y) |D(x, y, n) - D(x - m_x, y - m_y, n - 1)|`
///
/// `flows[n - 1]` is the motion from frame `n - 1` to frame `n`, defined on
/// frame `n`.
pub fn temporal_error<D: AsRef<Raster>>(
    disparities: &[D],
    flows: &[FlowField],
    normalization: PixelNormalization,
) -> Result<TemporalErrorReport> {
    if disparities.len() < 2 {
        return Err(Error::EmptySequence);
    }
    if flows.len() != disparities.len() - 1 {
        return Err(Error::LengthMismatch(
            "need exactly one flow field per consecutive frame pair",
        ));
    }
    let mut acc = TemporalErrorAccumulator::new();
    for (pair, flow) in disparities.windows(2).zip(flows) {
        acc.push(pair[0].as_ref(), pair[1].as_ref(), flow)?;
    }
    acc.finish(normalization)
}

/// Streaming form of [`temporal_error`]: feed consecutive frame pairs in
/// order, keeping only the previous disparity frame around.
#[derive(Debug, Clone, Default)]
pub struct TemporalErrorAccumulator {
    dims: Option<(usize, usize)>,
    sums: Vec<f64>,
    counts: Vec<usize>,
}

impl TemporalErrorAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn pairs(&self) -> usize {
        self.sums.len()
    }

    /// Adds the pair `(previous, current)`, with `flow` the motion from
    /// `previous` to `current` defined on `current`.
    pub fn push(&mut self, previous: &Raster, current: &Raster, flow: &FlowField) -> Result<()> {
        let dims = *self.dims.get_or_insert(current.dims());
        for actual in [previous.dims(), current.dims(), flow.dims()] {
            if actual != dims {
                return Err(Error::DimensionMismatch {
                    expected: dims,
                    actual,
                });
            }
        }
        let (w, h) = dims;
        let mut sum = 0.0;
        let mut count = 0usize;
        for y in 0..h {
            for x in 0..w {
                let Some(a) = current.get(x, y) else { continue };
                let Some(m) = flow.get(x, y) else { continue };
                // same sampling as `warp_backward`, kept in f64
                let b = previous.sample_bilinear(x as f64 - m[0] as f64, y as f64 - m[1] as f64);
                if let Some(b) = b {
                    sum += (a as f64 - b).abs();
                    count += 1;
                }
            }
        }
        self.sums.push(sum);
        self.counts.push(count);
        Ok(())
    }

    pub fn finish(&self, normalization: PixelNormalization) -> Result<TemporalErrorReport> {
        let Some((w, h)) = self.dims else {
            return Err(Error::EmptySequence);
        };
        let n_pixels = w * h;
        let pairs = self.sums.len();
        let total_count: usize = self.counts.iter().sum();
        let total_sum: f64 = self.sums.iter().sum();
        let (e_t, per_frame_errors) = match normalization {
            PixelNormalization::ValidOnly => {
                if total_count == 0 {
                    return Err(Error::NoValidPixels);
                }
                let per = self
                    .sums
                    .iter()
                    .zip(&self.counts)
                    .map(|(s, c)| (*c > 0).then(|| s / *c as f64))
                    .collect();
                (total_sum / total_count as f64, per)
            }
            PixelNormalization::AllPixels => {
                let per = self
                    .sums
                    .iter()
                    .map(|s| Some(s / n_pixels as f64))
                    .collect();
                (total_sum / (pairs * n_pixels) as f64, per)
            }
        };
        Ok(TemporalErrorReport {
            e_t,
            per_frame_errors,
            n_frames: pairs + 1,
            n_pixels,
            valid_pixel_fraction: total_count as f64 / (pairs * n_pixels) as f64,
        })
    }
}

/// Fixed-width histogram over `[lo, hi]`. A value on an inner edge belongs to
/// the upper bin; `hi` itself closes the last bin.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub counts: Vec<u64>,
    pub underflow: u64,
    pub overflow: u64,
}

impl Histogram {
    pub fn new(n_bins: usize, lo: f64, hi: f64) -> Result<Self> {
        if n_bins == 0 {
            return Err(Error::InvalidParameter("histogram needs at least one bin"));
        }
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::InvalidParameter(
                "histogram range must satisfy lo < hi",
            ));
        }
        Ok(Self {
            lo,
            hi,
            counts: vec![0; n_bins],
            underflow: 0,
            overflow: 0,
        })
    }

    pub fn edge(&self, i: usize) -> f64 {
        if i == self.counts.len() {
            return self.hi;
        }
        self.lo + i as f64 * (self.hi - self.lo) / self.counts.len() as f64
    }

    pub fn add(&mut self, v: f64) {
        let n = self.counts.len();
        if v.is_nan() {
            return;
        }
        if v < self.lo {
            self.underflow += 1;
            return;
        }
        if v > self.hi {
            self.overflow += 1;
            return;
        }
        let mut i = (((v - self.lo) / (self.hi - self.lo)) * n as f64).floor() as usize;
        i = i.min(n - 1);
        // settle rounding against the exact edges
        while i + 1 < n && v >= self.edge(i + 1) {
            i += 1;
        }
        while i > 0 && v < self.edge(i) {
            i -= 1;
        }
        self.counts[i] += 1;
    }
}

/// Histogram of per-observation `E_t` values.
pub fn error_histogram(
    reports: &[TemporalErrorReport],
    n_bins: usize,
    lo: f64,
    hi: f64,
) -> Result<Histogram> {
    let mut h = Histogram::new(n_bins, lo, hi)?;
    for r in reports {
        h.add(r.e_t);
    }
    Ok(h)
}
