//! Animal-camera distances from detections and depth maps.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
#[allow(unused_imports)]
use crate::math::Float64Ext;
use crate::raster::DepthMap;

/// Records with less valid depth than this under the detection are rejected.
pub const MIN_VALID_DEPTH_FRACTION: f64 = 0.2;

/// Binary instance mask, row-major in memory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    data: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize, data: Vec<bool>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::LengthMismatch(
                "mask data does not match its dimensions",
            ));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    /// Decodes COCO-style uncompressed run lengths: alternating runs of
    /// background and foreground over column-major pixels, starting with
    /// background.
    pub fn from_rle(width: usize, height: usize, counts: &[u32]) -> Result<Self> {
        let n = width * height;
        let mut data = vec![false; n];
        let mut pos = 0usize;
        for (i, &run) in counts.iter().enumerate() {
            let end = pos + run as usize;
            if end > n {
                return Err(Error::InvalidDetection("mask run lengths exceed the frame"));
            }
            if i % 2 == 1 {
                for k in pos..end {
                    data[(k % height) * width + k / height] = true;
                }
            }
            pos = end;
        }
        if pos != n {
            return Err(Error::InvalidDetection(
                "mask run lengths do not cover the frame",
            ));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn to_rle(&self) -> Vec<u32> {
        let mut counts = Vec::new();
        let mut current = false;
        let mut run = 0u32;
        for x in 0..self.width {
            for y in 0..self.height {
                let v = self.data[y * self.width + x];
                if v != current {
                    counts.push(run);
                    run = 0;
                    current = v;
                }
                run += 1;
            }
        }
        counts.push(run);
        counts
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.data[y * self.width + x]
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|v| **v).count()
    }

    /// `[x_min, y_min, x_max, y_max]` of the set pixels, inclusive.
    pub fn bounds(&self) -> Option<[usize; 4]> {
        let mut b: Option<[usize; 4]> = None;
        for y in 0..self.height {
            for x in 0..self.width {
                if self.get(x, y) {
                    b = Some(match b {
                        None => [x, y, x, y],
                        Some([x0, y0, x1, y1]) => [x0.min(x), y0.min(y), x1.max(x), y1.max(y)],
                    });
                }
            }
        }
        b
    }
}

/// One animal detection in rectified left-image coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub frame_index: usize,
    /// `[x, y, w, h]` in pixels.
    pub bbox: [f64; 4],
    pub confidence: f64,
    pub category: String,
    pub mask: Option<BinaryMask>,
}

impl Detection {
    pub fn validate(&self, width: usize, height: usize) -> Result<()> {
        let [x, y, w, h] = self.bbox;
        const TOL: f64 = 1e-6;
        if !self.bbox.iter().all(|v| v.is_finite()) || w <= 0.0 || h <= 0.0 {
            return Err(Error::InvalidDetection(
                "bounding box must have positive size",
            ));
        }
        if x < -TOL || y < -TOL || x + w > width as f64 + TOL || y + h > height as f64 + TOL {
            return Err(Error::InvalidDetection("bounding box leaves the frame"));
        }
        if !(0.0..=1.0).contains(&self.confidence) {
            return Err(Error::InvalidDetection("confidence must lie in [0, 1]"));
        }
        if let Some(mask) = &self.mask {
            if mask.dims() != (width, height) {
                return Err(Error::InvalidDetection("mask does not match the frame"));
            }
            if let Some([x0, y0, x1, y1]) = mask.bounds() {
                let inside = x0 as f64 >= x - 1.0
                    && y0 as f64 >= y - 1.0
                    && (x1 + 1) as f64 <= x + w + 1.0
                    && (y1 + 1) as f64 <= y + h + 1.0;
                if !inside {
                    return Err(Error::InvalidDetection(
                        "mask extends beyond its bounding box",
                    ));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum Method {
    MaskMedian,
    BboxSampled,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::MaskMedian => "mask-median",
            Method::BboxSampled => "bbox-sampled",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistanceEstimate {
    /// Metres.
    pub distance: f64,
    pub method: Method,
    pub valid_depth_fraction: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DistanceRecord {
    pub observation_id: String,
    pub frame_index: usize,
    pub distance: f64,
    pub method: Method,
    pub valid_depth_fraction: f64,
}

impl DistanceRecord {
    pub fn new(
        observation_id: impl Into<String>,
        frame_index: usize,
        estimate: DistanceEstimate,
    ) -> Self {
        Self {
            observation_id: observation_id.into(),
            frame_index,
            distance: estimate.distance,
            method: estimate.method,
            valid_depth_fraction: estimate.valid_depth_fraction,
        }
    }
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

fn summarize(values: &mut [f64], region: usize, method: Method) -> Result<DistanceEstimate> {
    let fraction = if region == 0 {
        0.0
    } else {
        values.len() as f64 / region as f64
    };
    if values.is_empty() || fraction < MIN_VALID_DEPTH_FRACTION {
        return Err(Error::NoValidDepth {
            fraction,
            required: MIN_VALID_DEPTH_FRACTION,
        });
    }
    Ok(DistanceEstimate {
        distance: median(values),
        method,
        valid_depth_fraction: fraction,
    })
}

/// Median of the valid depths under the detection mask.
pub fn distance_from_mask(depth: &DepthMap, det: &Detection) -> Result<DistanceEstimate> {
    let mask = det
        .mask
        .as_ref()
        .ok_or(Error::InvalidDetection("detection has no mask"))?;
    if mask.dims() != depth.dims() {
        return Err(Error::DimensionMismatch {
            expected: depth.dims(),
            actual: mask.dims(),
        });
    }
    let mut values = Vec::new();
    let mut region = 0usize;
    for (i, inside) in mask.data.iter().enumerate() {
        if *inside {
            region += 1;
            if depth.valid_mask()[i] {
                values.push(depth.data()[i] as f64);
            }
        }
    }
    summarize(&mut values, region, Method::MaskMedian)
}

/// Pixel range `[lo, hi)` covering the central half of `[start, start + len)`,
/// at least one pixel wide.
fn central_span(start: f64, len: f64, limit: usize) -> (usize, usize) {
    let lo = (start + 0.25 * len).floor().max(0.0) as usize;
    let hi = ((start + 0.75 * len).ceil().max(0.0) as usize).min(limit);
    let lo = lo.min(limit.saturating_sub(1));
    (lo, hi.max(lo + 1))
}

/// Median of the valid depths in the central 50% of the bounding box along
/// both axes.
pub fn distance_from_bbox(depth: &DepthMap, det: &Detection) -> Result<DistanceEstimate> {
    det.validate(depth.width(), depth.height())?;
    let [x, y, w, h] = det.bbox;
    let (x0, x1) = central_span(x, w, depth.width());
    let (y0, y1) = central_span(y, h, depth.height());
    let mut values = Vec::new();
    for yy in y0..y1 {
        for xx in x0..x1 {
            if let Some(v) = depth.get(xx, yy) {
                values.push(v as f64);
            }
        }
    }
    summarize(&mut values, (x1 - x0) * (y1 - y0), Method::BboxSampled)
}

/// Mask median when a mask is present, central-box median otherwise.
pub fn estimate_distance(depth: &DepthMap, det: &Detection) -> Result<DistanceEstimate> {
    if det.mask.is_some() {
        distance_from_mask(depth, det)
    } else {
        distance_from_bbox(depth, det)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CollectedDistances {
    pub kept: Vec<DistanceRecord>,
    pub discarded_left: usize,
    pub discarded_right: usize,
}

/// Keeps records with `left <= distance <= right`.
pub fn collect_distances(
    records: &[DistanceRecord],
    left: f64,
    right: f64,
) -> Result<CollectedDistances> {
    if !(left >= 0.0 && right > left && right.is_finite()) {
        return Err(Error::InvalidWindow { left, right });
    }
    let mut out = CollectedDistances::default();
    for r in records {
        if r.distance < left {
            out.discarded_left += 1;
        } else if r.distance > right {
            out.discarded_right += 1;
        } else {
            out.kept.push(r.clone());
        }
    }
    Ok(out)
}
