//! Detector output per video:
//! `{video_id, frames: [{frame_index, detections: [{bbox, confidence, category, mask_rle?}]}]}`.
//!
//! Boxes are `[x, y, w, h]` in rectified left-image pixels. Masks are COCO
//! run lengths over column-major pixels, either as a plain count list or in
//! the compact string form.

use std::path::Path;

use serde::{Deserialize, Serialize};
use stereotrap_core::distance::{BinaryMask, Detection};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionsFile {
    pub video_id: String,
    pub frames: Vec<FrameDetections>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameDetections {
    pub frame_index: usize,
    pub detections: Vec<DetectionEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionEntry {
    pub bbox: [f64; 4],
    pub confidence: f64,
    pub category: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask_rle: Option<MaskRle>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskRle {
    /// `[height, width]`.
    pub size: [usize; 2],
    pub counts: RleCounts,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RleCounts {
    Runs(Vec<u32>),
    Compact(String),
}

impl MaskRle {
    pub fn from_mask(mask: &BinaryMask) -> Self {
        let (w, h) = mask.dims();
        Self {
            size: [h, w],
            counts: RleCounts::Runs(mask.to_rle()),
        }
    }

    pub fn decode(&self) -> std::result::Result<BinaryMask, String> {
        let [h, w] = self.size;
        let runs = match &self.counts {
            RleCounts::Runs(r) => r.clone(),
            RleCounts::Compact(s) => decode_compact(s)?,
        };
        BinaryMask::from_rle(w, h, &runs).map_err(|e| e.to_string())
    }
}

/// Decodes the COCO compact string: 5-bit groups offset by 48, with runs
/// after the second stored as differences to the run two places back.
pub fn decode_compact(s: &str) -> std::result::Result<Vec<u32>, String> {
    let bytes = s.as_bytes();
    let mut runs: Vec<i64> = Vec::new();
    let mut p = 0;
    while p < bytes.len() {
        let mut x: i64 = 0;
        let mut k = 0;
        loop {
            let c = bytes[p].checked_sub(48).ok_or("invalid RLE character")? as i64;
            x |= (c & 0x1f) << (5 * k);
            p += 1;
            k += 1;
            let more = c & 0x20 != 0;
            if !more {
                if c & 0x10 != 0 {
                    x |= -1i64 << (5 * k);
                }
                break;
            }
            if p >= bytes.len() || k > 12 {
                return Err("truncated RLE string".into());
            }
        }
        if runs.len() > 2 {
            x += runs[runs.len() - 2];
        }
        runs.push(x);
    }
    runs.into_iter()
        .map(|r| u32::try_from(r).map_err(|_| "negative RLE run".to_string()))
        .collect()
}

pub fn encode_compact(runs: &[u32]) -> String {
    let mut out = String::new();
    for (i, &r) in runs.iter().enumerate() {
        let mut x = r as i64;
        if i > 2 {
            x -= runs[i - 2] as i64;
        }
        loop {
            let mut c = x & 0x1f;
            x >>= 5;
            let more = if c & 0x10 != 0 { x != -1 } else { x != 0 };
            if more {
                c |= 0x20;
            }
            out.push((c + 48) as u8 as char);
            if !more {
                break;
            }
        }
    }
    out
}

impl DetectionsFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::json(path, e))
    }

    /// Detections of `frame_index`, converted and checked against the frame
    /// size.
    pub fn detections_for(
        &self,
        frame_index: usize,
        width: usize,
        height: usize,
    ) -> Vec<Result<Detection, String>> {
        self.frames
            .iter()
            .filter(|f| f.frame_index == frame_index)
            .flat_map(|f| f.detections.iter())
            .map(|d| d.to_detection(frame_index, width, height))
            .collect()
    }

    /// Sorted, unique frame indices that carry at least one detection.
    pub fn frame_indices(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self
            .frames
            .iter()
            .filter(|f| !f.detections.is_empty())
            .map(|f| f.frame_index)
            .collect();
        v.sort_unstable();
        v.dedup();
        v
    }
}

impl DetectionEntry {
    pub fn to_detection(
        &self,
        frame_index: usize,
        width: usize,
        height: usize,
    ) -> Result<Detection, String> {
        let mask = self.mask_rle.as_ref().map(MaskRle::decode).transpose()?;
        let det = Detection {
            frame_index,
            bbox: self.bbox,
            confidence: self.confidence,
            category: self.category.clone(),
            mask,
        };
        det.validate(width, height).map_err(|e| e.to_string())?;
        Ok(det)
    }
}
