//! Single pipeline stages. The batch runner and the per-stage subcommands
//! both go through these, so intermediates written by one can be re-fed to
//! the next.

use std::path::Path;

use stereotrap_core::ctds::{
    bin_distances, fit_detection_function_with, gof_chi2, make_bins, BinnedDistances,
    DetectionFunctionFit, FitOptions, GoodnessOfFit,
};
use stereotrap_core::distance::{collect_distances, estimate_distance, DistanceRecord};
use stereotrap_core::geometry::{
    compute_rectification, depth_map, remap, CalibrationSet, RectificationMap, Side,
};
use stereotrap_core::ingest::split_sbs;
use stereotrap_core::raster::{DepthMap, DisparityMap, GrayImage};
use stereotrap_core::sampler::{accumulate_plan, fixed_rate_sample, GmmModel, SamplePlan};

use crate::config::{CtdsConfig, SamplerConfig, SamplerMode};
use crate::detections::DetectionsFile;
use crate::error::Result;
use crate::io::read_frame;

/// Loads a side-by-side frame and splits it into left and right views.
pub fn split_frame(path: &Path) -> Result<(GrayImage, GrayImage)> {
    Ok(split_sbs(&read_frame(path)?)?)
}

pub fn rectification(cal: &CalibrationSet) -> Result<RectificationMap> {
    Ok(compute_rectification(cal)?)
}

pub fn rectify_pair(
    map: &RectificationMap,
    left: &GrayImage,
    right: &GrayImage,
) -> Result<(GrayImage, GrayImage)> {
    Ok((
        remap(left, map, Side::Left)?,
        remap(right, map, Side::Right)?,
    ))
}

pub fn depth(disparity: &DisparityMap, map: &RectificationMap, min_disparity: f64) -> DepthMap {
    depth_map(disparity, map.rig(), min_disparity)
}

/// Foreground ratios of a frame sequence under the background model.
#[derive(Debug, Clone)]
pub struct ForegroundTracker {
    model: Option<GmmModel>,
    config: SamplerConfig,
    pub ratios: Vec<f64>,
}

impl ForegroundTracker {
    pub fn new(config: &SamplerConfig) -> Self {
        Self {
            model: None,
            config: config.clone(),
            ratios: Vec::new(),
        }
    }

    pub fn push(&mut self, frame: &GrayImage) -> Result<()> {
        let model = match &mut self.model {
            Some(m) => m,
            None => self.model.insert(GmmModel::new(
                frame.width(),
                frame.height(),
                self.config.gmm,
            )?),
        };
        self.ratios.push(model.update(frame)?.ratio);
        Ok(())
    }
}

/// Fixed-rate plan, or the accumulator over `ratios` in adaptive mode.
pub fn sample_plan(
    config: &SamplerConfig,
    n_frames: usize,
    fps: f64,
    ratios: &[f64],
) -> Result<SamplePlan> {
    Ok(match config.mode {
        SamplerMode::Fixed => fixed_rate_sample(n_frames, fps, config.rate)?,
        SamplerMode::Adaptive => accumulate_plan(ratios, config.threshold, config.burn_in)?,
    })
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SkippedDetection {
    pub frame_index: usize,
    pub reason: String,
}

/// Distance records for every detection of `frame_index`, in file order.
pub fn frame_distances(
    observation_id: &str,
    frame_index: usize,
    depth: &DepthMap,
    detections: &DetectionsFile,
) -> (Vec<DistanceRecord>, Vec<SkippedDetection>) {
    let mut records = Vec::new();
    let mut skipped = Vec::new();
    for det in detections.detections_for(frame_index, depth.width(), depth.height()) {
        let outcome = det.and_then(|d| estimate_distance(depth, &d).map_err(|e| e.to_string()));
        match outcome {
            Ok(e) => records.push(DistanceRecord::new(observation_id, frame_index, e)),
            Err(reason) => skipped.push(SkippedDetection {
                frame_index,
                reason,
            }),
        }
    }
    (records, skipped)
}

/// Binned survey data and, when it can be fitted, the detection function.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CtdsReport {
    pub window: [f64; 2],
    pub n_records: usize,
    pub discarded_left: usize,
    pub discarded_right: usize,
    pub bins: BinnedDistances,
    pub fit: Option<DetectionFunctionFit>,
    pub goodness_of_fit: Option<GoodnessOfFit>,
    pub error: Option<String>,
}

pub fn fit_survey(records: &[DistanceRecord], config: &CtdsConfig) -> Result<CtdsReport> {
    let [w_l, w] = config.window;
    let collected = collect_distances(records, w_l, w)?;
    let distances: Vec<f64> = collected.kept.iter().map(|r| r.distance).collect();
    let (bins, _) = bin_distances(&make_bins(w_l, w, config.bins)?, &distances);
    let opts = FitOptions {
        key: config.key,
        n_adjustments: config.adjustments,
        scaling: config.scaling,
    };
    let (fit, goodness_of_fit, error) = match fit_detection_function_with(&bins, &opts) {
        Ok(fit) => {
            let gof = gof_chi2(&bins, &fit)?;
            (Some(fit), Some(gof), None)
        }
        Err(e) => (None, None, Some(e.to_string())),
    };
    Ok(CtdsReport {
        window: config.window,
        n_records: records.len(),
        discarded_left: collected.discarded_left,
        discarded_right: collected.discarded_right,
        bins,
        fit,
        goodness_of_fit,
        error,
    })
}
