//! Batch processing of an observation store.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use stereotrap_core::distance::DistanceRecord;
use stereotrap_core::flow::estimate_flow_with;
use stereotrap_core::geometry::CalibrationSet;
use stereotrap_core::quality::{error_histogram, TemporalErrorAccumulator, TemporalErrorReport};
use stereotrap_core::raster::{DepthMap, DisparityMap, GrayImage};
use stereotrap_core::sampler::SamplePlan;

use crate::calibration::load_calibration;
use crate::config::{FrameSelection, PipelineConfig, SamplerMode};
use crate::detections::DetectionsFile;
use crate::error::{Error, Result};
use crate::report::{
    detection_probability_svg, write_distances_csv, write_histogram_csv, write_json, SamplePlanFile,
};
use crate::stages::{
    depth, fit_survey, frame_distances, rectification, rectify_pair, sample_plan, split_frame,
    CtdsReport, ForegroundTracker, SkippedDetection,
};
use crate::store::{Observation, ObservationStore};

#[derive(Debug, Clone, PartialEq)]
pub struct ObservationResult {
    pub id: String,
    pub n_frames: usize,
    pub temporal_error: std::result::Result<TemporalErrorReport, String>,
    pub plan: SamplePlan,
    pub records: Vec<DistanceRecord>,
    pub skipped: Vec<SkippedDetection>,
}

/// Runs every stage over one observation. Frames stream through; only the
/// previous frame and the depth maps of frames with detections are kept.
pub fn process_observation(
    obs: &Observation,
    config: &PipelineConfig,
    shared_calibration: Option<&CalibrationSet>,
) -> Result<ObservationResult> {
    if obs.frames.is_empty() {
        return Err(Error::format(&obs.dir, "observation has no frames"));
    }
    let fps = obs.meta()?.fps.unwrap_or(config.default_fps);
    let calibration = match obs.calibration_path() {
        Some(p) => load_calibration(&p)?,
        None => *shared_calibration
            .ok_or_else(|| Error::Config(format!("no calibration for observation {}", obs.id)))?,
    };
    let map = rectification(&calibration)?;
    let detections = obs
        .detections_path()
        .map(|p| DetectionsFile::load(&p))
        .transpose()?;
    let wanted: BTreeSet<usize> = detections
        .as_ref()
        .map(|d| d.frame_indices())
        .unwrap_or_default()
        .into_iter()
        .collect();

    let mut depths: BTreeMap<usize, DepthMap> = BTreeMap::new();
    let mut temporal = TemporalErrorAccumulator::new();
    let mut foreground = ForegroundTracker::new(&config.sampler);
    let mut previous: Option<(GrayImage, DisparityMap)> = None;
    for (n, path) in obs.frames.iter().enumerate() {
        let (l, r) = split_frame(path)?;
        let (l, r) = rectify_pair(&map, &l, &r)?;
        let disparity = config.matcher.compute(&l, &r)?;
        if wanted.contains(&n) {
            depths.insert(n, depth(&disparity, &map, config.distances.min_disparity));
        }
        if let Some((prev_l, prev_d)) = &previous {
            let flow = estimate_flow_with(&l, prev_l, &config.flow)?;
            temporal.push(prev_d.raster(), disparity.raster(), &flow)?;
        }
        if config.sampler.mode == SamplerMode::Adaptive {
            foreground.push(&l)?;
        }
        previous = Some((l, disparity));
    }

    let temporal_error = if temporal.pairs() == 0 {
        Err("fewer than two frames".to_string())
    } else {
        temporal
            .finish(config.quality.normalization)
            .map_err(|e| e.to_string())
    };
    let plan = sample_plan(&config.sampler, obs.frames.len(), fps, &foreground.ratios)?;

    let mut records = Vec::new();
    let mut skipped = Vec::new();
    if let Some(dets) = &detections {
        let sampled: BTreeSet<usize> = plan.indices.iter().copied().collect();
        for (n, d) in &depths {
            if config.distances.frames == FrameSelection::Sampled && !sampled.contains(n) {
                continue;
            }
            let (r, s) = frame_distances(&obs.id, *n, d, dets);
            records.extend(r);
            skipped.extend(s);
        }
        for n in dets
            .frame_indices()
            .into_iter()
            .filter(|n| *n >= obs.frames.len())
        {
            skipped.push(SkippedDetection {
                frame_index: n,
                reason: "frame index beyond the observation".into(),
            });
        }
    }
    Ok(ObservationResult {
        id: obs.id.clone(),
        n_frames: obs.frames.len(),
        temporal_error,
        plan,
        records,
        skipped,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailedObservation {
    pub observation_id: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationSummary {
    pub observation_id: String,
    pub n_frames: usize,
    pub sampled_frames: usize,
    pub distance_records: usize,
    pub skipped_detections: Vec<SkippedDetection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub observations: usize,
    pub succeeded: Vec<ObservationSummary>,
    pub failed: Vec<FailedObservation>,
    pub distance_records: usize,
    pub ctds_p_hat: Option<f64>,
    pub ctds_error: Option<String>,
    pub config: PipelineConfig,
}

impl RunReport {
    /// A run fails only when there was work and none of it succeeded.
    pub fn is_success(&self) -> bool {
        self.observations == 0 || !self.succeeded.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemporalErrorEntry {
    pub observation_id: String,
    #[serde(flatten)]
    pub report: Option<TemporalErrorReport>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemporalErrorDocument {
    pub normalization: stereotrap_core::quality::PixelNormalization,
    pub observations: Vec<TemporalErrorEntry>,
}

/// Processes every observation and writes the survey outputs to `output`:
/// `distances.csv`, `e_t_report.json`, `e_t_histogram.csv`,
/// `sample_plans/<id>.json`, `ctds_fit.json`, `detection_probability.svg`
/// and `run_report.json`.
pub fn run_pipeline(
    config: &PipelineConfig,
    store: &ObservationStore,
    output: &Path,
) -> Result<RunReport> {
    config.validate()?;
    let shared = config
        .calibration
        .as_deref()
        .map(load_calibration)
        .transpose()?;
    if store.is_empty() {
        warn!("observation store {} is empty", store.root.display());
    }

    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = config.workers {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| Error::Config(e.to_string()))?;
    let results: Vec<(String, Result<ObservationResult>)> = pool.install(|| {
        store
            .observations
            .par_iter()
            .map(|obs| {
                info!("processing {}", obs.id);
                (
                    obs.id.clone(),
                    process_observation(obs, config, shared.as_ref()),
                )
            })
            .collect()
    });

    let mut succeeded = Vec::new();
    let mut failed = Vec::new();
    let mut records = Vec::new();
    let mut temporal_entries = Vec::new();
    let mut temporal_reports = Vec::new();
    for (id, result) in results {
        match result {
            Ok(r) => {
                write_json(
                    &output.join("sample_plans").join(format!("{id}.json")),
                    &SamplePlanFile::new(&id, &r.plan),
                )?;
                let (report, error) = match r.temporal_error {
                    Ok(t) => {
                        temporal_reports.push(t.clone());
                        (Some(t), None)
                    }
                    Err(e) => (None, Some(e)),
                };
                temporal_entries.push(TemporalErrorEntry {
                    observation_id: id.clone(),
                    report,
                    error,
                });
                for s in &r.skipped {
                    warn!(
                        "{id}: skipped detection in frame {}: {}",
                        s.frame_index, s.reason
                    );
                }
                succeeded.push(ObservationSummary {
                    observation_id: id,
                    n_frames: r.n_frames,
                    sampled_frames: r.plan.indices.len(),
                    distance_records: r.records.len(),
                    skipped_detections: r.skipped,
                });
                records.extend(r.records);
            }
            Err(e) => {
                warn!("{id}: skipped: {e}");
                failed.push(FailedObservation {
                    observation_id: id,
                    error: e.to_string(),
                });
            }
        }
    }

    write_distances_csv(&output.join("distances.csv"), &records)?;
    write_json(
        &output.join("e_t_report.json"),
        &TemporalErrorDocument {
            normalization: config.quality.normalization,
            observations: temporal_entries,
        },
    )?;
    let [lo, hi] = config.quality.histogram_range;
    write_histogram_csv(
        &output.join("e_t_histogram.csv"),
        &error_histogram(&temporal_reports, config.quality.histogram_bins, lo, hi)?,
    )?;
    let ctds: CtdsReport = fit_survey(&records, &config.ctds)?;
    if let Some(e) = &ctds.error {
        warn!("detection function not fitted: {e}");
    }
    write_json(&output.join("ctds_fit.json"), &ctds)?;
    crate::io::write_atomic(
        &output.join("detection_probability.svg"),
        detection_probability_svg(&ctds).as_bytes(),
    )?;

    let report = RunReport {
        observations: store.observations.len(),
        succeeded,
        failed,
        distance_records: records.len(),
        ctds_p_hat: ctds.fit.as_ref().map(|f| f.p_hat),
        ctds_error: ctds.error.clone(),
        config: config.clone(),
    };
    write_json(&output.join("run_report.json"), &report)?;
    Ok(report)
}
