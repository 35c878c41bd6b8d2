//! Pipeline configuration: one JSON document, every field overridable by a
//! dotted command-line flag such as `--matcher.max-disparity 128`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use stereotrap_core::ctds::{KeyFunction, Scaling};
use stereotrap_core::flow::FlowParams;
use stereotrap_core::geometry::DEFAULT_MIN_DISPARITY;
use stereotrap_core::quality::PixelNormalization;
use stereotrap_core::sampler::{GmmParams, DEFAULT_BURN_IN, DEFAULT_THRESHOLD};
use stereotrap_core::stereo::StereoMatcher;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Shared rig calibration; an observation's own `calibration.json` wins.
    pub calibration: Option<PathBuf>,
    pub workers: Option<usize>,
    /// Frame rate for observations without metadata.
    pub default_fps: f64,
    pub matcher: StereoMatcher,
    pub flow: FlowParams,
    pub sampler: SamplerConfig,
    pub quality: QualityConfig,
    pub distances: DistanceConfig,
    pub ctds: CtdsConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            calibration: None,
            workers: None,
            default_fps: 30.0,
            matcher: StereoMatcher::default(),
            flow: FlowParams::default(),
            sampler: SamplerConfig::default(),
            quality: QualityConfig::default(),
            distances: DistanceConfig::default(),
            ctds: CtdsConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SamplerMode {
    #[default]
    Fixed,
    Adaptive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerConfig {
    pub mode: SamplerMode,
    /// Samples per second in fixed mode.
    pub rate: f64,
    /// Foreground-ratio accumulation threshold in adaptive mode.
    pub threshold: f64,
    pub burn_in: usize,
    pub gmm: GmmParams,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            mode: SamplerMode::Fixed,
            rate: 2.0,
            threshold: DEFAULT_THRESHOLD,
            burn_in: DEFAULT_BURN_IN,
            gmm: GmmParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QualityConfig {
    pub normalization: PixelNormalization,
    pub histogram_bins: usize,
    pub histogram_range: [f64; 2],
}

impl Default for QualityConfig {
    fn default() -> Self {
        Self {
            normalization: PixelNormalization::ValidOnly,
            histogram_bins: 20,
            histogram_range: [0.0, 2.0],
        }
    }
}

/// Which frames distances are extracted from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum FrameSelection {
    /// Frames in the observation's sample plan.
    #[default]
    Sampled,
    /// Every frame that has detections.
    All,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DistanceConfig {
    pub frames: FrameSelection,
    pub min_disparity: f64,
}

impl Default for DistanceConfig {
    fn default() -> Self {
        Self {
            frames: FrameSelection::Sampled,
            min_disparity: DEFAULT_MIN_DISPARITY,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CtdsConfig {
    /// `[w_l, w]` in metres.
    pub window: [f64; 2],
    pub bins: usize,
    pub adjustments: usize,
    pub key: KeyFunction,
    pub scaling: Scaling,
}

impl Default for CtdsConfig {
    fn default() -> Self {
        Self {
            window: [3.0, 11.0],
            bins: 7,
            adjustments: 1,
            key: KeyFunction::Uniform,
            scaling: Scaling::LeftTruncation,
        }
    }
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::json(path, e))
    }

    /// Applies `(dotted.key, value)` pairs. Dashes in keys map to
    /// underscores; values parse as JSON when they can, `a:b` becomes a
    /// two-element array, anything else is a string.
    pub fn with_overrides(&self, overrides: &[(String, String)]) -> Result<Self> {
        let mut doc = serde_json::to_value(self).map_err(|e| Error::Config(e.to_string()))?;
        for (key, raw) in overrides {
            let parts: Vec<String> = key.split('.').map(|p| p.replace('-', "_")).collect();
            let (last, parents) = parts.split_last().expect("split yields at least one part");
            let pointer: String = parents.iter().map(|p| format!("/{p}")).collect();
            let obj = doc
                .pointer_mut(&pointer)
                .and_then(Value::as_object_mut)
                .filter(|o| o.contains_key(last))
                .ok_or_else(|| Error::Config(format!("unknown setting `{key}`")))?;
            obj.insert(last.clone(), parse_value(raw));
        }
        serde_json::from_value(doc).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(path) = &self.calibration {
            if !path.is_file() {
                return Err(Error::Config(format!(
                    "calibration file {} does not exist",
                    path.display()
                )));
            }
        }
        let m = &self.matcher;
        if m.max_disparity == 0
            || m.p1 == 0
            || m.p2 < m.p1
            || !(3..=7).contains(&m.census_window)
            || m.census_window.is_multiple_of(2)
        {
            return Err(Error::Config("matcher parameters out of range".into()));
        }
        if !(self.default_fps > 0.0) {
            return Err(Error::Config("default_fps must be positive".into()));
        }
        let s = &self.sampler;
        if !(s.rate > 0.0 && s.threshold > 0.0) {
            return Err(Error::Config(
                "sampler rate and threshold must be positive".into(),
            ));
        }
        let [lo, hi] = self.ctds.window;
        if !(lo >= 0.0 && hi > lo) || self.ctds.bins == 0 {
            return Err(Error::Config(
                "ctds window must satisfy 0 <= w_l < w with at least one bin".into(),
            ));
        }
        let [hlo, hhi] = self.quality.histogram_range;
        if self.quality.histogram_bins == 0 || !(hhi > hlo) {
            return Err(Error::Config(
                "quality histogram needs bins and a non-empty range".into(),
            ));
        }
        if self.workers == Some(0) {
            return Err(Error::Config("workers must be at least 1".into()));
        }
        Ok(())
    }
}

fn parse_value(raw: &str) -> Value {
    if let Ok(v) = serde_json::from_str::<Value>(raw) {
        return v;
    }
    if let Some((a, b)) = raw.split_once(':') {
        if let (Ok(a), Ok(b)) = (a.trim().parse::<f64>(), b.trim().parse::<f64>()) {
            return serde_json::json!([a, b]);
        }
    }
    Value::String(raw.to_string())
}

/// Pulls `--dotted.flag value` and `--dotted.flag=value` pairs out of an
/// argument list, returning the remaining arguments and the overrides.
pub fn split_overrides(
    args: impl IntoIterator<Item = String>,
) -> (Vec<String>, Vec<(String, String)>) {
    let mut rest = Vec::new();
    let mut overrides = Vec::new();
    let mut iter = args.into_iter();
    while let Some(arg) = iter.next() {
        let dotted = arg
            .strip_prefix("--")
            .filter(|k| k.split('=').next().is_some_and(|k| k.contains('.')));
        match dotted {
            Some(k) => match k.split_once('=') {
                Some((k, v)) => overrides.push((k.to_string(), v.to_string())),
                None => {
                    let v = iter.next().unwrap_or_default();
                    overrides.push((k.to_string(), v));
                }
            },
            None => rest.push(arg),
        }
    }
    (rest, overrides)
}
