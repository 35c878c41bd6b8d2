//! Observation store layout:
//!
//! ```text
//! root/
//!   <observation_id>/
//!     *.png | *.pgm | *.ppm   side-by-side frames, lexicographic order
//!     meta.json               optional {fps, capture_timestamp, camera_id}
//!     detections.json         optional detector output
//!     calibration.json        optional per-observation calibration
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const FRAME_EXTENSIONS: [&str; 4] = ["png", "pgm", "ppm", "pfm"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct ObservationMeta {
    pub fps: Option<f64>,
    pub capture_timestamp: Option<String>,
    pub camera_id: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub id: String,
    pub dir: PathBuf,
    pub frames: Vec<PathBuf>,
}

impl Observation {
    pub fn meta(&self) -> Result<ObservationMeta> {
        let path = self.dir.join("meta.json");
        if !path.exists() {
            return Ok(ObservationMeta::default());
        }
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::json(&path, e))
    }

    pub fn detections_path(&self) -> Option<PathBuf> {
        Some(self.dir.join("detections.json")).filter(|p| p.is_file())
    }

    pub fn calibration_path(&self) -> Option<PathBuf> {
        Some(self.dir.join("calibration.json")).filter(|p| p.is_file())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObservationStore {
    pub root: PathBuf,
    /// Sorted by id.
    pub observations: Vec<Observation>,
}

/// Frame files of `dir` in lexicographic order.
pub fn list_frames(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut frames = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let is_frame = path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| FRAME_EXTENSIONS.iter().any(|f| e.eq_ignore_ascii_case(f)));
        if path.is_file() && is_frame {
            frames.push(path);
        }
    }
    frames.sort();
    Ok(frames)
}

impl ObservationStore {
    pub fn open(root: &Path) -> Result<Self> {
        let mut observations = Vec::new();
        for entry in std::fs::read_dir(root).map_err(|e| Error::io(root, e))? {
            let dir = entry.map_err(|e| Error::io(root, e))?.path();
            if !dir.is_dir() {
                continue;
            }
            let id = dir
                .file_name()
                .and_then(|n| n.to_str())
                .ok_or_else(|| Error::format(&dir, "observation directory name is not UTF-8"))?
                .to_string();
            let frames = list_frames(&dir)?;
            observations.push(Observation { id, dir, frames });
        }
        observations.sort_by(|a, b| a.id.cmp(&b.id));
        Ok(Self {
            root: root.to_path_buf(),
            observations,
        })
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }
}
