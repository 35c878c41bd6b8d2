//! Stereo calibration as JSON:
//! `{left, right, rotation: [9, row-major], translation_m: [3]}`.

use std::path::Path;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use stereotrap_core::geometry::{CalibrationSet, Extrinsics, Intrinsics};

use crate::error::{Error, Result};
use crate::io::write_atomic;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationFile {
    pub left: Intrinsics,
    pub right: Intrinsics,
    /// Right camera rotation relative to the left, row-major.
    pub rotation: [f64; 9],
    pub translation_m: [f64; 3],
}

impl CalibrationFile {
    pub fn to_calibration(&self) -> Result<CalibrationSet> {
        let cal = CalibrationSet {
            left: self.left,
            right: self.right,
            stereo: Extrinsics {
                rotation: Matrix3::from_row_slice(&self.rotation),
                translation: Vector3::from_column_slice(&self.translation_m),
            },
        };
        cal.validate()?;
        Ok(cal)
    }
}

impl From<&CalibrationSet> for CalibrationFile {
    fn from(cal: &CalibrationSet) -> Self {
        let r = &cal.stereo.rotation;
        let t = &cal.stereo.translation;
        Self {
            left: cal.left,
            right: cal.right,
            rotation: std::array::from_fn(|i| r[(i / 3, i % 3)]),
            translation_m: [t.x, t.y, t.z],
        }
    }
}

pub fn load_calibration(path: &Path) -> Result<CalibrationSet> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let file: CalibrationFile = serde_json::from_str(&text).map_err(|e| Error::json(path, e))?;
    file.to_calibration()
}

pub fn save_calibration(path: &Path, cal: &CalibrationSet) -> Result<()> {
    let text = serde_json::to_string_pretty(&CalibrationFile::from(cal))
        .map_err(|e| Error::json(path, e))?;
    write_atomic(path, text.as_bytes())
}
