//! Camera models, stereo rectification, disparity-to-depth conversion and
//! relative pose estimation from point correspondences.

mod camera;
mod depth;
mod essential;
mod rectify;

pub use camera::{undistort_point, Intrinsics};
pub use depth::{depth_from_disparity, depth_map, disparity_to_depth, DEFAULT_MIN_DISPARITY};
pub use essential::{estimate_essential_8pt, Correspondence, EssentialEstimate};
pub use rectify::{compute_rectification, remap, RectificationMap, RectifiedRig, Side};

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};

/// Pose of the right camera relative to the left: `X_right = R * X_left + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Extrinsics {
    pub rotation: Matrix3<f64>,
    /// Meters.
    pub translation: Vector3<f64>,
}

impl Extrinsics {
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self> {
        let e = Self {
            rotation,
            translation,
        };
        e.validate()?;
        Ok(e)
    }

    pub fn validate(&self) -> Result<()> {
        let r = &self.rotation;
        if !(r.iter().all(|v| v.is_finite()) && self.translation.iter().all(|v| v.is_finite())) {
            return Err(Error::InvalidParameter("extrinsics must be finite"));
        }
        if (r.transpose() * r - Matrix3::identity()).amax() > 1e-9
            || (r.determinant() - 1.0).abs() > 1e-9
        {
            return Err(Error::InvalidParameter(
                "rotation is not orthonormal with determinant 1",
            ));
        }
        if self.translation.norm() <= 0.0 {
            return Err(Error::InvalidParameter("translation must be non-zero"));
        }
        Ok(())
    }

    /// Distance between the two camera centers.
    pub fn baseline(&self) -> f64 {
        self.translation.norm()
    }
}

/// Full calibration of a stereo rig.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationSet {
    pub left: Intrinsics,
    pub right: Intrinsics,
    pub stereo: Extrinsics,
}

impl CalibrationSet {
    pub fn validate(&self) -> Result<()> {
        self.left.validate()?;
        self.right.validate()?;
        self.stereo.validate()?;
        if self.left.width != self.right.width || self.left.height != self.right.height {
            return Err(Error::InvalidParameter(
                "left and right sensors differ in resolution",
            ));
        }
        Ok(())
    }

    pub fn width(&self) -> usize {
        self.left.width
    }

    pub fn height(&self) -> usize {
        self.left.height
    }
}
