use alloc::vec::Vec;

use nalgebra::{Matrix3, Rotation3, Unit, Vector3};

use super::CalibrationSet;
use crate::error::{Error, Result};
#[allow(unused_imports)]
use crate::math::Float64Ext;
use crate::raster::{GrayImage, Raster};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

/// Shared pinhole model of the rectified pair. Both views use the same focal
/// length and principal point; the right camera sits `baseline` meters along
/// +x of the left one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RectifiedRig {
    pub fx: f64,
    pub cx: f64,
    pub cy: f64,
    pub baseline: f64,
    pub width: usize,
    pub height: usize,
}

/// Per-pixel source coordinates for both rectified views plus the geometry
/// they were derived from.
#[derive(Debug, Clone)]
pub struct RectificationMap {
    rig: RectifiedRig,
    calibration: CalibrationSet,
    left_rotation: Matrix3<f64>,
    right_rotation: Matrix3<f64>,
    // source (x, y) per rectified pixel, NaN when the source is outside the image
    left_map: Vec<[f32; 2]>,
    right_map: Vec<[f32; 2]>,
}

/// Rotations taking each original camera frame into the common rectified
/// frame, plus the shared rectified intrinsics.
fn rectifying_geometry(cal: &CalibrationSet) -> Result<(Matrix3<f64>, Matrix3<f64>, RectifiedRig)> {
    cal.validate()?;
    let baseline = cal.stereo.baseline();
    if baseline < 1e-9 {
        return Err(Error::DegenerateGeometry("baseline is zero"));
    }
    // split the relative rotation evenly between both views
    let relative = Rotation3::from_matrix_unchecked(cal.stereo.rotation);
    let half_back = Rotation3::from_scaled_axis(-relative.scaled_axis() * 0.5);
    let t = half_back * cal.stereo.translation;
    let dir = t / t.norm();
    // the right camera must sit to the right of the left one, close to the
    // horizontal axis after the half rotation
    if dir.x > -0.5 {
        return Err(Error::DegenerateGeometry(
            "baseline is not predominantly horizontal with the right camera on the right",
        ));
    }
    let target = Vector3::new(-1.0, 0.0, 0.0);
    let axis = dir.cross(&target);
    let align = if axis.norm() < 1e-15 {
        Rotation3::identity()
    } else {
        let angle = dir.dot(&target).clamp(-1.0, 1.0).acos();
        Rotation3::from_axis_angle(&Unit::new_normalize(axis), angle)
    };
    let right_rot = (align * half_back).into_inner();
    let left_rot = (align * half_back.inverse()).into_inner();

    let fx = [cal.left.fx, cal.left.fy, cal.right.fx, cal.right.fy]
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    // keep each camera's principal ray near where its principal point was
    let mut cx = 0.0;
    let mut cy = 0.0;
    for (rot, intr) in [(&left_rot, &cal.left), (&right_rot, &cal.right)] {
        let ray = rot * Vector3::new(0.0, 0.0, 1.0);
        if ray.z <= 1e-6 {
            return Err(Error::DegenerateGeometry(
                "rectification turns the optical axis away",
            ));
        }
        cx += 0.5 * (intr.cx - fx * ray.x / ray.z);
        cy += 0.5 * (intr.cy - fx * ray.y / ray.z);
    }
    let rig = RectifiedRig {
        fx,
        cx,
        cy,
        baseline,
        width: cal.width(),
        height: cal.height(),
    };
    Ok((left_rot, right_rot, rig))
}

impl RectifiedRig {
    /// Rectified pinhole model without building the pixel maps.
    pub fn from_calibration(cal: &CalibrationSet) -> Result<Self> {
        rectifying_geometry(cal).map(|(_, _, rig)| rig)
    }
}

/// Builds the rectification for a calibrated rig: both views are rotated so
/// epipolar lines become image rows and share one set of intrinsics.
pub fn compute_rectification(cal: &CalibrationSet) -> Result<RectificationMap> {
    let (left_rotation, right_rotation, rig) = rectifying_geometry(cal)?;
    let mut map = RectificationMap {
        rig,
        calibration: *cal,
        left_rotation,
        right_rotation,
        left_map: Vec::new(),
        right_map: Vec::new(),
    };
    map.left_map = map.build_map(Side::Left);
    map.right_map = map.build_map(Side::Right);
    Ok(map)
}

impl RectificationMap {
    pub fn rig(&self) -> &RectifiedRig {
        &self.rig
    }

    pub fn rectified_fx(&self) -> f64 {
        self.rig.fx
    }

    pub fn rectified_baseline(&self) -> f64 {
        self.rig.baseline
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.rig.width, self.rig.height)
    }

    pub fn calibration(&self) -> &CalibrationSet {
        &self.calibration
    }

    /// Rotation from the original camera frame of `side` to the rectified frame.
    pub fn rotation(&self, side: Side) -> &Matrix3<f64> {
        match side {
            Side::Left => &self.left_rotation,
            Side::Right => &self.right_rotation,
        }
    }

    /// Source coordinate for rectified pixel `(x, y)`, `None` when it falls
    /// outside the source image.
    pub fn source(&self, side: Side, x: usize, y: usize) -> Option<[f32; 2]> {
        let m = match side {
            Side::Left => &self.left_map,
            Side::Right => &self.right_map,
        };
        let s = m[y * self.rig.width + x];
        if s[0].is_nan() {
            None
        } else {
            Some(s)
        }
    }

    /// Exact source coordinate of an arbitrary rectified position.
    pub fn unrectify_point(&self, side: Side, p: [f64; 2]) -> Option<[f64; 2]> {
        let intr = match side {
            Side::Left => &self.calibration.left,
            Side::Right => &self.calibration.right,
        };
        let ray = Vector3::new(
            (p[0] - self.rig.cx) / self.rig.fx,
            (p[1] - self.rig.cy) / self.rig.fx,
            1.0,
        );
        let cam = self.rotation(side).transpose() * ray;
        intr.project(&cam)
    }

    /// Rectified position of a pixel observed in the original `side` image.
    pub fn rectify_point(&self, side: Side, p: [f64; 2]) -> Result<[f64; 2]> {
        let intr = match side {
            Side::Left => &self.calibration.left,
            Side::Right => &self.calibration.right,
        };
        let [x, y] = intr.undistort_normalized(p)?;
        let r = self.rotation(side) * Vector3::new(x, y, 1.0);
        if r.z <= 0.0 {
            return Err(Error::DegenerateGeometry(
                "point maps behind the rectified camera",
            ));
        }
        Ok([
            self.rig.fx * r.x / r.z + self.rig.cx,
            self.rig.fx * r.y / r.z + self.rig.cy,
        ])
    }

    fn build_map(&self, side: Side) -> Vec<[f32; 2]> {
        let (w, h) = self.dims();
        let max_x = (w - 1) as f64;
        let max_y = (h - 1) as f64;
        let mut out = Vec::with_capacity(w * h);
        for y in 0..h {
            for x in 0..w {
                let entry = match self.unrectify_point(side, [x as f64, y as f64]) {
                    Some([sx, sy]) if sx >= 0.0 && sy >= 0.0 && sx <= max_x && sy <= max_y => {
                        [sx as f32, sy as f32]
                    }
                    _ => [f32::NAN, f32::NAN],
                };
                out.push(entry);
            }
        }
        out
    }
}

/// Resamples one view into the rectified frame with bilinear interpolation.
pub fn remap(img: &GrayImage, map: &RectificationMap, side: Side) -> Result<GrayImage> {
    if img.dims() != map.dims() {
        return Err(Error::DimensionMismatch {
            expected: map.dims(),
            actual: img.dims(),
        });
    }
    let (w, h) = map.dims();
    Ok(Raster::from_fn(w, h, |x, y| {
        let [sx, sy] = map.source(side, x, y)?;
        img.sample_bilinear(sx as f64, sy as f64).map(|v| v as f32)
    }))
}
