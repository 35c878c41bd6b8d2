use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};
#[allow(unused_imports)]
use crate::math::Float64Ext;

/// Pinhole intrinsics with four-coefficient radial-tangential distortion.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    #[cfg_attr(feature = "serde", serde(default))]
    pub k1: f64,
    #[cfg_attr(feature = "serde", serde(default))]
    pub k2: f64,
    #[cfg_attr(feature = "serde", serde(default))]
    pub p1: f64,
    #[cfg_attr(feature = "serde", serde(default))]
    pub p2: f64,
    pub width: usize,
    pub height: usize,
}

const UNDISTORT_MAX_ITERATIONS: usize = 20;
const UNDISTORT_TOLERANCE_PX: f64 = 1e-6;

impl Intrinsics {
    /// Distortion-free camera.
    pub fn pinhole(fx: f64, fy: f64, cx: f64, cy: f64, width: usize, height: usize) -> Self {
        Self {
            fx,
            fy,
            cx,
            cy,
            k1: 0.0,
            k2: 0.0,
            p1: 0.0,
            p2: 0.0,
            width,
            height,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.fx, self.fy, self.cx, self.cy, self.k1, self.k2, self.p1, self.p2,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidParameter("intrinsics must be finite"));
        }
        if !(self.fx > 0.0 && self.fy > 0.0) {
            return Err(Error::InvalidParameter("focal lengths must be positive"));
        }
        if !(self.cx >= 0.0
            && self.cx < self.width as f64
            && self.cy >= 0.0
            && self.cy < self.height as f64)
        {
            return Err(Error::InvalidParameter(
                "principal point must lie inside the sensor",
            ));
        }
        Ok(())
    }

    pub fn is_distortion_free(&self) -> bool {
        self.k1 == 0.0 && self.k2 == 0.0 && self.p1 == 0.0 && self.p2 == 0.0
    }

    pub fn camera_matrix(&self) -> Matrix3<f64> {
        Matrix3::new(self.fx, 0.0, self.cx, 0.0, self.fy, self.cy, 0.0, 0.0, 1.0)
    }

    /// Applies the distortion model to normalized image coordinates.
    pub fn distort_normalized(&self, x: f64, y: f64) -> (f64, f64) {
        let r2 = x * x + y * y;
        let radial = 1.0 + self.k1 * r2 + self.k2 * r2 * r2;
        let xd = x * radial + 2.0 * self.p1 * x * y + self.p2 * (r2 + 2.0 * x * x);
        let yd = y * radial + self.p1 * (r2 + 2.0 * y * y) + 2.0 * self.p2 * x * y;
        (xd, yd)
    }

    fn distortion_jacobian(&self, x: f64, y: f64) -> [[f64; 2]; 2] {
        let r2 = x * x + y * y;
        let radial = 1.0 + self.k1 * r2 + self.k2 * r2 * r2;
        let dradial = self.k1 + 2.0 * self.k2 * r2; // d(radial)/d(r2)
        [
            [
                radial + 2.0 * x * x * dradial + 2.0 * self.p1 * y + 6.0 * self.p2 * x,
                2.0 * x * y * dradial + 2.0 * self.p1 * x + 2.0 * self.p2 * y,
            ],
            [
                2.0 * x * y * dradial + 2.0 * self.p1 * x + 2.0 * self.p2 * y,
                radial + 2.0 * y * y * dradial + 6.0 * self.p1 * y + 2.0 * self.p2 * x,
            ],
        ]
    }

    /// Maps an ideal pixel to where the lens actually images it.
    pub fn distort_point(&self, p: [f64; 2]) -> [f64; 2] {
        let x = (p[0] - self.cx) / self.fx;
        let y = (p[1] - self.cy) / self.fy;
        let (xd, yd) = self.distort_normalized(x, y);
        [self.fx * xd + self.cx, self.fy * yd + self.cy]
    }

    /// Inverts the distortion model for a pixel, returning normalized
    /// (distortion-free) camera coordinates. Newton iterations on the 2x2
    /// system, residual measured in pixels.
    pub fn undistort_normalized(&self, p: [f64; 2]) -> Result<[f64; 2]> {
        let xd = (p[0] - self.cx) / self.fx;
        let yd = (p[1] - self.cy) / self.fy;
        if self.is_distortion_free() {
            return Ok([xd, yd]);
        }
        let (mut x, mut y) = (xd, yd);
        let mut residual = f64::INFINITY;
        for _ in 0..UNDISTORT_MAX_ITERATIONS {
            let (ex, ey) = {
                let (dx, dy) = self.distort_normalized(x, y);
                (dx - xd, dy - yd)
            };
            residual = (ex * self.fx).abs().max((ey * self.fy).abs());
            if residual < 1e-3 * UNDISTORT_TOLERANCE_PX {
                break;
            }
            let j = self.distortion_jacobian(x, y);
            let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
            if det.abs() < 1e-300 || !det.is_finite() {
                break;
            }
            x -= (j[1][1] * ex - j[0][1] * ey) / det;
            y -= (-j[1][0] * ex + j[0][0] * ey) / det;
        }
        if !(residual.is_finite() && residual < UNDISTORT_TOLERANCE_PX) {
            // one last evaluation in case the loop exited right after a step
            let (dx, dy) = self.distort_normalized(x, y);
            residual = ((dx - xd) * self.fx).abs().max(((dy - yd) * self.fy).abs());
            if !(residual.is_finite() && residual < UNDISTORT_TOLERANCE_PX) {
                return Err(Error::NonConvergence {
                    residual_px: residual,
                });
            }
        }
        Ok([x, y])
    }

    /// Removes lens distortion from a pixel coordinate, keeping this camera's
    /// focal lengths and principal point.
    pub fn undistort_point(&self, p: [f64; 2]) -> Result<[f64; 2]> {
        let [x, y] = self.undistort_normalized(p)?;
        Ok([self.fx * x + self.cx, self.fy * y + self.cy])
    }

    /// Projects a point in camera coordinates (meters) to a distorted pixel.
    /// `None` for points at or behind the camera plane.
    pub fn project(&self, point: &Vector3<f64>) -> Option<[f64; 2]> {
        if point.z <= 0.0 {
            return None;
        }
        let (xd, yd) = self.distort_normalized(point.x / point.z, point.y / point.z);
        Some([self.fx * xd + self.cx, self.fy * yd + self.cy])
    }
}

/// Undistorts a single pixel. See [`Intrinsics::undistort_point`].
pub fn undistort_point(p: [f64; 2], intr: &Intrinsics) -> Result<[f64; 2]> {
    intr.undistort_point(p)
}
