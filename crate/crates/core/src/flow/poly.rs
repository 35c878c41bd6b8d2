//! Local quadratic fits `f(x0 + p) ~ p^T A p + b^T p + c` with Gaussian
//! applicability.

use alloc::vec::Vec;

use nalgebra::{SMatrix, SVector};

#[allow(unused_imports)]
use crate::math::Float64Ext;

/// Per-pixel polynomial coefficients `[b_x, b_y, a_xx, a_yy, a_xy]`, where
/// `A = [[a_xx, a_xy], [a_xy, a_yy]]`.
pub(crate) struct PolyField {
    pub width: usize,
    pub height: usize,
    pub coeffs: Vec<[f64; 5]>,
}

impl PolyField {
    /// Bilinear lookup with clamped coordinates.
    pub fn sample(&self, x: f64, y: f64) -> [f64; 5] {
        let x = x.clamp(0.0, (self.width - 1) as f64);
        let y = y.clamp(0.0, (self.height - 1) as f64);
        let x0 = x.floor() as usize;
        let y0 = y.floor() as usize;
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let fx = x - x0 as f64;
        let fy = y - y0 as f64;
        let mut out = [0.0; 5];
        for (xx, yy, w) in [
            (x0, y0, (1.0 - fx) * (1.0 - fy)),
            (x1, y0, fx * (1.0 - fy)),
            (x0, y1, (1.0 - fx) * fy),
            (x1, y1, fx * fy),
        ] {
            let c = &self.coeffs[yy * self.width + xx];
            for k in 0..5 {
                out[k] += w * c[k];
            }
        }
        out
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize) -> &[f64; 5] {
        &self.coeffs[y * self.width + x]
    }
}

/// Weighted least-squares filters: coefficient `k` of the fit at a pixel is
/// `sum_offsets filters[offset][k] * f(pixel + offset)`.
pub(crate) struct PolyFilters {
    radius: isize,
    filters: Vec<[f64; 6]>,
}

impl PolyFilters {
    pub fn new(window: usize, sigma: f64) -> Self {
        let radius = (window / 2) as isize;
        let mut gram = SMatrix::<f64, 6, 6>::zeros();
        let mut rows = Vec::new();
        for dy in -radius..=radius {
            for dx in -radius..=radius {
                let (x, y) = (dx as f64, dy as f64);
                let a = (-(x * x + y * y) / (2.0 * sigma * sigma)).exp();
                let phi = SVector::<f64, 6>::from([1.0, x, y, x * x, y * y, x * y]);
                gram += phi * phi.transpose() * a;
                rows.push((phi, a));
            }
        }
        let inv = gram
            .try_inverse()
            .expect("polynomial basis is well posed for window >= 3");
        let filters = rows
            .into_iter()
            .map(|(phi, a)| {
                let h = inv * phi * a;
                [h[0], h[1], h[2], h[3], h[4], h[5]]
            })
            .collect();
        Self { radius, filters }
    }

    pub fn expand(&self, img: &[f64], width: usize, height: usize) -> PolyField {
        let r = self.radius;
        let mut coeffs = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                let mut acc = [0.0f64; 6];
                let mut k = 0;
                for dy in -r..=r {
                    let yy = (y as isize + dy).clamp(0, height as isize - 1) as usize;
                    for dx in -r..=r {
                        let xx = (x as isize + dx).clamp(0, width as isize - 1) as usize;
                        let v = img[yy * width + xx];
                        let f = &self.filters[k];
                        for j in 0..6 {
                            acc[j] += f[j] * v;
                        }
                        k += 1;
                    }
                }
                // basis order [1, x, y, x^2, y^2, xy]
                coeffs.push([acc[1], acc[2], acc[3], acc[4], acc[5] * 0.5]);
            }
        }
        PolyField {
            width,
            height,
            coeffs,
        }
    }
}
