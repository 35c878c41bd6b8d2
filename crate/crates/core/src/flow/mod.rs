//! Dense optical flow by polynomial expansion (Farnebäck), coarse to fine.

mod poly;

use alloc::vec;
use alloc::vec::Vec;

use poly::{PolyField, PolyFilters};

use crate::error::{Error, Result};
#[allow(unused_imports)]
use crate::math::Float64Ext;
use crate::raster::{GrayImage, Raster};

/// Per-pixel motion `(m_x, m_y)` in pixels, defined on the current frame:
/// `prev(x - m_x, y - m_y) ~ curr(x, y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowField {
    width: usize,
    height: usize,
    vectors: Vec<[f32; 2]>,
    valid: Vec<bool>,
}

impl FlowField {
    /// Same vector everywhere, all valid.
    pub fn constant(width: usize, height: usize, m: [f32; 2]) -> Self {
        Self {
            width,
            height,
            vectors: vec![m; width * height],
            valid: vec![true; width * height],
        }
    }

    pub fn zero(width: usize, height: usize) -> Self {
        Self::constant(width, height, [0.0, 0.0])
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> Option<[f32; 2]>,
    ) -> Self {
        let mut vectors = Vec::with_capacity(width * height);
        let mut valid = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                match f(x, y) {
                    Some(m) if m[0].is_finite() && m[1].is_finite() => {
                        vectors.push(m);
                        valid.push(true);
                    }
                    _ => {
                        vectors.push([0.0, 0.0]);
                        valid.push(false);
                    }
                }
            }
        }
        Self {
            width,
            height,
            vectors,
            valid,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> Option<[f32; 2]> {
        let i = y * self.width + x;
        self.valid[i].then_some(self.vectors[i])
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|v| **v).count()
    }
}

/// Flow estimation settings. Defaults: 3 pyramid levels at scale 0.5,
/// 5x5 polynomial window, 3 iterations per level.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct FlowParams {
    pub levels: usize,
    pub pyramid_scale: f64,
    pub poly_window: usize,
    pub poly_sigma: f64,
    pub iterations: usize,
    /// Side of the Gaussian window that pools the displacement constraints.
    pub window: usize,
}

impl Default for FlowParams {
    fn default() -> Self {
        Self {
            levels: 3,
            pyramid_scale: 0.5,
            poly_window: 5,
            poly_sigma: 1.1,
            iterations: 3,
            window: 15,
        }
    }
}

impl FlowParams {
    fn validate(&self) -> Result<()> {
        if self.levels == 0 || self.iterations == 0 {
            return Err(Error::InvalidParameter(
                "flow needs at least one level and iteration",
            ));
        }
        if self.pyramid_scale != 0.5 {
            return Err(Error::InvalidParameter(
                "only a pyramid scale of 0.5 is supported",
            ));
        }
        if self.poly_window < 3 || self.poly_window.is_multiple_of(2) || !(self.poly_sigma > 0.0) {
            return Err(Error::InvalidParameter(
                "polynomial window must be odd and >= 3",
            ));
        }
        if self.window == 0 || self.window.is_multiple_of(2) {
            return Err(Error::InvalidParameter("flow window must be odd"));
        }
        Ok(())
    }
}

struct Plane {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl Plane {
    fn from_image(img: &GrayImage) -> Self {
        let data = img
            .data()
            .iter()
            .zip(img.valid_mask())
            .map(|(v, ok)| if *ok { *v as f64 } else { 0.0 })
            .collect();
        Self {
            width: img.width(),
            height: img.height(),
            data,
        }
    }

    /// Binomial 5-tap blur followed by 2x decimation.
    fn pyr_down(&self) -> Self {
        const K: [f64; 5] = [1.0 / 16.0, 4.0 / 16.0, 6.0 / 16.0, 4.0 / 16.0, 1.0 / 16.0];
        let blurred = separable(&self.data, self.width, self.height, &K);
        let w = self.width.div_ceil(2);
        let h = self.height.div_ceil(2);
        let mut data = Vec::with_capacity(w * h);
        for y in 0..h {
            for x in 0..w {
                data.push(blurred[(2 * y) * self.width + 2 * x]);
            }
        }
        Self {
            width: w,
            height: h,
            data,
        }
    }
}

/// Separable convolution with clamped borders.
fn separable(data: &[f64], w: usize, h: usize, kernel: &[f64]) -> Vec<f64> {
    let r = (kernel.len() / 2) as isize;
    let mut tmp = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (k, kv) in kernel.iter().enumerate() {
                let xx = (x as isize + k as isize - r).clamp(0, w as isize - 1) as usize;
                acc += kv * data[y * w + xx];
            }
            tmp[y * w + x] = acc;
        }
    }
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (k, kv) in kernel.iter().enumerate() {
                let yy = (y as isize + k as isize - r).clamp(0, h as isize - 1) as usize;
                acc += kv * tmp[yy * w + x];
            }
            out[y * w + x] = acc;
        }
    }
    out
}

fn gaussian_kernel(size: usize) -> Vec<f64> {
    let sigma = 0.3 * ((size as f64 - 1.0) * 0.5 - 1.0) + 0.8;
    let r = (size / 2) as isize;
    let mut k: Vec<f64> = (-r..=r)
        .map(|i| (-((i * i) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let s: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= s);
    k
}

/// One displacement refinement at a pyramid level. `disp` holds `u` with
/// `prev(x + u) ~ curr(x)` and is updated in place.
fn refine(curr: &PolyField, prev: &PolyField, disp: &mut [[f64; 2]], window: &[f64]) {
    let (w, h) = (curr.width, curr.height);
    // per-pixel normal equations: [g11, g12, g22, h1, h2]
    let mut terms: [Vec<f64>; 5] = core::array::from_fn(|_| vec![0.0; w * h]);
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            let u = disp[i];
            let c1 = curr.at(x, y);
            let c2 = prev.sample(x as f64 + u[0], y as f64 + u[1]);
            let a11 = 0.5 * (c1[2] + c2[2]);
            let a22 = 0.5 * (c1[3] + c2[3]);
            let a12 = 0.5 * (c1[4] + c2[4]);
            let db1 = -0.5 * (c2[0] - c1[0]) + a11 * u[0] + a12 * u[1];
            let db2 = -0.5 * (c2[1] - c1[1]) + a12 * u[0] + a22 * u[1];
            // A symmetric: A^T A and A^T db
            terms[0][i] = a11 * a11 + a12 * a12;
            terms[1][i] = a11 * a12 + a12 * a22;
            terms[2][i] = a12 * a12 + a22 * a22;
            terms[3][i] = a11 * db1 + a12 * db2;
            terms[4][i] = a12 * db1 + a22 * db2;
        }
    }
    let pooled: Vec<Vec<f64>> = terms.iter().map(|t| separable(t, w, h, window)).collect();
    for i in 0..w * h {
        let (g11, g12, g22, h1, h2) = (
            pooled[0][i],
            pooled[1][i],
            pooled[2][i],
            pooled[3][i],
            pooled[4][i],
        );
        // ridge toward the current estimate keeps flat or 1-D structure stable
        let lambda = 1e-3 * 0.5 * (g11 + g22) + 1e-18;
        let u = disp[i];
        let (g11, g22) = (g11 + lambda, g22 + lambda);
        let (h1, h2) = (h1 + lambda * u[0], h2 + lambda * u[1]);
        let det = g11 * g22 - g12 * g12;
        if det > 0.0 && det.is_finite() {
            disp[i] = [(g22 * h1 - g12 * h2) / det, (g11 * h2 - g12 * h1) / det];
        }
    }
}

/// Estimates the motion from `prev` to `curr`, expressed on `curr`.
pub fn estimate_flow(curr: &GrayImage, prev: &GrayImage) -> Result<FlowField> {
    estimate_flow_with(curr, prev, &FlowParams::default())
}

pub fn estimate_flow_with(
    curr: &GrayImage,
    prev: &GrayImage,
    params: &FlowParams,
) -> Result<FlowField> {
    curr.same_dims(prev)?;
    params.validate()?;
    let (w, h) = curr.dims();
    if w == 0 || h == 0 {
        return Ok(FlowField::zero(w, h));
    }
    let mut curr_pyr = vec![Plane::from_image(curr)];
    let mut prev_pyr = vec![Plane::from_image(prev)];
    while curr_pyr.len() < params.levels {
        let last = curr_pyr.last().expect("non-empty");
        if last.width < 8 || last.height < 8 {
            break;
        }
        let c = last.pyr_down();
        let p = prev_pyr.last().expect("non-empty").pyr_down();
        curr_pyr.push(c);
        prev_pyr.push(p);
    }
    let filters = PolyFilters::new(params.poly_window, params.poly_sigma);
    let window = gaussian_kernel(params.window);

    let mut disp: Vec<[f64; 2]> = Vec::new();
    let mut disp_w = 0;
    let mut disp_h = 0;
    for level in (0..curr_pyr.len()).rev() {
        let (c, p) = (&curr_pyr[level], &prev_pyr[level]);
        disp = if disp.is_empty() {
            vec![[0.0, 0.0]; c.width * c.height]
        } else {
            upsample(&disp, disp_w, disp_h, c.width, c.height)
        };
        disp_w = c.width;
        disp_h = c.height;
        let pc = filters.expand(&c.data, c.width, c.height);
        let pp = filters.expand(&p.data, p.width, p.height);
        for _ in 0..params.iterations {
            refine(&pc, &pp, &mut disp, &window);
        }
    }
    Ok(FlowField::from_fn(w, h, |x, y| {
        if !curr.is_valid(x, y) {
            return None;
        }
        let u = disp[y * w + x];
        Some([-u[0] as f32, -u[1] as f32])
    }))
}

/// Doubles a coarse displacement field onto the finer grid.
fn upsample(disp: &[[f64; 2]], w: usize, h: usize, fine_w: usize, fine_h: usize) -> Vec<[f64; 2]> {
    let mut out = Vec::with_capacity(fine_w * fine_h);
    for y in 0..fine_h {
        for x in 0..fine_w {
            let sx = (x as f64 * 0.5).min((w - 1) as f64);
            let sy = (y as f64 * 0.5).min((h - 1) as f64);
            let x0 = sx.floor() as usize;
            let y0 = sy.floor() as usize;
            let x1 = (x0 + 1).min(w - 1);
            let y1 = (y0 + 1).min(h - 1);
            let fx = sx - x0 as f64;
            let fy = sy - y0 as f64;
            let mut v = [0.0; 2];
            for (xx, yy, wt) in [
                (x0, y0, (1.0 - fx) * (1.0 - fy)),
                (x1, y0, fx * (1.0 - fy)),
                (x0, y1, (1.0 - fx) * fy),
                (x1, y1, fx * fy),
            ] {
                let d = disp[yy * w + xx];
                v[0] += wt * d[0];
                v[1] += wt * d[1];
            }
            out.push([2.0 * v[0], 2.0 * v[1]]);
        }
    }
    out
}

/// Samples `raster` at `(x - m_x, y - m_y)` with bilinear interpolation.
/// Pixels whose flow is invalid, or whose source falls outside the raster or
/// on invalid data, come out invalid.
pub fn warp_backward(raster: &Raster, flow: &FlowField) -> Result<Raster> {
    if raster.dims() != flow.dims() {
        return Err(Error::DimensionMismatch {
            expected: flow.dims(),
            actual: raster.dims(),
        });
    }
    let (w, h) = raster.dims();
    Ok(Raster::from_fn(w, h, |x, y| {
        let m = flow.get(x, y)?;
        raster
            .sample_bilinear(x as f64 - m[0] as f64, y as f64 - m[1] as f64)
            .map(|v| v as f32)
    }))
}
