//! Synthetic scenes shared by the integration tests.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stereotrap_core::raster::Raster;

/// Random-dot pair with constant disparity `d`: `right(x) = left(x + d)`.
pub fn random_dot_pair(w: usize, h: usize, d: usize, salt: f64, seed: u64) -> (Raster, Raster) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base: Vec<f32> = (0..(w + d) * h).map(|_| rng.gen::<f32>()).collect();
    let at = |x: usize, y: usize| base[y * (w + d) + x];
    let mut left = Raster::from_fn(w, h, |x, y| Some(at(x, y)));
    let mut right = Raster::from_fn(w, h, |x, y| Some(at(x + d, y)));
    for img in [&mut left, &mut right] {
        for y in 0..h {
            for x in 0..w {
                if rng.gen::<f64>() < salt {
                    img.set(x, y, 1.0);
                }
            }
        }
    }
    (left, right)
}

/// Smooth band-limited texture, evaluated analytically so shifted copies are
/// exact.
pub struct Texture {
    waves: Vec<(f64, f64, f64, f64)>,
}

impl Texture {
    pub fn new(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let waves = (0..12)
            .map(|_| {
                let wavelength = rng.gen_range(10.0..40.0);
                let angle: f64 = rng.gen_range(0.0..std::f64::consts::PI);
                let k = 2.0 * std::f64::consts::PI / wavelength;
                (
                    k * angle.cos(),
                    k * angle.sin(),
                    rng.gen_range(0.0..6.3),
                    rng.gen_range(0.5..1.0),
                )
            })
            .collect();
        Self { waves }
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        let total: f64 = self.waves.iter().map(|w| w.3).sum();
        let v: f64 = self
            .waves
            .iter()
            .map(|(kx, ky, ph, a)| a * (kx * x + ky * y + ph).sin())
            .sum();
        0.5 + 0.5 * v / total
    }

    /// Image of the texture shifted by `(sx, sy)` and magnified by `scale`.
    pub fn render(&self, w: usize, h: usize, sx: f64, sy: f64, scale: f64) -> Raster {
        Raster::from_fn(w, h, |x, y| {
            Some(self.eval((x as f64 - sx) / scale, (y as f64 - sy) / scale) as f32)
        })
    }
}
