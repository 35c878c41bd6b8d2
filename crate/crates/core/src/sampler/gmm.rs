//! Per-pixel Gaussian mixture background model (Stauffer-Grimson).

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
#[allow(unused_imports)]
use crate::math::Float64Ext;
use crate::raster::GrayImage;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct GmmParams {
    /// Components per pixel.
    pub components: usize,
    pub learning_rate: f64,
    /// A sample matches a component within this many standard deviations.
    pub match_sigmas: f64,
    /// Fraction of the total weight explained by background components.
    pub background_ratio: f64,
    pub initial_variance: f64,
    pub initial_weight: f64,
    pub variance_floor: f64,
}

impl Default for GmmParams {
    fn default() -> Self {
        Self {
            components: 4,
            learning_rate: 0.01,
            match_sigmas: 2.5,
            background_ratio: 0.8,
            initial_variance: 0.06 * 0.06,
            initial_weight: 0.05,
            variance_floor: 1e-4,
        }
    }
}

impl GmmParams {
    fn validate(&self) -> Result<()> {
        if self.components == 0 {
            return Err(Error::InvalidParameter(
                "mixture needs at least one component",
            ));
        }
        if !(0.0..=1.0).contains(&self.learning_rate)
            || !(0.0..1.0).contains(&self.background_ratio)
        {
            return Err(Error::InvalidParameter(
                "learning rate and background ratio must lie in [0, 1]",
            ));
        }
        if !(self.match_sigmas > 0.0
            && self.variance_floor > 0.0
            && self.initial_variance >= self.variance_floor)
        {
            return Err(Error::InvalidParameter(
                "variances and match threshold must be positive",
            ));
        }
        if !(self.initial_weight > 0.0 && self.initial_weight < 1.0) {
            return Err(Error::InvalidParameter("initial weight must lie in (0, 1)"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Component {
    pub mean: f64,
    pub variance: f64,
    pub weight: f64,
}

impl Component {
    const EMPTY: Component = Component {
        mean: 0.0,
        variance: 1.0,
        weight: 0.0,
    };

    fn fitness(&self) -> f64 {
        self.weight / self.variance.sqrt()
    }
}

/// Foreground classification of one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Foreground {
    pub mask: Vec<bool>,
    /// Foreground pixels over valid pixels.
    pub ratio: f64,
}

/// Mixture state for every pixel. Components are kept sorted by
/// `weight / sigma`, most background-like first.
#[derive(Debug, Clone)]
pub struct GmmModel {
    width: usize,
    height: usize,
    params: GmmParams,
    components: Vec<Component>,
    initialized: bool,
}

impl GmmModel {
    pub fn new(width: usize, height: usize, params: GmmParams) -> Result<Self> {
        params.validate()?;
        Ok(Self {
            width,
            height,
            params,
            components: vec![Component::EMPTY; width * height * params.components],
            initialized: false,
        })
    }

    pub fn params(&self) -> &GmmParams {
        &self.params
    }

    pub fn set_learning_rate(&mut self, alpha: f64) {
        self.params.learning_rate = alpha;
    }

    pub fn pixel(&self, x: usize, y: usize) -> &[Component] {
        let k = self.params.components;
        let i = (y * self.width + x) * k;
        &self.components[i..i + k]
    }

    /// Classifies `frame` against the current model, then folds it in.
    pub fn update(&mut self, frame: &GrayImage) -> Result<Foreground> {
        if frame.dims() != (self.width, self.height) {
            return Err(Error::DimensionMismatch {
                expected: (self.width, self.height),
                actual: frame.dims(),
            });
        }
        let k = self.params.components;
        let mut mask = vec![false; self.width * self.height];
        if !self.initialized {
            for (i, v) in frame.data().iter().enumerate() {
                let comps = &mut self.components[i * k..(i + 1) * k];
                comps[0] = Component {
                    mean: *v as f64,
                    variance: self.params.initial_variance,
                    weight: 1.0,
                };
            }
            self.initialized = true;
            return Ok(Foreground { mask, ratio: 0.0 });
        }
        let mut foreground = 0usize;
        let mut valid = 0usize;
        for (i, (v, ok)) in frame.data().iter().zip(frame.valid_mask()).enumerate() {
            if !ok {
                continue;
            }
            valid += 1;
            let comps = &mut self.components[i * k..(i + 1) * k];
            if update_pixel(comps, *v as f64, &self.params) {
                mask[i] = true;
                foreground += 1;
            }
        }
        let ratio = if valid == 0 {
            0.0
        } else {
            foreground as f64 / valid as f64
        };
        Ok(Foreground { mask, ratio })
    }
}

/// Returns whether the sample is foreground.
fn update_pixel(comps: &mut [Component], x: f64, p: &GmmParams) -> bool {
    let matched = comps
        .iter()
        .position(|c| c.weight > 0.0 && (x - c.mean).abs() <= p.match_sigmas * c.variance.sqrt());

    // background = leading components whose cumulative weight first exceeds T
    let mut cumulative = 0.0;
    let mut n_background = comps.len();
    for (j, c) in comps.iter().enumerate() {
        cumulative += c.weight;
        if cumulative > p.background_ratio {
            n_background = j + 1;
            break;
        }
    }
    let is_foreground = matched.is_none_or(|m| m >= n_background);

    let alpha = p.learning_rate;
    if alpha == 0.0 {
        return is_foreground;
    }
    for (j, c) in comps.iter_mut().enumerate() {
        let hit = if Some(j) == matched { 1.0 } else { 0.0 };
        c.weight = (1.0 - alpha) * c.weight + alpha * hit;
    }
    match matched {
        Some(j) => {
            let c = &mut comps[j];
            c.mean += alpha * (x - c.mean);
            let d = x - c.mean;
            c.variance = ((1.0 - alpha) * c.variance + alpha * d * d).max(p.variance_floor);
        }
        None => {
            let last = comps.len() - 1;
            comps[last] = Component {
                mean: x,
                variance: p.initial_variance,
                weight: p.initial_weight,
            };
        }
    }
    let total: f64 = comps.iter().map(|c| c.weight).sum();
    for c in comps.iter_mut() {
        c.weight /= total;
    }
    comps.sort_by(|a, b| b.fitness().total_cmp(&a.fitness()));
    is_foreground
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::Raster;

    #[test]
    fn static_scene_is_background() {
        let frame = Raster::from_fn(16, 16, |x, y| Some(((x * 5 + y * 3) % 11) as f32 / 11.0));
        let mut m = GmmModel::new(16, 16, GmmParams::default()).unwrap();
        let mut last = 1.0;
        for _ in 0..200 {
            last = m.update(&frame).unwrap().ratio;
        }
        assert!(last < 0.001);
    }

    #[test]
    fn frozen_model_repeats_mask() {
        let bg = Raster::filled(8, 8, 0.2);
        let mut m = GmmModel::new(8, 8, GmmParams::default()).unwrap();
        for _ in 0..40 {
            m.update(&bg).unwrap();
        }
        m.set_learning_rate(0.0);
        let probe = Raster::from_fn(8, 8, |x, _| Some(if x < 3 { 0.9 } else { 0.2 }));
        let before: Vec<Component> = m.components.clone();
        let a = m.update(&probe).unwrap();
        let b = m.update(&probe).unwrap();
        assert_eq!(a, b);
        assert_eq!(m.components, before);
        assert!((a.ratio - 24.0 / 64.0).abs() < 1e-12);
    }

    #[test]
    fn dimension_mismatch() {
        let mut m = GmmModel::new(8, 8, GmmParams::default()).unwrap();
        assert!(m.update(&Raster::filled(8, 9, 0.0)).is_err());
    }
}
