//! Camera-trap distance sampling: binned point-transect likelihood with a
//! key function and cosine adjustments.

mod optim;
mod quadrature;

pub use optim::{nelder_mead, Minimum};
pub use quadrature::GaussLegendre;

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::error::{Error, Result};
#[allow(unused_imports)]
use crate::math::Float64Ext;

const QUADRATURE_POINTS: usize = 64;
const CONSTRAINT_GRID: usize = 512;
const PENALTY_WEIGHT: f64 = 1e6;
const UPPER_SLACK: f64 = 1e-9;
const TOLERANCE: f64 = 1e-9;
const MAX_ITERATIONS: usize = 2000;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BinnedDistances {
    /// `J + 1` strictly increasing edges in metres.
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
}

impl BinnedDistances {
    pub fn new(edges: Vec<f64>, counts: Vec<u64>) -> Result<Self> {
        if edges.len() < 2 || counts.len() + 1 != edges.len() {
            return Err(Error::LengthMismatch("need one more edge than counts"));
        }
        if edges.windows(2).any(|e| !(e[1] > e[0]))
            || !(edges[0] >= 0.0)
            || !edges[edges.len() - 1].is_finite()
        {
            return Err(Error::InvalidWindow {
                left: edges[0],
                right: edges[edges.len() - 1],
            });
        }
        Ok(Self { edges, counts })
    }

    pub fn n_bins(&self) -> usize {
        self.counts.len()
    }

    pub fn left(&self) -> f64 {
        self.edges[0]
    }

    pub fn right(&self) -> f64 {
        self.edges[self.edges.len() - 1]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Bin of `d`; bins are half-open except the last, which includes the
    /// right truncation distance.
    pub fn bin_of(&self, d: f64) -> Option<usize> {
        if !(d >= self.left() && d <= self.right()) {
            return None;
        }
        let j = self.edges.partition_point(|e| *e <= d) - 1;
        Some(j.min(self.n_bins() - 1))
    }

    /// Adds `d` to its bin; returns false when it lies outside the window.
    pub fn add(&mut self, d: f64) -> bool {
        match self.bin_of(d) {
            Some(j) => {
                self.counts[j] += 1;
                true
            }
            None => false,
        }
    }
}

/// Equal-width bins over `[w_l, w]` with zero counts.
pub fn make_bins(w_l: f64, w: f64, n_bins: usize) -> Result<BinnedDistances> {
    if !(w_l >= 0.0 && w > w_l && w.is_finite()) {
        return Err(Error::InvalidWindow {
            left: w_l,
            right: w,
        });
    }
    if n_bins == 0 {
        return Err(Error::InvalidParameter("need at least one distance bin"));
    }
    let width = (w - w_l) / n_bins as f64;
    let mut edges: Vec<f64> = (0..=n_bins).map(|j| w_l + j as f64 * width).collect();
    edges[n_bins] = w;
    Ok(BinnedDistances {
        edges,
        counts: vec![0; n_bins],
    })
}

/// Bins `distances` into a copy of `bins`; also returns how many fell
/// outside the window.
pub fn bin_distances(bins: &BinnedDistances, distances: &[f64]) -> (BinnedDistances, usize) {
    let mut out = bins.clone();
    let ignored = distances.iter().filter(|d| !out.add(**d)).count();
    (out, ignored)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum KeyFunction {
    #[default]
    Uniform,
    HalfNormal,
}

/// Where the detection function is pinned to one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Scaling {
    /// `g(w_l) = 1`; adjustments span `[w_l, w]`.
    #[default]
    LeftTruncation,
    /// `g(0) = 1`; adjustments span `[0, w]`.
    Origin,
}

/// A detection function `g(r)` on `[w_l, w]`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DetectionModel {
    pub key: KeyFunction,
    pub coefficients: Vec<f64>,
    /// Half-normal scale in metres.
    pub sigma: Option<f64>,
    pub w_l: f64,
    pub w: f64,
    pub scaling: Scaling,
}

impl DetectionModel {
    pub fn uniform(w_l: f64, w: f64, coefficients: Vec<f64>) -> Self {
        Self {
            key: KeyFunction::Uniform,
            coefficients,
            sigma: None,
            w_l,
            w,
            scaling: Scaling::LeftTruncation,
        }
    }

    fn reference(&self) -> f64 {
        match self.scaling {
            Scaling::LeftTruncation => self.w_l,
            Scaling::Origin => 0.0,
        }
    }

    /// Unscaled `key(r) * (1 + sum_m a_m cos(m pi (r - r0) / (w - r0)))`.
    pub fn g_unscaled(&self, r: f64) -> f64 {
        let r0 = self.reference();
        let t = (r - r0) / (self.w - r0);
        let series: f64 = self
            .coefficients
            .iter()
            .enumerate()
            .map(|(m, a)| a * ((m + 1) as f64 * PI * t).cos())
            .sum();
        let key = match (self.key, self.sigma) {
            (KeyFunction::HalfNormal, Some(s)) => (-r * r / (2.0 * s * s)).exp(),
            _ => 1.0,
        };
        key * (1.0 + series)
    }

    /// Detection probability at `r`, scaled to one at the reference distance.
    pub fn g(&self, r: f64) -> f64 {
        self.g_unscaled(r) / self.g_unscaled(self.reference())
    }

    /// Total constraint violation on the check grid: negative values plus
    /// excess above one.
    pub fn violation(&self) -> f64 {
        let norm = self.g_unscaled(self.reference());
        if !(norm > 0.0) {
            return 1.0 + norm.abs();
        }
        let mut v = 0.0;
        for i in 0..CONSTRAINT_GRID {
            let r = self.w_l + (self.w - self.w_l) * i as f64 / (CONSTRAINT_GRID - 1) as f64;
            let raw = self.g_unscaled(r);
            if raw < 0.0 {
                v -= raw;
            }
            let g = raw / norm;
            if g > 1.0 + UPPER_SLACK {
                v += g - 1.0 - UPPER_SLACK;
            }
        }
        v
    }

    /// Unnormalized cell integrals `int r g(r) dr` per bin.
    pub fn cell_integrals(&self, edges: &[f64], quad: &GaussLegendre) -> Vec<f64> {
        edges
            .windows(2)
            .map(|e| quad.integrate(e[0], e[1], |r| r * self.g(r)))
            .collect()
    }

    /// Cell probabilities of the observed distances.
    pub fn cell_probabilities(&self, edges: &[f64], quad: &GaussLegendre) -> Vec<f64> {
        let cells = self.cell_integrals(edges, quad);
        let total: f64 = cells.iter().sum();
        cells.iter().map(|c| c / total).collect()
    }

    /// Average detection probability over the window,
    /// `int 2 r g(r) dr / (w^2 - w_l^2)`.
    pub fn p_hat(&self, quad: &GaussLegendre) -> f64 {
        2.0 * quad.integrate(self.w_l, self.w, |r| r * self.g(r))
            / (self.w * self.w - self.w_l * self.w_l)
    }
}

/// Convenience for the uniform key with `g(w_l) = 1`.
pub fn detection_g(r: f64, w_l: f64, w: f64, coefficients: &[f64]) -> f64 {
    DetectionModel::uniform(w_l, w, coefficients.to_vec()).g(r)
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct FitOptions {
    pub key: KeyFunction,
    pub n_adjustments: usize,
    pub scaling: Scaling,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            key: KeyFunction::Uniform,
            n_adjustments: 1,
            scaling: Scaling::LeftTruncation,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DetectionFunctionFit {
    pub key: KeyFunction,
    pub adjustment_orders: Vec<usize>,
    pub coefficients: Vec<f64>,
    pub sigma: Option<f64>,
    pub loglik: f64,
    pub aic: f64,
    pub p_hat: f64,
    pub fitted_bin_probs: Vec<f64>,
    pub w_l: f64,
    pub w: f64,
    pub scaling: Scaling,
    pub n_params: usize,
    pub iterations: usize,
}

impl DetectionFunctionFit {
    pub fn model(&self) -> DetectionModel {
        DetectionModel {
            key: self.key,
            coefficients: self.coefficients.clone(),
            sigma: self.sigma,
            w_l: self.w_l,
            w: self.w,
            scaling: self.scaling,
        }
    }

    pub fn g(&self, r: f64) -> f64 {
        self.model().g(r)
    }
}

fn log_likelihood(counts: &[u64], probs: &[f64]) -> f64 {
    counts
        .iter()
        .zip(probs)
        .filter(|(c, _)| **c > 0)
        .map(|(c, p)| {
            if *p > 0.0 {
                *c as f64 * p.ln()
            } else {
                f64::NEG_INFINITY
            }
        })
        .sum()
}

/// Uniform key with `n_adjustments` cosine terms, pinned at `w_l`.
pub fn fit_detection_function(
    bins: &BinnedDistances,
    key: KeyFunction,
    n_adjustments: usize,
) -> Result<DetectionFunctionFit> {
    fit_detection_function_with(
        bins,
        &FitOptions {
            key,
            n_adjustments,
            ..FitOptions::default()
        },
    )
}

/// Multinomial maximum likelihood over the binned counts. Constraint
/// violations on a fine grid are penalized; the simplex starts from all
/// adjustments at zero.
pub fn fit_detection_function_with(
    bins: &BinnedDistances,
    opts: &FitOptions,
) -> Result<DetectionFunctionFit> {
    if bins.total() == 0 {
        return Err(Error::EmptyBins);
    }
    let quad = GaussLegendre::new(QUADRATURE_POINTS);
    let (w_l, w) = (bins.left(), bins.right());
    let half_normal = opts.key == KeyFunction::HalfNormal;
    let n_params = opts.n_adjustments + usize::from(half_normal);

    let model_at = |theta: &[f64]| DetectionModel {
        key: opts.key,
        coefficients: theta[..opts.n_adjustments].to_vec(),
        sigma: half_normal.then(|| theta[opts.n_adjustments].exp()),
        w_l,
        w,
        scaling: opts.scaling,
    };
    let objective = |theta: &[f64]| {
        let m = model_at(theta);
        let penalty = PENALTY_WEIGHT * m.violation();
        let ll = log_likelihood(&bins.counts, &m.cell_probabilities(&bins.edges, &quad));
        let nll = if ll.is_finite() { -ll } else { 1e12 };
        nll + penalty
    };

    let mut theta0 = vec![0.0; n_params];
    if half_normal {
        theta0[opts.n_adjustments] = w.ln();
    }
    let mut best = nelder_mead(objective, &theta0, 0.1, TOLERANCE, MAX_ITERATIONS);
    let mut iterations = best.iterations;
    if n_params > 0 {
        // restart from the optimum to escape a collapsed simplex
        let again = nelder_mead(objective, &best.x, 0.05, TOLERANCE, MAX_ITERATIONS);
        iterations += again.iterations;
        if !again.converged {
            return Err(Error::OptimizerNonConvergence { iterations });
        }
        if again.value <= best.value {
            best = again;
        }
    }
    if !best.converged {
        return Err(Error::OptimizerNonConvergence { iterations });
    }

    let model = model_at(&best.x);
    let probs = model.cell_probabilities(&bins.edges, &quad);
    let loglik = log_likelihood(&bins.counts, &probs);
    Ok(DetectionFunctionFit {
        key: opts.key,
        adjustment_orders: (1..=opts.n_adjustments).collect(),
        coefficients: model.coefficients.clone(),
        sigma: model.sigma,
        loglik,
        aic: 2.0 * n_params as f64 - 2.0 * loglik,
        p_hat: model.p_hat(&quad),
        fitted_bin_probs: probs,
        w_l,
        w,
        scaling: opts.scaling,
        n_params,
        iterations,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GoodnessOfFit {
    pub chi2: f64,
    pub dof: i64,
}

/// Pearson chi-square of observed against expected bin counts.
pub fn gof_chi2(bins: &BinnedDistances, fit: &DetectionFunctionFit) -> Result<GoodnessOfFit> {
    if fit.fitted_bin_probs.len() != bins.n_bins() {
        return Err(Error::LengthMismatch(
            "fit and bins disagree on the number of bins",
        ));
    }
    let n = bins.total() as f64;
    let chi2 = bins
        .counts
        .iter()
        .zip(&fit.fitted_bin_probs)
        .map(|(o, p)| {
            let e = n * p;
            let d = *o as f64 - e;
            d * d / e
        })
        .sum();
    Ok(GoodnessOfFit {
        chi2,
        dof: bins.n_bins() as i64 - 1 - fit.n_params as i64,
    })
}
