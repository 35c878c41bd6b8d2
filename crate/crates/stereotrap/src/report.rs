//! Output documents: distance CSV, JSON reports, histogram CSV and the
//! detection-probability plot.

use std::path::Path;

use serde::{Deserialize, Serialize};
use stereotrap_core::distance::{DistanceRecord, Method};
use stereotrap_core::quality::Histogram;
use stereotrap_core::sampler::SamplePlan;

use crate::error::{Error, Result};
use crate::io::write_atomic;
use crate::stages::CtdsReport;

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::json(path, e))?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::json(path, e))
}

#[derive(Debug, Serialize, Deserialize)]
struct DistanceRow {
    observation_id: String,
    frame_index: usize,
    distance_m: f64,
    method: String,
    valid_depth_fraction: f64,
}

pub fn write_distances_csv(path: &Path, records: &[DistanceRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in records {
        w.serialize(DistanceRow {
            observation_id: r.observation_id.clone(),
            frame_index: r.frame_index,
            distance_m: r.distance,
            method: r.method.as_str().to_string(),
            valid_depth_fraction: r.valid_depth_fraction,
        })
        .map_err(|e| Error::csv(path, e))?;
    }
    if records.is_empty() {
        w.write_record([
            "observation_id",
            "frame_index",
            "distance_m",
            "method",
            "valid_depth_fraction",
        ])
        .map_err(|e| Error::csv(path, e))?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::format(path, e.to_string()))?;
    write_atomic(path, &bytes)
}

pub fn read_distances_csv(path: &Path) -> Result<Vec<DistanceRecord>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
    let mut out = Vec::new();
    for row in r.deserialize::<DistanceRow>() {
        let row = row.map_err(|e| Error::csv(path, e))?;
        let method = match row.method.as_str() {
            "mask-median" => Method::MaskMedian,
            "bbox-sampled" => Method::BboxSampled,
            other => return Err(Error::format(path, format!("unknown method `{other}`"))),
        };
        out.push(DistanceRecord {
            observation_id: row.observation_id,
            frame_index: row.frame_index,
            distance: row.distance_m,
            method,
            valid_depth_fraction: row.valid_depth_fraction,
        });
    }
    Ok(out)
}

/// `bin_lo, bin_hi, count`, with under- and overflow as open-ended rows.
pub fn write_histogram_csv(path: &Path, h: &Histogram) -> Result<()> {
    let mut text = String::from("bin_lo,bin_hi,count\n");
    if h.underflow > 0 {
        text.push_str(&format!("-inf,{},{}\n", h.lo, h.underflow));
    }
    for (i, c) in h.counts.iter().enumerate() {
        text.push_str(&format!("{},{},{}\n", h.edge(i), h.edge(i + 1), c));
    }
    if h.overflow > 0 {
        text.push_str(&format!("{},inf,{}\n", h.hi, h.overflow));
    }
    write_atomic(path, text.as_bytes())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplePlanFile {
    pub video_id: String,
    pub threshold: Option<f64>,
    pub indices: Vec<usize>,
    pub ratios: Vec<f64>,
}

impl SamplePlanFile {
    pub fn new(video_id: &str, plan: &SamplePlan) -> Self {
        Self {
            video_id: video_id.to_string(),
            threshold: plan.threshold,
            indices: plan.indices.clone(),
            ratios: plan.ratios.clone(),
        }
    }
}

/// Bar height per bin: observed share of detections over the share expected
/// without distance-dependent detectability, times `p_hat`. Bars then sit
/// around the mean of `g` over each annulus.
pub fn scaled_histogram(report: &CtdsReport) -> Vec<f64> {
    let b = &report.bins;
    let n = b.total() as f64;
    let (lo, hi) = (b.left(), b.right());
    let p_hat = report.fit.as_ref().map_or(1.0, |f| f.p_hat);
    b.counts
        .iter()
        .enumerate()
        .map(|(j, c)| {
            if n == 0.0 {
                return 0.0;
            }
            let area = (b.edges[j + 1].powi(2) - b.edges[j].powi(2)) / (hi * hi - lo * lo);
            *c as f64 / n / area * p_hat
        })
        .collect()
}

pub fn detection_probability_svg(report: &CtdsReport) -> String {
    const W: f64 = 640.0;
    const H: f64 = 400.0;
    const M: f64 = 50.0;
    let b = &report.bins;
    let (lo, hi) = (b.left(), b.right());
    let bars = scaled_histogram(report);
    let top = bars.iter().copied().fold(1.0f64, f64::max) * 1.1;
    let sx = |r: f64| M + (r - lo) / (hi - lo) * (W - 2.0 * M);
    let sy = |v: f64| H - M - v / top * (H - 2.0 * M);

    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    );
    for (j, v) in bars.iter().enumerate() {
        let (x0, x1) = (sx(b.edges[j]), sx(b.edges[j + 1]));
        svg.push_str(&format!(
            "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"#6b9bd1\" stroke=\"#2c5d8f\"/>\n",
            x0,
            sy(*v),
            x1 - x0,
            sy(0.0) - sy(*v)
        ));
    }
    if let Some(fit) = &report.fit {
        let pts: Vec<String> = (0..=200)
            .map(|i| {
                let r = lo + (hi - lo) * i as f64 / 200.0;
                format!("{:.2},{:.2}", sx(r), sy(fit.g(r)))
            })
            .collect();
        svg.push_str(&format!(
            "<polyline points=\"{}\" fill=\"none\" stroke=\"#c0392b\" stroke-width=\"2\"/>\n",
            pts.join(" ")
        ));
        svg.push_str(&format!(
            "<text x=\"{:.0}\" y=\"30\" font-family=\"sans-serif\" font-size=\"14\">p_hat = {:.4}</text>\n",
            W - M - 120.0,
            fit.p_hat
        ));
    }
    svg.push_str(&format!(
        "<line x1=\"{M}\" y1=\"{y:.2}\" x2=\"{x:.2}\" y2=\"{y:.2}\" stroke=\"black\"/>\n\
         <line x1=\"{M}\" y1=\"{M}\" x2=\"{M}\" y2=\"{y:.2}\" stroke=\"black\"/>\n",
        y = sy(0.0),
        x = W - M
    ));
    for e in &b.edges {
        svg.push_str(&format!(
            "<text x=\"{:.2}\" y=\"{:.0}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">{:.2}</text>\n",
            sx(*e),
            H - M + 16.0,
            e
        ));
    }
    svg.push_str(&format!(
        "<text x=\"{:.0}\" y=\"{:.0}\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\">distance (m)</text>\n\
         <text x=\"14\" y=\"{:.0}\" font-family=\"sans-serif\" font-size=\"12\" transform=\"rotate(-90 14 {:.0})\" text-anchor=\"middle\">detection probability</text>\n",
        W / 2.0,
        H - 10.0,
        H / 2.0,
        H / 2.0
    ));
    svg.push_str("</svg>\n");
    svg
}
