//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure.

mod common;

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use nalgebra::{Rotation3, Unit, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stereotrap::config::{FrameSelection, PipelineConfig};
use stereotrap::pipeline::run_pipeline;
use stereotrap::report::read_distances_csv;
use stereotrap::store::ObservationStore;
use stereotrap_core::ctds::{fit_detection_function, make_bins, BinnedDistances, KeyFunction};
use stereotrap_core::flow::{estimate_flow, FlowField};
use stereotrap_core::geometry::{
    compute_rectification, depth_from_disparity, CalibrationSet, Extrinsics, Intrinsics, Side,
};
use stereotrap_core::quality::{temporal_error, PixelNormalization};
use stereotrap_core::raster::{DisparityMap, Raster};
use stereotrap_core::sampler::{accumulate_plan, fixed_rate_sample, DEFAULT_BURN_IN};
use stereotrap_core::stereo::StereoMatcher;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn within_time(elapsed: Duration, limit: Duration) -> Result<(), String> {
    check(
        elapsed < limit,
        format!("runtime {elapsed:.2?} exceeds {limit:?}"),
    )
}

fn depth_formula() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut worst_z, mut worst_trip) = (0.0f64, 0.0f64);
    for _ in 0..1000 {
        let b = rng.gen_range(0.05..1.0);
        let f = rng.gen_range(200.0..3000.0);
        let d = rng.gen_range(0.1..300.0);
        let z = depth_from_disparity(b, f, d, 0.1).ok_or("valid disparity rejected")?;
        let expect = b * f / d;
        worst_z = worst_z.max(((z - expect) / expect).abs());
        let back = b * f / z;
        worst_trip = worst_trip.max(((back - d) / d).abs());
    }
    let elapsed = start.elapsed();
    check(
        worst_z <= 1e-12,
        format!("depth relative error {worst_z:e}"),
    )?;
    check(
        worst_trip <= 1e-9,
        format!("round-trip relative error {worst_trip:e}"),
    )?;
    within_time(elapsed, Duration::from_secs(1))?;
    Ok(format!(
        "max rel err {worst_z:.1e}, round trip {worst_trip:.1e}, {elapsed:.2?}"
    ))
}

fn random_intrinsics(rng: &mut ChaCha8Rng) -> Intrinsics {
    let f = rng.gen_range(600.0..1200.0);
    Intrinsics {
        k1: rng.gen_range(-0.1..0.05),
        k2: rng.gen_range(-0.01..0.01),
        p1: rng.gen_range(-0.001..0.001),
        p2: rng.gen_range(-0.001..0.001),
        ..Intrinsics::pinhole(
            f,
            f * rng.gen_range(0.99..1.01),
            rng.gen_range(620.0..660.0),
            rng.gen_range(340.0..380.0),
            1280,
            720,
        )
    }
}

fn rectification() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut aligned, mut total) = (0usize, 0usize);
    for _ in 0..20 {
        let axis = Unit::new_normalize(Vector3::new(
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        ));
        let angle = rng.gen_range(0.0..3.0f64).to_radians();
        let rotation = Rotation3::from_axis_angle(&axis, angle).into_inner();
        let translation = Vector3::new(
            -rng.gen_range(0.1..0.6),
            rng.gen_range(-0.01..0.01),
            rng.gen_range(-0.01..0.01),
        );
        let cal = CalibrationSet {
            left: random_intrinsics(&mut rng),
            right: random_intrinsics(&mut rng),
            stereo: Extrinsics::new(rotation, translation).map_err(|e| e.to_string())?,
        };
        let map = compute_rectification(&cal).map_err(|e| e.to_string())?;
        let mut points = 0;
        while points < 50 {
            let p = Vector3::new(
                rng.gen_range(-3.0..3.0),
                rng.gen_range(-2.0..2.0),
                rng.gen_range(3.0..15.0),
            );
            let pr = rotation * p + translation;
            let (Some(l), Some(r)) = (cal.left.project(&p), cal.right.project(&pr)) else {
                continue;
            };
            let inside = |q: [f64; 2]| q[0] >= 0.0 && q[1] >= 0.0 && q[0] < 1280.0 && q[1] < 720.0;
            if !inside(l) || !inside(r) {
                continue;
            }
            points += 1;
            let rl = map
                .rectify_point(Side::Left, l)
                .map_err(|e| e.to_string())?;
            let rr = map
                .rectify_point(Side::Right, r)
                .map_err(|e| e.to_string())?;
            total += 1;
            if (rl[1] - rr[1]).abs() < 0.5 {
                aligned += 1;
            }
        }
    }
    let elapsed = start.elapsed();
    let rate = aligned as f64 / total as f64;
    check(
        rate >= 0.98,
        format!("{aligned}/{total} points row-aligned"),
    )?;
    within_time(elapsed, Duration::from_secs(5))?;
    Ok(format!(
        "{aligned}/{total} points within 0.5 px over 20 rigs, {elapsed:.2?}"
    ))
}

/// Random-dot pair with `right(x) = left(x + d)` and optional salt noise.
fn random_dot_pair(w: usize, h: usize, d: usize, salt: f64, seed: u64) -> (Raster, Raster) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base: Vec<f32> = (0..(w + d) * h).map(|_| rng.gen::<f32>()).collect();
    let mut left = Raster::from_fn(w, h, |x, y| Some(base[y * (w + d) + x]));
    let mut right = Raster::from_fn(w, h, |x, y| Some(base[y * (w + d) + x + d]));
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

fn interior_rate(disp: &DisparityMap, d: usize, tol: f32) -> (usize, usize) {
    const MARGIN: usize = 8;
    let (w, h) = disp.dims();
    let (mut ok, mut total) = (0, 0);
    for y in MARGIN..h - MARGIN {
        for x in d + MARGIN..w - MARGIN {
            if let Some(v) = disp.get(x, y) {
                total += 1;
                if (v - d as f32).abs() <= tol {
                    ok += 1;
                }
            }
        }
    }
    (ok, total)
}

fn sgm() -> Outcome {
    let start = Instant::now();
    let matcher = StereoMatcher {
        max_disparity: 32,
        ..Default::default()
    };
    let mut summary = Vec::new();
    for (i, d) in [2usize, 5, 17].into_iter().enumerate() {
        for (salt, tol, need) in [(0.0, 0.5f32, 0.99), (0.1, 1.0, 0.95)] {
            let (l, r) = random_dot_pair(256, 256, d, salt, 10 * i as u64 + (salt > 0.0) as u64);
            let disp = matcher.compute(&l, &r).map_err(|e| e.to_string())?;
            let (ok, total) = interior_rate(&disp, d, tol);
            let rate = ok as f64 / total.max(1) as f64;
            check(
                total > 0 && rate >= need,
                format!("d={d} salt={salt}: {ok}/{total} within {tol} px"),
            )?;
            summary.push(format!("d={d}/{salt}: {:.2}%", 100.0 * rate));
        }
    }
    let elapsed = start.elapsed();
    within_time(elapsed, Duration::from_secs(30))?;
    Ok(format!("{}, {elapsed:.2?}", summary.join(", ")))
}

/// Sum of random plane waves, evaluated analytically.
struct Texture(Vec<(f64, f64, f64, f64)>);

impl Texture {
    fn new(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self(
            (0..12)
                .map(|_| {
                    let k = 2.0 * PI / rng.gen_range(10.0..40.0);
                    let angle: f64 = rng.gen_range(0.0..PI);
                    (
                        k * angle.cos(),
                        k * angle.sin(),
                        rng.gen_range(0.0..6.3),
                        rng.gen_range(0.5..1.0),
                    )
                })
                .collect(),
        )
    }

    fn render(&self, w: usize, h: usize, sx: f64, sy: f64) -> Raster {
        let total: f64 = self.0.iter().map(|c| c.3).sum();
        Raster::from_fn(w, h, |x, y| {
            let (u, v) = (x as f64 - sx, y as f64 - sy);
            let s: f64 = self
                .0
                .iter()
                .map(|(kx, ky, ph, a)| a * (kx * u + ky * v + ph).sin())
                .sum();
            Some((0.5 + 0.5 * s / total) as f32)
        })
    }
}

fn flow() -> Outcome {
    const MARGIN: usize = 16;
    let start = Instant::now();
    let tex = Texture::new(4);
    let mut worst = 0.0f64;
    for shift in [
        [1.0, 0.0],
        [0.0, -2.5],
        [4.0, 3.0],
        [8.0, 0.0],
        [0.0, 8.0],
        [-5.6, 5.6],
        [-3.3, -7.1],
    ] {
        let prev = tex.render(128, 112, 0.0, 0.0);
        let curr = tex.render(128, 112, shift[0], shift[1]);
        let field = estimate_flow(&curr, &prev).map_err(|e| e.to_string())?;
        let (mut sum, mut n) = (0.0, 0usize);
        for y in MARGIN..112 - MARGIN {
            for x in MARGIN..128 - MARGIN {
                let m = field.get(x, y).ok_or("invalid flow in the interior")?;
                sum += ((m[0] as f64 - shift[0]).powi(2) + (m[1] as f64 - shift[1]).powi(2)).sqrt();
                n += 1;
            }
        }
        let epe = sum / n as f64;
        check(epe < 0.25, format!("shift {shift:?}: mean EPE {epe:.4}"))?;
        worst = worst.max(epe);
    }
    let elapsed = start.elapsed();
    within_time(elapsed, Duration::from_secs(10))?;
    Ok(format!("worst mean EPE {worst:.4} px, {elapsed:.2?}"))
}

fn reference_e_t(frames: &[Vec<f64>], flows: &[Vec<[f64; 2]>], w: usize, h: usize) -> f64 {
    let lookup = |g: &[f64], x: f64, y: f64| -> Option<f64> {
        if x < 0.0 || y < 0.0 || x > (w - 1) as f64 || y > (h - 1) as f64 {
            return None;
        }
        let (x0, y0) = (x.floor() as usize, y.floor() as usize);
        let (fx, fy) = (x - x0 as f64, y - y0 as f64);
        let mut acc = 0.0;
        for (yy, wy) in [(y0, 1.0 - fy), (y0 + 1, fy)] {
            for (xx, wx) in [(x0, 1.0 - fx), (x0 + 1, fx)] {
                if wx * wy != 0.0 {
                    let v = g[yy * w + xx];
                    if v.is_nan() {
                        return None;
                    }
                    acc += wx * wy * v;
                }
            }
        }
        Some(acc)
    };
    let (mut sum, mut count) = (0.0, 0usize);
    for n in 1..frames.len() {
        for y in 0..h {
            for x in 0..w {
                let a = frames[n][y * w + x];
                let m = flows[n - 1][y * w + x];
                if a.is_nan() {
                    continue;
                }
                if let Some(b) = lookup(&frames[n - 1], x as f64 - m[0], y as f64 - m[1]) {
                    sum += (a - b).abs();
                    count += 1;
                }
            }
        }
    }
    sum / count as f64
}

fn temporal() -> Outcome {
    let err = |e: stereotrap_core::Error| e.to_string();
    let norm = PixelNormalization::ValidOnly;

    let d = Raster::from_fn(20, 10, |x, y| Some((x + 2 * y) as f32 * 0.5));
    let r = temporal_error(
        &[d.clone(), d.clone(), d],
        &[FlowField::zero(20, 10), FlowField::zero(20, 10)],
        norm,
    )
    .map_err(err)?;
    check(r.e_t == 0.0, format!("static sequence E_t = {}", r.e_t))?;

    let c = 0.75f32;
    let frames: Vec<Raster> = (0..6)
        .map(|n| {
            Raster::from_fn(12, 9, |x, _| {
                Some(x as f32 + if n % 2 == 1 { c } else { 0.0 })
            })
        })
        .collect();
    let r = temporal_error(&frames, &vec![FlowField::zero(12, 9); 5], norm).map_err(err)?;
    check(
        r.e_t == c as f64,
        format!("alternating offset E_t = {}", r.e_t),
    )?;

    let tex = Texture::new(21);
    let frames: Vec<Raster> = (0..6)
        .map(|n| {
            tex.render(64, 48, 1.5 * n as f64, 0.0)
                .map_valid(|v| Some(10.0 + 30.0 * v))
        })
        .collect();
    let rigid = temporal_error(
        &frames,
        &vec![FlowField::constant(64, 48, [1.5, 0.0]); 5],
        norm,
    )
    .map_err(err)?
    .e_t;
    check(rigid < 0.05, format!("rigid motion E_t = {rigid}"))?;

    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (w, h) = (16, 16);
    let mut worst = 0.0f64;
    for _ in 0..10 {
        let frames: Vec<Vec<f64>> = (0..4)
            .map(|_| {
                (0..w * h)
                    .map(|_| {
                        if rng.gen::<f64>() < 0.1 {
                            f64::NAN
                        } else {
                            (rng.gen::<f32>() * 40.0) as f64
                        }
                    })
                    .collect()
            })
            .collect();
        let flows: Vec<Vec<[f64; 2]>> = (0..3)
            .map(|_| {
                (0..w * h)
                    .map(|_| {
                        [
                            rng.gen_range(-3.0f32..3.0) as f64,
                            rng.gen_range(-3.0f32..3.0) as f64,
                        ]
                    })
                    .collect()
            })
            .collect();
        let rasters: Vec<Raster> = frames
            .iter()
            .map(|f| Raster::from_vec(w, h, f.iter().map(|v| *v as f32).collect()).unwrap())
            .collect();
        let fields: Vec<FlowField> = flows
            .iter()
            .map(|f| {
                FlowField::from_fn(w, h, |x, y| {
                    Some([f[y * w + x][0] as f32, f[y * w + x][1] as f32])
                })
            })
            .collect();
        let got = temporal_error(&rasters, &fields, norm).map_err(err)?.e_t;
        worst = worst.max((got - reference_e_t(&frames, &flows, w, h)).abs());
    }
    check(
        worst <= 1e-9,
        format!("double-loop reference differs by {worst:e}"),
    )?;
    Ok(format!(
        "static 0, alternating {c}, rigid {rigid:.2e}, reference diff {worst:.1e}"
    ))
}

fn sampler() -> Outcome {
    let plan = fixed_rate_sample(750, 30.0, 2.0).map_err(|e| e.to_string())?;
    check(
        plan.indices.len() == 50,
        format!("{} fixed-rate indices", plan.indices.len()),
    )?;
    check(
        plan.indices.iter().enumerate().all(|(k, &i)| i == 15 * k),
        "fixed-rate stride is not 15",
    )?;

    // traced by hand: running sum since the last emission, reset on emission
    let scripted: [(&[f64], f64, usize, &[usize]); 4] = [
        (
            &[0.05, 0.05, 0.0, 0.2, 0.03, 0.03, 0.03, 0.01],
            0.1,
            0,
            &[1, 3, 7],
        ),
        (
            &[0.05, 0.05, 0.0, 0.2, 0.03, 0.03, 0.03, 0.01],
            0.1,
            2,
            &[3, 7],
        ),
        (&[0.05; 10], 0.1, 0, &[1, 3, 5, 7, 9]),
        (&[0.5, 0.0, 0.0, 0.09, 0.01, 0.3, 0.04], 0.1, 1, &[4, 5]),
    ];
    for (ratios, threshold, burn_in, expect) in scripted {
        let got = accumulate_plan(ratios, threshold, burn_in)
            .map_err(|e| e.to_string())?
            .indices;
        check(
            got == expect,
            format!("{ratios:?} burn-in {burn_in}: {got:?} != {expect:?}"),
        )?;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..100 {
        let n = rng.gen_range(30..200);
        let r: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..0.08)).collect();
        let more: Vec<f64> = r
            .iter()
            .map(|v| (v + rng.gen_range(0.0..0.05)).min(1.0))
            .collect();
        let a = accumulate_plan(&r, 0.10, DEFAULT_BURN_IN)
            .map_err(|e| e.to_string())?
            .indices
            .len();
        let b = accumulate_plan(&more, 0.10, DEFAULT_BURN_IN)
            .map_err(|e| e.to_string())?
            .indices
            .len();
        check(b >= a, format!("more motion gave {b} < {a} samples"))?;
    }
    Ok("50 indices at stride 15, 4 scripted traces, 100 monotone pairs".into())
}

/// Closed-form `int_a^b r (1 + c cos(pi (r - 3) / 8)) dr`.
fn cosine_cell(a: f64, b: f64, c: f64) -> f64 {
    let k = PI / 8.0;
    let prim = |r: f64| {
        0.5 * r * r + c * (r * (k * (r - 3.0)).sin() / k + (k * (r - 3.0)).cos() / (k * k))
    };
    prim(b) - prim(a)
}

fn cosine_loglik(edges: &[f64], counts: &[u64], c: f64) -> f64 {
    let cells: Vec<f64> = edges
        .windows(2)
        .map(|e| cosine_cell(e[0], e[1], c))
        .collect();
    let total: f64 = cells.iter().sum();
    counts
        .iter()
        .zip(&cells)
        .filter(|(n, _)| **n > 0)
        .map(|(n, p)| *n as f64 * (p / total).ln())
        .sum()
}

fn with_counts(counts: &[u64]) -> Result<BinnedDistances, String> {
    let mut b = make_bins(3.0, 11.0, counts.len()).map_err(|e| e.to_string())?;
    b.counts = counts.to_vec();
    Ok(b)
}

fn ctds() -> Outcome {
    let start = Instant::now();
    let bins = make_bins(3.0, 11.0, 7).map_err(|e| e.to_string())?;
    for (j, e) in bins.edges.iter().enumerate() {
        let expect = 3.0 + j as f64 * 8.0 / 7.0;
        check(
            (e - expect).abs() <= 1e-12,
            format!("edge {j}: {e} vs {expect}"),
        )?;
    }

    let flat = fit_detection_function(
        &with_counts(&[50, 66, 82, 98, 114, 130, 146])?,
        KeyFunction::Uniform,
        1,
    )
    .map_err(|e| e.to_string())?;
    let a1_flat = flat.coefficients[0];
    check(a1_flat.abs() < 0.02, format!("g=1 fit a1 = {a1_flat}"))?;
    check(
        (0.99..=1.01).contains(&flat.p_hat),
        format!("g=1 fit p_hat = {}", flat.p_hat),
    )?;

    let declining = with_counts(&[30, 28, 25, 20, 15, 9, 4])?;
    let fit =
        fit_detection_function(&declining, KeyFunction::Uniform, 1).map_err(|e| e.to_string())?;
    // grid over a1 in [-1, 1] at 1e-3; only a1 in [0, 1] keeps g within [0, 1]
    let oracle = (0..=2000)
        .map(|i| -1.0 + i as f64 * 1e-3)
        .filter(|a| (0.0..=1.0).contains(a))
        .map(|a| (a, cosine_loglik(&declining.edges, &declining.counts, a)))
        .max_by(|x, y| x.1.total_cmp(&y.1))
        .unwrap()
        .0;
    let a1 = fit.coefficients[0];
    check(
        (a1 - oracle).abs() <= 1e-3,
        format!("declining fit a1 = {a1}, grid {oracle}"),
    )?;

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = (fit.fitted_bin_probs.iter().sum::<f64>() - 1.0).abs();
    for _ in 0..20 {
        let counts: Vec<u64> = (0..7).map(|_| rng.gen_range(0..60)).collect();
        if counts.iter().sum::<u64>() == 0 {
            continue;
        }
        let f = fit_detection_function(
            &with_counts(&counts)?,
            KeyFunction::Uniform,
            rng.gen_range(1..3),
        )
        .map_err(|e| e.to_string())?;
        worst = worst.max((f.fitted_bin_probs.iter().sum::<f64>() - 1.0).abs());
    }
    check(
        worst <= 1e-9,
        format!("bin probabilities sum off by {worst:e}"),
    )?;
    let elapsed = start.elapsed();
    within_time(elapsed, Duration::from_secs(10))?;
    Ok(format!(
        "g=1: a1 {a1_flat:.2e}, p_hat {:.4}; declining a1 {a1:.4} vs grid {oracle:.3}; sum err {worst:.1e}, {elapsed:.2?}",
        flat.p_hat
    ))
}

fn end_to_end() -> Outcome {
    let start = Instant::now();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let store_dir = dir.path().join("store");
    let synthetic = common::Synthetic::new(10);
    synthetic.write_observation(&store_dir, "synthetic");
    let mut config = PipelineConfig::default();
    config.matcher.max_disparity = 48;
    config.distances.frames = FrameSelection::All;
    let store = ObservationStore::open(&store_dir).map_err(|e| e.to_string())?;

    let outputs = [dir.path().join("run1"), dir.path().join("run2")];
    for out in &outputs {
        let report = run_pipeline(&config, &store, out).map_err(|e| e.to_string())?;
        check(
            report.is_success() && report.failed.is_empty(),
            format!("run failed: {:?}", report.failed),
        )?;
    }
    let records =
        read_distances_csv(&outputs[0].join("distances.csv")).map_err(|e| e.to_string())?;
    check(
        records.len() == 10,
        format!("{} distance records for 10 frames", records.len()),
    )?;
    let tol = f64::max(0.05, 0.02 * common::ANIMAL_DEPTH);
    let worst = records
        .iter()
        .map(|r| (r.distance - common::ANIMAL_DEPTH).abs())
        .fold(0.0, f64::max);
    check(
        worst <= tol,
        format!("worst distance error {worst:.4} m exceeds {tol} m"),
    )?;

    let mut files = Vec::new();
    let mut stack = vec![outputs[0].clone()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).map_err(|e| e.to_string())? {
            let p = entry.map_err(|e| e.to_string())?.path();
            if p.is_dir() {
                stack.push(p);
            } else {
                files.push(p.strip_prefix(&outputs[0]).unwrap().to_path_buf());
            }
        }
    }
    for f in &files {
        let a = std::fs::read(outputs[0].join(f)).map_err(|e| e.to_string())?;
        let b = std::fs::read(outputs[1].join(f)).map_err(|e| format!("{}: {e}", f.display()))?;
        check(a == b, format!("{} differs between runs", f.display()))?;
    }
    let elapsed = start.elapsed();
    within_time(elapsed, Duration::from_secs(120))?;
    Ok(format!(
        "{} records, worst error {worst:.4} m, {} files byte-identical, {elapsed:.2?}",
        records.len(),
        files.len()
    ))
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("depth formula", depth_formula),
        ("rectification", rectification),
        ("semi-global matching", sgm),
        ("optical flow", flow),
        ("temporal error", temporal),
        ("frame sampler", sampler),
        ("detection function", ctds),
        ("end-to-end", end_to_end),
    ];
    let mut failures = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        match run() {
            Ok(detail) => println!("PASS criterion {} ({name}): {detail}", i + 1),
            Err(why) => {
                failures += 1;
                println!("FAIL criterion {} ({name}): {why}", i + 1);
            }
        }
    }
    if failures > 0 {
        std::process::exit(1);
    }
}
