mod common;

use common::Texture;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stereotrap_core::flow::{estimate_flow, FlowField};
use stereotrap_core::quality::{temporal_error, PixelNormalization};
use stereotrap_core::raster::Raster;
use stereotrap_core::Error;

/// Independent bilinear lookup on a plain NaN-coded grid.
fn lookup(grid: &[Vec<f64>], x: f64, y: f64) -> Option<f64> {
    let h = grid.len();
    let w = grid[0].len();
    if x < 0.0 || y < 0.0 || x > (w - 1) as f64 || y > (h - 1) as f64 {
        return None;
    }
    let x0 = x.floor() as usize;
    let y0 = y.floor() as usize;
    let (fx, fy) = (x - x0 as f64, y - y0 as f64);
    let mut acc = 0.0;
    for (yy, wy) in [(y0, 1.0 - fy), (y0 + 1, fy)] {
        for (xx, wx) in [(x0, 1.0 - fx), (x0 + 1, fx)] {
            if wx * wy == 0.0 {
                continue;
            }
            let v = grid[yy][xx];
            if v.is_nan() {
                return None;
            }
            acc += wx * wy * v;
        }
    }
    Some(acc)
}

fn reference_e_t(frames: &[Vec<Vec<f64>>], flows: &[Vec<Vec<[f64; 2]>>]) -> f64 {
    let mut sum = 0.0;
    let mut count = 0usize;
    for n in 1..frames.len() {
        for (y, row) in frames[n].iter().enumerate() {
            for (x, &a) in row.iter().enumerate() {
                let m = flows[n - 1][y][x];
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

#[test]
fn matches_direct_double_loop() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (w, h) = (16, 16);
    for _ in 0..5 {
        let frames: Vec<Vec<Vec<f64>>> = (0..4)
            .map(|_| {
                (0..h)
                    .map(|_| {
                        (0..w)
                            .map(|_| {
                                if rng.gen::<f64>() < 0.1 {
                                    f64::NAN
                                } else {
                                    (rng.gen::<f32>() * 40.0) as f64
                                }
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect();
        let flows: Vec<Vec<Vec<[f64; 2]>>> = (0..3)
            .map(|_| {
                (0..h)
                    .map(|_| {
                        (0..w)
                            .map(|_| {
                                [
                                    rng.gen_range(-3.0f32..3.0) as f64,
                                    rng.gen_range(-3.0f32..3.0) as f64,
                                ]
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect();

        let rasters: Vec<Raster> = frames
            .iter()
            .map(|f| {
                Raster::from_vec(w, h, f.iter().flatten().map(|v| *v as f32).collect()).unwrap()
            })
            .collect();
        let fields: Vec<FlowField> = flows
            .iter()
            .map(|f| FlowField::from_fn(w, h, |x, y| Some([f[y][x][0] as f32, f[y][x][1] as f32])))
            .collect();
        let got = temporal_error(&rasters, &fields, PixelNormalization::ValidOnly).unwrap();
        let expect = reference_e_t(&frames, &flows);
        assert!((got.e_t - expect).abs() < 1e-9, "{} vs {}", got.e_t, expect);
    }
}

#[test]
fn static_sequence_has_zero_error() {
    let d = Raster::from_fn(20, 10, |x, y| Some((x + 2 * y) as f32 * 0.5));
    let frames = vec![d.clone(), d.clone(), d];
    let flows = vec![FlowField::zero(20, 10); 2];
    assert_eq!(
        temporal_error(&frames, &flows, PixelNormalization::ValidOnly)
            .unwrap()
            .e_t,
        0.0
    );
}

#[test]
fn alternating_offset_gives_offset() {
    let c = 0.75f32;
    let frames: Vec<Raster> = (0..6)
        .map(|n| {
            Raster::from_fn(12, 9, |x, _| {
                Some(x as f32 + if n % 2 == 1 { c } else { 0.0 })
            })
        })
        .collect();
    let flows = vec![FlowField::zero(12, 9); 5];
    let r = temporal_error(&frames, &flows, PixelNormalization::ValidOnly).unwrap();
    assert!((r.e_t - c as f64).abs() < 1e-12);
    assert!(r
        .per_frame_errors
        .iter()
        .all(|e| (e.unwrap() - c as f64).abs() < 1e-12));
    assert_eq!(r.valid_pixel_fraction, 1.0);
}

#[test]
fn linear_in_disparity_scale() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let frames: Vec<Raster> = (0..3)
        .map(|_| Raster::from_fn(10, 10, |_, _| Some(rng.gen_range(0.0f32..8.0))))
        .collect();
    let flows: Vec<FlowField> = (0..2)
        .map(|_| {
            FlowField::from_fn(10, 10, |_, _| {
                Some([rng.gen_range(-1.0f32..1.0), rng.gen_range(-1.0f32..1.0)])
            })
        })
        .collect();
    let scaled: Vec<Raster> = frames
        .iter()
        .map(|f| f.map_valid(|v| Some(v * 4.0)))
        .collect();
    let a = temporal_error(&frames, &flows, PixelNormalization::ValidOnly)
        .unwrap()
        .e_t;
    let b = temporal_error(&scaled, &flows, PixelNormalization::ValidOnly)
        .unwrap()
        .e_t;
    assert!((b - 4.0 * a).abs() < 1e-9 * b.max(1.0));
}

#[test]
fn rigid_motion_with_estimated_flow_is_small() {
    // disparity painted on a surface that slides 2 px per frame
    let tex = Texture::new(8);
    let (w, h) = (96, 80);
    let images: Vec<Raster> = (0..5)
        .map(|n| tex.render(w, h, 2.0 * n as f64, 0.0, 1.0))
        .collect();
    let disparities: Vec<Raster> = images
        .iter()
        .map(|im| im.map_valid(|v| Some(20.0 + 10.0 * v)))
        .collect();
    let flows: Vec<FlowField> = images
        .windows(2)
        .map(|p| estimate_flow(&p[1], &p[0]).unwrap())
        .collect();
    let r = temporal_error(&disparities, &flows, PixelNormalization::ValidOnly).unwrap();
    assert!(r.e_t < 0.05, "E_t = {}", r.e_t);
}

#[test]
fn all_invalid_is_an_error() {
    let frames = vec![Raster::invalid(4, 4), Raster::invalid(4, 4)];
    let flows = vec![FlowField::zero(4, 4)];
    assert_eq!(
        temporal_error(&frames, &flows, PixelNormalization::ValidOnly),
        Err(Error::NoValidPixels)
    );
    let r = temporal_error(&frames, &flows, PixelNormalization::AllPixels).unwrap();
    assert_eq!(r.e_t, 0.0);
}

#[test]
fn rigid_motion_with_exact_flow_is_small() {
    let tex = Texture::new(21);
    let frames: Vec<Raster> = (0..6)
        .map(|n| {
            tex.render(64, 48, 2.0 * n as f64, 0.0, 1.0)
                .map_valid(|v| Some(10.0 + 30.0 * v))
        })
        .collect();
    let flows = vec![FlowField::constant(64, 48, [2.0, 0.0]); 5];
    let r = temporal_error(&frames, &flows, PixelNormalization::ValidOnly).unwrap();
    assert!(r.e_t < 0.05, "E_t = {}", r.e_t);
}
