//! Ray-traced stereo observation: textured ground plane and back wall with
//! a box "animal" whose front face sits at a known depth, seen by a rig with
//! lens distortion and a small relative rotation.
#![allow(dead_code)]

use std::path::Path;

use nalgebra::{Matrix3, Rotation3, Vector3};
use stereotrap::calibration::save_calibration;
use stereotrap::detections::{DetectionEntry, DetectionsFile, FrameDetections, MaskRle};
use stereotrap::io::write_frame;
use stereotrap_core::distance::BinaryMask;
use stereotrap_core::geometry::{
    compute_rectification, CalibrationSet, Extrinsics, Intrinsics, RectificationMap, Side,
};
use stereotrap_core::raster::Raster;

pub const WIDTH: usize = 320;
pub const HEIGHT: usize = 240;
pub const ANIMAL_DEPTH: f64 = 6.0;
const BOX_HALF_WIDTH: f64 = 0.5;
const BOX_TOP: f64 = 0.2;
const GROUND: f64 = 1.2;
const BOX_DEPTH: f64 = 0.8;
const WALL: f64 = 12.0;
const SUPERSAMPLE: usize = 3;

pub fn calibration() -> CalibrationSet {
    let left = Intrinsics {
        k1: -0.03,
        k2: 0.002,
        ..Intrinsics::pinhole(280.0, 280.5, 161.0, 119.0, WIDTH, HEIGHT)
    };
    let right = Intrinsics {
        k1: -0.025,
        p1: 0.0005,
        ..Intrinsics::pinhole(282.0, 281.0, 158.5, 121.0, WIDTH, HEIGHT)
    };
    let rotation: Matrix3<f64> = *Rotation3::from_euler_angles(0.002, 0.008, 0.001).matrix();
    CalibrationSet {
        left,
        right,
        stereo: Extrinsics::new(rotation, Vector3::new(-0.3, 0.002, 0.001)).unwrap(),
    }
}

/// Lattice value noise with smooth interpolation, values in `[0, 1]`.
fn value_noise(x: f64, y: f64, seed: u64) -> f64 {
    fn lattice(i: i64, j: i64, seed: u64) -> f64 {
        let mut h = (i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
            ^ (j as u64).wrapping_mul(0xC2B2_AE3D_27D4_EB4F)
            ^ seed;
        h ^= h >> 33;
        h = h.wrapping_mul(0xFF51_AFD7_ED55_8CCD);
        h ^= h >> 33;
        (h >> 11) as f64 / (1u64 << 53) as f64
    }
    let (i, j) = (x.floor(), y.floor());
    let (fx, fy) = (x - i, y - j);
    let s = |t: f64| t * t * (3.0 - 2.0 * t);
    let (sx, sy) = (s(fx), s(fy));
    let (i, j) = (i as i64, j as i64);
    let a = lattice(i, j, seed) * (1.0 - sx) + lattice(i + 1, j, seed) * sx;
    let b = lattice(i, j + 1, seed) * (1.0 - sx) + lattice(i + 1, j + 1, seed) * sx;
    a * (1.0 - sy) + b * sy
}

fn texture(u: f64, v: f64, cell: f64, seed: u64) -> f64 {
    let n = 0.65 * value_noise(u / cell, v / cell, seed)
        + 0.35 * value_noise(2.7 * u / cell, 2.7 * v / cell, seed ^ 0xABCD);
    0.1 + 0.8 * n
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Surface {
    Front,
    Box,
    Wall,
    Ground,
    Sky,
}

pub struct Scene {
    /// Horizontal center of the box in metres.
    pub box_x: f64,
}

impl Scene {
    /// Nearest hit along `o + t d`, in left-camera coordinates.
    pub fn trace(&self, o: Vector3<f64>, d: Vector3<f64>) -> (Surface, f64, Vector3<f64>) {
        let mut best = (Surface::Sky, f64::INFINITY);
        let lo = Vector3::new(self.box_x - BOX_HALF_WIDTH, BOX_TOP, ANIMAL_DEPTH);
        let hi = Vector3::new(
            self.box_x + BOX_HALF_WIDTH,
            GROUND,
            ANIMAL_DEPTH + BOX_DEPTH,
        );
        let (mut t0, mut t1, mut axis) = (0.0f64, f64::INFINITY, usize::MAX);
        let mut hit_box = true;
        for k in 0..3 {
            if d[k].abs() < 1e-15 {
                if o[k] < lo[k] || o[k] > hi[k] {
                    hit_box = false;
                }
                continue;
            }
            let (a, b) = ((lo[k] - o[k]) / d[k], (hi[k] - o[k]) / d[k]);
            let (near, far) = if a < b { (a, b) } else { (b, a) };
            if near > t0 {
                t0 = near;
                axis = k;
            }
            t1 = t1.min(far);
        }
        if hit_box && t0 <= t1 && t0 > 0.0 {
            let front = axis == 2 && d.z > 0.0;
            best = (if front { Surface::Front } else { Surface::Box }, t0);
        }
        if d.z > 0.0 {
            let t = (WALL - o.z) / d.z;
            if t > 0.0 && t < best.1 {
                best = (Surface::Wall, t);
            }
        }
        if d.y > 0.0 {
            let t = (GROUND - o.y) / d.y;
            if t > 0.0 && t < best.1 {
                best = (Surface::Ground, t);
            }
        }
        (best.0, best.1, o + d * best.1)
    }

    fn shade(&self, o: Vector3<f64>, d: Vector3<f64>) -> f64 {
        let (surface, _, p) = self.trace(o, d);
        match surface {
            // texture travels with the box
            Surface::Front => texture(p.x - self.box_x, p.y, 0.06, 1),
            Surface::Box => 0.8 * texture(p.x - self.box_x + p.z, p.y + p.z, 0.06, 2),
            Surface::Wall => texture(p.x, p.y, 0.12, 3),
            Surface::Ground => texture(p.x, p.z, 0.1, 4),
            Surface::Sky => 0.5,
        }
    }
}

/// Sub-pixel viewing rays of one camera, in its own frame.
fn ray_table(intr: &Intrinsics) -> Vec<Vector3<f64>> {
    let mut rays = Vec::with_capacity(WIDTH * HEIGHT * SUPERSAMPLE * SUPERSAMPLE);
    for y in 0..HEIGHT {
        for x in 0..WIDTH {
            for sy in 0..SUPERSAMPLE {
                for sx in 0..SUPERSAMPLE {
                    let px = x as f64 + (sx as f64 + 0.5) / SUPERSAMPLE as f64 - 0.5;
                    let py = y as f64 + (sy as f64 + 0.5) / SUPERSAMPLE as f64 - 0.5;
                    let [nx, ny] = intr.undistort_normalized([px, py]).unwrap();
                    rays.push(Vector3::new(nx, ny, 1.0));
                }
            }
        }
    }
    rays
}

pub struct Synthetic {
    pub calibration: CalibrationSet,
    pub map: RectificationMap,
    pub box_positions: Vec<f64>,
    left_rays: Vec<Vector3<f64>>,
    right_rays: Vec<Vector3<f64>>,
}

impl Synthetic {
    pub fn new(n_frames: usize) -> Self {
        let calibration = calibration();
        Self {
            map: compute_rectification(&calibration).unwrap(),
            box_positions: (0..n_frames).map(|n| -0.4 + 0.04 * n as f64).collect(),
            left_rays: ray_table(&calibration.left),
            right_rays: ray_table(&calibration.right),
            calibration,
        }
    }

    fn render(
        &self,
        scene: &Scene,
        rays: &[Vector3<f64>],
        origin: Vector3<f64>,
        to_world: &Matrix3<f64>,
    ) -> Vec<f64> {
        let per = SUPERSAMPLE * SUPERSAMPLE;
        rays.chunks(per)
            .map(|c| {
                c.iter()
                    .map(|r| scene.shade(origin, to_world * r))
                    .sum::<f64>()
                    / per as f64
            })
            .collect()
    }

    /// Side-by-side frame `n`: left view in the first half.
    pub fn frame(&self, n: usize) -> Raster {
        let scene = Scene {
            box_x: self.box_positions[n],
        };
        let r = &self.calibration.stereo.rotation;
        let t = &self.calibration.stereo.translation;
        let left = self.render(
            &scene,
            &self.left_rays,
            Vector3::zeros(),
            &Matrix3::identity(),
        );
        let right = self.render(
            &scene,
            &self.right_rays,
            -(r.transpose() * t),
            &r.transpose(),
        );
        Raster::from_fn(2 * WIDTH, HEIGHT, |x, y| {
            Some(if x < WIDTH {
                left[y * WIDTH + x]
            } else {
                right[y * WIDTH + x - WIDTH]
            } as f32)
        })
    }

    /// Rectified-left pixels that see the box front, with their rectified
    /// depth.
    pub fn front_face(&self, n: usize) -> (BinaryMask, Vec<f64>) {
        let scene = Scene {
            box_x: self.box_positions[n],
        };
        let rig = self.map.rig();
        let rot = self.map.rotation(Side::Left);
        let mut depths = Vec::new();
        let mask = BinaryMask::from_fn(WIDTH, HEIGHT, |x, y| {
            let ray = Vector3::new(
                (x as f64 - rig.cx) / rig.fx,
                (y as f64 - rig.cy) / rig.fx,
                1.0,
            );
            let (s, _, p) = scene.trace(Vector3::zeros(), rot.transpose() * ray);
            let hit = s == Surface::Front;
            if hit {
                depths.push((rot * p).z);
            }
            hit
        });
        (mask, depths)
    }

    /// Detections for every frame: masks on even frames, boxes only on odd.
    pub fn detections(&self, video_id: &str) -> DetectionsFile {
        let frames = (0..self.box_positions.len())
            .map(|n| {
                let (mask, _) = self.front_face(n);
                let [x0, y0, x1, y1] = mask.bounds().unwrap();
                DetectionEntry {
                    bbox: [
                        x0 as f64,
                        y0 as f64,
                        (x1 - x0 + 1) as f64,
                        (y1 - y0 + 1) as f64,
                    ],
                    confidence: 0.9,
                    category: "animal".into(),
                    mask_rle: (n % 2 == 0).then(|| MaskRle::from_mask(&mask)),
                }
            })
            .enumerate()
            .map(|(n, d)| FrameDetections {
                frame_index: n,
                detections: vec![d],
            })
            .collect();
        DetectionsFile {
            video_id: video_id.into(),
            frames,
        }
    }

    /// Writes `root/<id>/frame_NNN.png`, detections and calibration.
    pub fn write_observation(&self, root: &Path, id: &str) {
        let dir = root.join(id);
        std::fs::create_dir_all(&dir).unwrap();
        for n in 0..self.box_positions.len() {
            write_frame(&dir.join(format!("frame_{n:03}.png")), &self.frame(n)).unwrap();
        }
        let dets = serde_json::to_string_pretty(&self.detections(id)).unwrap();
        std::fs::write(dir.join("detections.json"), dets).unwrap();
        save_calibration(&dir.join("calibration.json"), &self.calibration).unwrap();
    }
}
