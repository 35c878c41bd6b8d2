use alloc::vec::Vec;

use nalgebra::{DMatrix, Matrix3, Matrix4, Vector3, Vector4};

use super::Extrinsics;
use crate::error::{Error, Result};
#[allow(unused_imports)]
use crate::math::Float64Ext;

/// A point seen in both views, in normalized camera coordinates
/// (`K^-1 * pixel`, distortion removed).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correspondence {
    pub left: [f64; 2],
    pub right: [f64; 2],
}

#[derive(Debug, Clone, PartialEq)]
pub struct EssentialEstimate {
    /// Rotation and unit-norm translation, `X_right = R * X_left + t`.
    pub extrinsics: Extrinsics,
    pub essential: Matrix3<f64>,
    /// RMS Sampson distance of the correspondences to the final model, in
    /// normalized coordinates.
    pub residual: f64,
    /// Number of correspondences triangulated in front of both cameras.
    pub points_in_front: usize,
}

const MIN_POINTS: usize = 8;

/// Similarity transform moving the centroid to the origin with mean
/// distance sqrt(2).
fn normalizing_transform<'a>(
    points: impl Iterator<Item = &'a [f64; 2]> + Clone,
) -> Result<Matrix3<f64>> {
    let n = points.clone().count() as f64;
    let (sx, sy) = points
        .clone()
        .fold((0.0, 0.0), |(ax, ay), p| (ax + p[0], ay + p[1]));
    let (mx, my) = (sx / n, sy / n);
    let mean_dist = points
        .map(|p| ((p[0] - mx).powi(2) + (p[1] - my).powi(2)).sqrt())
        .sum::<f64>()
        / n;
    if !(mean_dist > 1e-12) {
        return Err(Error::DegenerateConfiguration);
    }
    let s = core::f64::consts::SQRT_2 / mean_dist;
    Ok(Matrix3::new(
        s,
        0.0,
        -s * mx,
        0.0,
        s,
        -s * my,
        0.0,
        0.0,
        1.0,
    ))
}

fn apply(t: &Matrix3<f64>, p: &[f64; 2]) -> Vector3<f64> {
    t * Vector3::new(p[0], p[1], 1.0)
}

/// Linear triangulation; returns the point in left-camera coordinates.
fn triangulate(
    rotation: &Matrix3<f64>,
    translation: &Vector3<f64>,
    c: &Correspondence,
) -> Option<Vector3<f64>> {
    let mut a = Matrix4::<f64>::zeros();
    let p1 = nalgebra::Matrix3x4::new(1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0);
    let mut p2 = nalgebra::Matrix3x4::zeros();
    p2.fixed_view_mut::<3, 3>(0, 0).copy_from(rotation);
    p2.set_column(3, translation);
    for (row, (p, cam)) in [(&c.left, &p1), (&c.right, &p2)].into_iter().enumerate() {
        a.set_row(2 * row, &(cam.row(2) * p[0] - cam.row(0)));
        a.set_row(2 * row + 1, &(cam.row(2) * p[1] - cam.row(1)));
    }
    let svd = a.svd(false, true);
    let v_t = svd.v_t?;
    let (idx, _) = svd.singular_values.argmin();
    let x: Vector4<f64> = v_t.row(idx).transpose();
    if x.w.abs() < 1e-15 {
        return None;
    }
    Some(x.xyz() / x.w)
}

fn sampson(e: &Matrix3<f64>, c: &Correspondence) -> f64 {
    let x1 = Vector3::new(c.left[0], c.left[1], 1.0);
    let x2 = Vector3::new(c.right[0], c.right[1], 1.0);
    let ex1 = e * x1;
    let etx2 = e.transpose() * x2;
    let num = x2.dot(&ex1);
    let den = ex1.x * ex1.x + ex1.y * ex1.y + etx2.x * etx2.x + etx2.y * etx2.y;
    if den <= 0.0 {
        return 0.0;
    }
    num * num / den
}

fn skew(t: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -t.z, t.y, t.z, 0.0, -t.x, -t.y, t.x, 0.0)
}

/// Normalized eight-point estimate of the relative pose. The four
/// decompositions of the essential matrix are disambiguated by counting
/// triangulated points in front of both cameras.
pub fn estimate_essential_8pt(correspondences: &[Correspondence]) -> Result<EssentialEstimate> {
    let n = correspondences.len();
    if n < MIN_POINTS {
        return Err(Error::InsufficientPoints {
            required: MIN_POINTS,
            got: n,
        });
    }
    let t1 = normalizing_transform(correspondences.iter().map(|c| &c.left))?;
    let t2 = normalizing_transform(correspondences.iter().map(|c| &c.right))?;

    // x2^T E x1 = 0, one row per correspondence; zero rows pad to 9 so the
    // SVD exposes the full right null space
    let rows = n.max(9);
    let mut a = DMatrix::<f64>::zeros(rows, 9);
    for (i, c) in correspondences.iter().enumerate() {
        let p1 = apply(&t1, &c.left);
        let p2 = apply(&t2, &c.right);
        for r in 0..3 {
            for k in 0..3 {
                a[(i, 3 * r + k)] = p2[r] * p1[k];
            }
        }
    }
    let svd = a.svd(false, true);
    let v_t = svd.v_t.ok_or(Error::DegenerateConfiguration)?;
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    let largest = svd.singular_values[order[0]];
    if !(largest > 0.0) || svd.singular_values[order[7]] < 1e-10 * largest {
        return Err(Error::DegenerateConfiguration);
    }
    let null = v_t.row(order[8]);
    let e_norm = Matrix3::from_fn(|r, k| null[3 * r + k]);
    let e_raw = t2.transpose() * e_norm * t1;

    let svd = e_raw.svd(true, true);
    let (mut u, mut v_t) = (
        svd.u.ok_or(Error::DegenerateConfiguration)?,
        svd.v_t.ok_or(Error::DegenerateConfiguration)?,
    );
    // nalgebra does not sort 3x3 singular values; move the smallest last
    let (smallest, _) = svd.singular_values.argmin();
    if smallest != 2 {
        u.swap_columns(smallest, 2);
        v_t.swap_rows(smallest, 2);
    }
    if u.determinant() < 0.0 {
        u.column_mut(2).neg_mut();
    }
    if v_t.determinant() < 0.0 {
        v_t.row_mut(2).neg_mut();
    }
    let w = Matrix3::new(0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0);
    let t_dir: Vector3<f64> = u.column(2).into_owned();
    let candidates = [
        (u * w * v_t, t_dir),
        (u * w * v_t, -t_dir),
        (u * w.transpose() * v_t, t_dir),
        (u * w.transpose() * v_t, -t_dir),
    ];
    let mut best: Option<(usize, Matrix3<f64>, Vector3<f64>)> = None;
    for (r, t) in candidates {
        let in_front = correspondences
            .iter()
            .filter(|c| match triangulate(&r, &t, c) {
                Some(x) => x.z > 0.0 && (r * x + t).z > 0.0,
                None => false,
            })
            .count();
        if best.as_ref().is_none_or(|(b, _, _)| in_front > *b) {
            best = Some((in_front, r, t));
        }
    }
    let (points_in_front, rotation, translation) = best.expect("four candidates");
    let essential = skew(&translation) * rotation;
    let residual = (correspondences
        .iter()
        .map(|c| sampson(&essential, c))
        .sum::<f64>()
        / n as f64)
        .sqrt();
    Ok(EssentialEstimate {
        extrinsics: Extrinsics::new(rotation, translation)
            .map_err(|_| Error::DegenerateConfiguration)?,
        essential,
        residual,
        points_in_front,
    })
}
