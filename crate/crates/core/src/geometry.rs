//! Sobel derivatives of point maps and cross-product surface normals.
//!
//! The derivative stencil is the 3×3 Sobel pair scaled by 1/8,
//!
//! ```text
//! Sx = 1/8 · [-1 0 1]      Sy = Sxᵀ
//!            [-2 0 2]
//!            [-1 0 1]
//! ```
//!
//! applied as a correlation, so both kernels return the exact unit-spacing
//! derivative on affine inputs. Out-of-range neighbours replicate the nearest
//! border pixel. The raw normal at a pixel is `Gx × Gy`; for a fronto-parallel
//! surface it points along +z.

use nalgebra::Vector3;

use crate::camera::{back_project_map, Intrinsics};
use crate::grid::{DepthMap, NormalMap, PointMap, VectorGrid};

/// Cross products with a norm at or below this (mm²) have no usable direction.
pub const DEGENERATE_NORMAL_EPS: f64 = 1e-12;

const SMOOTH: [f64; 3] = [1.0, 2.0, 1.0];
const DIFF: [f64; 3] = [-1.0, 0.0, 1.0];

/// One tap of the clamped 3×3 stencil: source pixel index and its weights in
/// the x- and y-derivative kernels.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Tap {
    pub index: usize,
    pub wx: f64,
    pub wy: f64,
}

/// Taps of the stencil centred on `(x, y)` with replicate padding, in a fixed
/// row-major order. Clamped taps may repeat an index.
#[inline]
pub(crate) fn stencil(x: usize, y: usize, width: usize, height: usize) -> [Tap; 9] {
    let mut taps = [Tap {
        index: 0,
        wx: 0.0,
        wy: 0.0,
    }; 9];
    let mut t = 0;
    for (j, dy) in [-1isize, 0, 1].into_iter().enumerate() {
        let yy = (y as isize + dy).clamp(0, height as isize - 1) as usize;
        for (i, dx) in [-1isize, 0, 1].into_iter().enumerate() {
            let xx = (x as isize + dx).clamp(0, width as isize - 1) as usize;
            taps[t] = Tap {
                index: yy * width + xx,
                wx: SMOOTH[j] * DIFF[i] / 8.0,
                wy: DIFF[j] * SMOOTH[i] / 8.0,
            };
            t += 1;
        }
    }
    taps
}

/// Sobel derivatives along x and y of every channel of `points`.
///
/// A derivative is valid only if every pixel of its (clamped) 3×3 neighbourhood is valid.
pub fn sobel_gradients(points: &PointMap) -> (VectorGrid, VectorGrid) {
    let (w, h) = (points.width(), points.height());
    let src = points.values();
    let mask = points.valid_mask();
    let mut gx = Vec::with_capacity(w * h);
    let mut gy = Vec::with_capacity(w * h);
    let mut valid = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let taps = stencil(x, y, w, h);
            if taps.iter().all(|t| mask[t.index]) {
                let mut ax = Vector3::zeros();
                let mut ay = Vector3::zeros();
                for t in &taps {
                    let p = src[t.index].coords;
                    ax += p * t.wx;
                    ay += p * t.wy;
                }
                gx.push(ax);
                gy.push(ay);
                valid.push(true);
            } else {
                gx.push(Vector3::zeros());
                gy.push(Vector3::zeros());
                valid.push(false);
            }
        }
    }
    (
        VectorGrid::from_parts(w, h, gx, valid.clone()),
        VectorGrid::from_parts(w, h, gy, valid),
    )
}

/// Raw normals `Gx × Gy` of the back-projected depth map.
///
/// Degenerate cross products stay valid here; [`unit_normals`] drops them.
pub fn estimate_normals(depth: &DepthMap, k: &Intrinsics) -> NormalMap {
    let points = back_project_map(depth, k);
    let (gx, gy) = sobel_gradients(&points);
    normals_from_gradients(&gx, &gy)
}

pub(crate) fn normals_from_gradients(gx: &VectorGrid, gy: &VectorGrid) -> NormalMap {
    let normals = gx
        .values()
        .iter()
        .zip(gy.values())
        .zip(gx.valid_mask())
        .map(|((a, b), &ok)| if ok { a.cross(b) } else { Vector3::zeros() })
        .collect();
    NormalMap::from_parts(gx.width(), gx.height(), normals, gx.valid_mask().to_vec())
}

/// Normalizes every usable normal; degenerate ones (‖h‖ ≤ ε) become invalid.
pub fn unit_normals(normals: &NormalMap) -> NormalMap {
    let mut out = normals.clone();
    let (values, valid) = out.parts_mut();
    for (v, ok) in values.iter_mut().zip(valid.iter_mut()) {
        if !*ok {
            continue;
        }
        match unit(v) {
            Some(u) => *v = u,
            None => {
                *v = Vector3::zeros();
                *ok = false;
            }
        }
    }
    out
}

/// `h / ‖h‖` when `‖h‖ > ε`.
#[inline]
pub fn unit(h: &Vector3<f64>) -> Option<Vector3<f64>> {
    let n = h.norm();
    (n > DEGENERATE_NORMAL_EPS).then(|| h / n)
}

/// Negates normals with a positive z component so they face the camera.
/// Only meant for export.
pub fn flip_to_camera(normals: &NormalMap) -> NormalMap {
    let mut out = normals.clone();
    let (values, _) = out.parts_mut();
    for v in values.iter_mut() {
        if v.z > 0.0 {
            *v = -*v;
        }
    }
    out
}

/// Angle in degrees between two directions, ignoring their sign.
pub fn unsigned_angle_deg(a: &Vector3<f64>, b: &Vector3<f64>) -> f64 {
    let c = a.dot(b) / (a.norm() * b.norm());
    c.abs().min(1.0).acos().to_degrees()
}
