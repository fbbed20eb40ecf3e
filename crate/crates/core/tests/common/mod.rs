//! Brute-force reference implementations used as test oracles.
//!
//! Nothing here calls into the library's geometry or loss code: rays come from
//! an explicit matrix inverse, the Sobel filter runs over an explicitly padded
//! copy of the point map, and every loss term is accumulated per pixel.
#![allow(dead_code)]

use nalgebra::{Matrix3, Vector3};
use opdepth_core::{DepthMap, Intrinsics, OpLossConfig, Reduction, SimilarityMode};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn k_inverse(k: &Intrinsics) -> Matrix3<f64> {
    Matrix3::new(k.fx, k.skew, k.cx, 0.0, k.fy, k.cy, 0.0, 0.0, 1.0)
        .try_inverse()
        .unwrap()
}

pub fn valid(v: f64) -> bool {
    v.is_finite() && v > 0.0
}

pub fn ray(kinv: &Matrix3<f64>, x: usize, y: usize) -> Vector3<f64> {
    kinv * Vector3::new(x as f64, y as f64, 1.0)
}

pub fn points(d: &DepthMap, k: &Intrinsics) -> Vec<Option<Vector3<f64>>> {
    let kinv = k_inverse(k);
    let w = d.width();
    d.values()
        .iter()
        .enumerate()
        .map(|(i, &v)| valid(v).then(|| ray(&kinv, i % w, i / w) * v))
        .collect()
}

/// Sobel x/y derivatives (1/8-scaled) with replicate padding built explicitly.
pub fn sobel(
    pts: &[Option<Vector3<f64>>],
    w: usize,
    h: usize,
) -> Vec<Option<(Vector3<f64>, Vector3<f64>)>> {
    let pw = w + 2;
    let mut padded = vec![None; pw * (h + 2)];
    for py in 0..h + 2 {
        for px in 0..pw {
            let sx = px.saturating_sub(1).min(w - 1);
            let sy = py.saturating_sub(1).min(h - 1);
            padded[py * pw + px] = pts[sy * w + sx];
        }
    }
    let kx = [[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]];
    let mut out = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let mut gx = Vector3::zeros();
            let mut gy = Vector3::zeros();
            let mut ok = true;
            for r in 0..3 {
                for c in 0..3 {
                    match padded[(y + r) * pw + (x + c)] {
                        Some(p) => {
                            gx += p * (kx[r][c] / 8.0);
                            gy += p * (kx[c][r] / 8.0);
                        }
                        None => ok = false,
                    }
                }
            }
            out.push(ok.then_some((gx, gy)));
        }
    }
    out
}

pub fn raw_normals(d: &DepthMap, k: &Intrinsics) -> Vec<Option<Vector3<f64>>> {
    sobel(&points(d, k), d.width(), d.height())
        .into_iter()
        .map(|g| g.map(|(a, b)| a.cross(&b)))
        .collect()
}

/// Per-site alignment contribution `|1 − ⟨ĥ, h⟩|`, or None if the site does not contribute.
pub fn align_site(
    hp: Option<Vector3<f64>>,
    hg: Option<Vector3<f64>>,
    mode: SimilarityMode,
) -> Option<f64> {
    let (a, b) = (hp?, hg?);
    let c = match mode {
        SimilarityMode::NormalizedAlign => {
            if a.norm() <= 1e-12 || b.norm() <= 1e-12 {
                return None;
            }
            a.normalize().dot(&b.normalize())
        }
        SimilarityMode::RawDot => a.dot(&b),
    };
    Some((1.0 - c).abs())
}

#[derive(Debug, Clone, Copy, Default)]
pub struct OracleLoss {
    pub p2p: f64,
    pub image_l1: f64,
    pub align: f64,
    pub reg: f64,
    pub pixel_count: usize,
    pub align_count: usize,
    pub reg_count: usize,
}

impl OracleLoss {
    pub fn op(&self, cfg: &OpLossConfig) -> f64 {
        cfg.alpha1 * self.p2p + cfg.alpha2 * (self.align + cfg.beta * self.reg)
    }

    pub fn total(&self, cfg: &OpLossConfig) -> f64 {
        self.image_l1 + cfg.lambda * self.op(cfg)
    }
}

pub fn loss(pred: &DepthMap, gt: &DepthMap, k: &Intrinsics, cfg: &OpLossConfig) -> OracleLoss {
    let pp = points(pred, k);
    let gp = points(gt, k);
    let hp = raw_normals(pred, k);
    let hg = raw_normals(gt, k);
    let mut o = OracleLoss::default();
    for i in 0..pp.len() {
        if let (Some(a), Some(b)) = (pp[i], gp[i]) {
            o.p2p += (a - b).abs().sum();
            o.image_l1 += (pred.values()[i] - gt.values()[i]).abs();
            o.pixel_count += 1;
        }
        if let Some(t) = align_site(hp[i], hg[i], cfg.similarity_mode) {
            o.align += t;
            o.align_count += 1;
        }
        if cfg.beta != 0.0 {
            if let Some(h) = hp[i] {
                o.reg += (1.0 - h.dot(&h)).abs();
                o.reg_count += 1;
            }
        }
    }
    if cfg.reduction == Reduction::Mean {
        let div = |s: f64, n: usize| if n == 0 { 0.0 } else { s / n as f64 };
        o.p2p = div(o.p2p, o.pixel_count);
        o.image_l1 = div(o.image_l1, o.pixel_count);
        o.align = div(o.align, o.align_count);
        o.reg = div(o.reg, o.reg_count);
    }
    o
}

/// Signs of every absolute-value argument in the oracle loss, in a fixed
/// order; 2 marks an absent term.
pub fn kink_signs(pred: &DepthMap, gt: &DepthMap, k: &Intrinsics, cfg: &OpLossConfig) -> Vec<i8> {
    let sign = |v: f64| (v > 0.0) as i8 - (v < 0.0) as i8;
    let pp = points(pred, k);
    let gp = points(gt, k);
    let hp = raw_normals(pred, k);
    let hg = raw_normals(gt, k);
    let mut out = Vec::new();
    for i in 0..pp.len() {
        match (pp[i], gp[i]) {
            (Some(a), Some(b)) => {
                let d = a - b;
                out.extend([
                    sign(pred.values()[i] - gt.values()[i]),
                    sign(d.x),
                    sign(d.y),
                    sign(d.z),
                ]);
            }
            _ => out.push(2),
        }
        let c = match (hp[i], hg[i]) {
            (Some(a), Some(b)) => match cfg.similarity_mode {
                SimilarityMode::NormalizedAlign if a.norm() > 1e-12 && b.norm() > 1e-12 => {
                    Some(a.normalize().dot(&b.normalize()))
                }
                SimilarityMode::NormalizedAlign => None,
                SimilarityMode::RawDot => Some(a.dot(&b)),
            },
            _ => None,
        };
        out.push(c.map_or(2, |c| sign(1.0 - c)));
        out.push(hp[i].map_or(2, |h| sign(1.0 - h.dot(&h))));
    }
    out
}

/// A central difference of the oracle total and a bound on its rounding error.
#[derive(Debug, Clone, Copy)]
pub struct FdSample {
    pub fd: f64,
    pub noise: f64,
}

/// Central differences of the oracle total loss. Invalid pixels and pixels
/// whose ±step interval changes the sign of any absolute-value argument are `None`.
pub fn fd_gradient(
    pred: &DepthMap,
    gt: &DepthMap,
    k: &Intrinsics,
    cfg: &OpLossConfig,
    step: f64,
) -> Vec<Option<FdSample>> {
    let mut work = pred.clone();
    (0..pred.len())
        .map(|i| {
            let d0 = pred.values()[i];
            if !valid(d0) {
                return None;
            }
            work.values_mut()[i] = d0 + step;
            let plus = loss(&work, gt, k, cfg).total(cfg);
            let sig_plus = kink_signs(&work, gt, k, cfg);
            work.values_mut()[i] = d0 - step;
            let minus = loss(&work, gt, k, cfg).total(cfg);
            let sig_minus = kink_signs(&work, gt, k, cfg);
            work.values_mut()[i] = d0;
            (sig_plus == sig_minus).then(|| FdSample {
                fd: (plus - minus) / (2.0 * step),
                // every term is non-negative, so 32 ulps of the total bounds
                // the rounding in each evaluation
                noise: 32.0 * f64::EPSILON * (plus.abs() + minus.abs()) / (2.0 * step),
            })
        })
        .collect()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_intrinsics(r: &mut impl Rng, n: usize) -> Intrinsics {
    let f = r.random_range(0.8..1.6) * n as f64;
    Intrinsics::with_skew(
        f,
        f * r.random_range(0.9..1.1),
        n as f64 / 2.0 + r.random_range(-2.0..2.0),
        n as f64 / 2.0 + r.random_range(-2.0..2.0),
        r.random_range(-0.5..0.5),
    )
    .unwrap()
}

/// Random map of the given size with depths in `[lo, hi)` and roughly
/// `invalid_frac` of the pixels invalid.
pub fn random_depth(
    r: &mut impl Rng,
    w: usize,
    h: usize,
    lo: f64,
    hi: f64,
    invalid_frac: f64,
) -> DepthMap {
    let vals = (0..w * h)
        .map(|_| {
            if r.random_bool(invalid_frac) {
                f64::NAN
            } else {
                r.random_range(lo..hi)
            }
        })
        .collect();
    DepthMap::new(w, h, vals).unwrap()
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

/// A random scene of the given kind (0 plane, 1 sphere, 2 sinusoid) in front
/// of the camera.
pub fn random_scene(r: &mut impl Rng, kind: usize) -> opdepth_core::SurfaceScene {
    use nalgebra::Point3;
    use opdepth_core::SurfaceScene;
    match kind {
        0 => {
            let tilt = r.random_range(0.0..0.7f64);
            let az = r.random_range(0.0..std::f64::consts::TAU);
            SurfaceScene::Plane {
                normal: Vector3::new(tilt.sin() * az.cos(), tilt.sin() * az.sin(), tilt.cos()),
                offset: r.random_range(40.0..100.0),
            }
        }
        1 => {
            let z = r.random_range(60.0..100.0);
            SurfaceScene::Sphere {
                center: Point3::new(r.random_range(-5.0..5.0), r.random_range(-5.0..5.0), z),
                radius: z * r.random_range(0.3..0.6),
            }
        }
        _ => SurfaceScene::Sinusoid {
            z0: r.random_range(40.0..80.0),
            amplitude: r.random_range(1.0..4.0),
            omega_x: r.random_range(0.1..0.5),
            omega_y: r.random_range(0.1..0.5),
        },
    }
}

/// Target rendered from a random scene, and a prediction that adds a smooth
/// random perturbation (up to ~2 mm) plus Gaussian noise of `sigma` mm.
pub fn random_pair(
    r: &mut impl Rng,
    kind: usize,
    n: usize,
    sigma: f64,
) -> (DepthMap, DepthMap, Intrinsics) {
    let k = random_intrinsics(r, n);
    let scene = random_scene(r, kind);
    let gt = opdepth_core::render_depth(&scene, &k, n, n).unwrap();
    let (amp, shift) = (r.random_range(0.3..2.0), r.random_range(-1.0..1.0));
    let (fx, fy) = (r.random_range(0.05..0.4), r.random_range(0.05..0.4));
    let (px, py) = (r.random_range(0.0..6.3), r.random_range(0.0..6.3));
    let mut smooth = gt.clone();
    for (i, v) in smooth.values_mut().iter_mut().enumerate() {
        let (x, y) = ((i % n) as f64, (i / n) as f64);
        *v += shift + amp * (fx * x + px).sin() * (fy * y + py).cos();
    }
    let pred = opdepth_core::add_noise(
        &smooth,
        &opdepth_core::NoiseSpec {
            sigma,
            seed: r.random(),
        },
    );
    (pred, gt, k)
}

/// Fourth-order central difference of the oracle total loss at pixel `i`.
pub fn fd4_at(
    pred: &DepthMap,
    gt: &DepthMap,
    k: &Intrinsics,
    cfg: &OpLossConfig,
    i: usize,
    step: f64,
) -> f64 {
    let mut work = pred.clone();
    let d0 = pred.values()[i];
    let mut at = |d: f64| {
        work.values_mut()[i] = d;
        loss(&work, gt, k, cfg).total(cfg)
    };
    let (p1, m1, p2, m2) = (
        at(d0 + step),
        at(d0 - step),
        at(d0 + 2.0 * step),
        at(d0 - 2.0 * step),
    );
    (8.0 * (p1 - m1) - (p2 - m2)) / (12.0 * step)
}
