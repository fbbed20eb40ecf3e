//! Central finite-difference check of an analytic loss gradient.
//!
//! A pixel is skipped as a kink pixel when some absolute value in the loss
//! that depends on it (its own depth and point residuals, or the alignment and
//! regularizer arguments of the normals it feeds) changes sign, or a normal
//! changes validity, between the `+step` and `−step` evaluations. Inside such
//! an interval the central difference does not estimate a derivative.
//!
//! Outside kinks the counts behind every reduction are fixed, so the change in
//! the total equals the change in the terms that involve the pixel. Only those
//! are differenced, which keeps rounding in the rest of the map out of the
//! estimate.

use nalgebra::Point3;

use crate::camera::{back_project_unchecked, Intrinsics};
use crate::error::Result;
use crate::grid::{DepthMap, GradientMap, PointMap};
use crate::loss::{breakdown, cosine, OpLossConfig, SimilarityMode, Surface};

/// Pixels whose finite-difference derivative is at or below this magnitude
/// are not used for the relative error.
pub const MIN_FD_MAGNITUDE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// Pixel `(x, y)` where the maximum was attained.
    pub worst_pixel: Option<(usize, usize)>,
    pub checked: usize,
    /// Valid pixels skipped because the difference interval straddles a kink.
    pub excluded: usize,
    /// Valid pixels skipped because `|fd| ≤ MIN_FD_MAGNITUDE`.
    pub negligible: usize,
}

impl GradCheckReport {
    pub fn passes(&self, threshold: f64) -> bool {
        self.max_rel_error < threshold
    }
}

fn sign_code(v: f64) -> i8 {
    if v > 0.0 {
        1
    } else if v < 0.0 {
        -1
    } else {
        0
    }
}

/// Signs of every `|·|` argument touched by pixel `(x, y)`; 2 marks an
/// absent (invalid) term.
fn kink_signature(
    pred: &DepthMap,
    gt: &DepthMap,
    ps: &Surface,
    gs: &Surface,
    cfg: &OpLossConfig,
    x: usize,
    y: usize,
) -> Vec<i8> {
    let (w, h) = (pred.width(), pred.height());
    let i = y * w + x;
    let mut sig = Vec::with_capacity(4 + 18);
    if pred.is_valid(x, y) && gt.is_valid(x, y) {
        sig.push(sign_code(pred.values()[i] - gt.values()[i]));
        let d = ps.points.values()[i] - gs.points.values()[i];
        sig.extend([sign_code(d.x), sign_code(d.y), sign_code(d.z)]);
    } else {
        sig.push(2);
    }
    for vy in y.saturating_sub(1)..(y + 2).min(h) {
        for vx in x.saturating_sub(1)..(x + 2).min(w) {
            let v = vy * w + vx;
            if !ps.normals.valid_mask()[v] {
                sig.extend([2, 2]);
                continue;
            }
            let hp = &ps.normals.values()[v];
            let align = if gs.normals.valid_mask()[v] {
                match cfg.similarity_mode {
                    SimilarityMode::NormalizedAlign => {
                        cosine(hp, &gs.normals.values()[v]).map(|c| sign_code(1.0 - c))
                    }
                    SimilarityMode::RawDot => {
                        Some(sign_code(1.0 - hp.dot(&gs.normals.values()[v])))
                    }
                }
            } else {
                None
            };
            sig.push(align.unwrap_or(2));
            sig.push(if cfg.beta != 0.0 {
                sign_code(1.0 - hp.dot(hp))
            } else {
                2
            });
        }
    }
    sig
}

/// Per-term weights of the total loss at the base evaluation.
struct TermScales {
    image: f64,
    p2p: f64,
    align: f64,
    reg: f64,
}

/// Sum of the weighted loss terms that depend on pixel `(x, y)`.
#[allow(clippy::too_many_arguments)]
fn local_loss(
    pred: &DepthMap,
    gt: &DepthMap,
    ps: &Surface,
    gs: &Surface,
    cfg: &OpLossConfig,
    s: &TermScales,
    x: usize,
    y: usize,
) -> f64 {
    let (w, h) = (pred.width(), pred.height());
    let i = y * w + x;
    let mut image = 0.0;
    let mut p2p = 0.0;
    if pred.is_valid(x, y) && gt.is_valid(x, y) {
        image = (pred.values()[i] - gt.values()[i]).abs();
        let d = ps.points.values()[i] - gs.points.values()[i];
        p2p = d.x.abs() + d.y.abs() + d.z.abs();
    }
    let mut align = 0.0;
    let mut reg = 0.0;
    for vy in y.saturating_sub(1)..(y + 2).min(h) {
        for vx in x.saturating_sub(1)..(x + 2).min(w) {
            let v = vy * w + vx;
            if !ps.normals.valid_mask()[v] {
                continue;
            }
            let hp = &ps.normals.values()[v];
            if gs.normals.valid_mask()[v] {
                let hg = &gs.normals.values()[v];
                let c = match cfg.similarity_mode {
                    SimilarityMode::NormalizedAlign => cosine(hp, hg),
                    SimilarityMode::RawDot => Some(hp.dot(hg)),
                };
                if let Some(c) = c {
                    align += (1.0 - c).abs();
                }
            }
            if cfg.beta != 0.0 {
                reg += (1.0 - hp.dot(hp)).abs();
            }
        }
    }
    s.image * image + s.p2p * p2p + s.align * align + s.reg * reg
}

fn crop(d: &DepthMap, x0: usize, y0: usize, x1: usize, y1: usize) -> DepthMap {
    let mut values = Vec::with_capacity((x1 - x0) * (y1 - y0));
    for y in y0..y1 {
        values.extend_from_slice(&d.values()[y * d.width() + x0..y * d.width() + x1]);
    }
    DepthMap::new(x1 - x0, y1 - y0, values).expect("crop of a valid map")
}

/// Surface of a crop whose top-left pixel sits at `(x0, y0)` in the full map.
fn window_surface(crop: &DepthMap, k: &Intrinsics, x0: usize, y0: usize) -> Surface {
    let (w, h) = (crop.width(), crop.height());
    let mut values = Vec::with_capacity(w * h);
    let mut valid = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let d = crop.get(x, y);
            let ok = DepthMap::is_valid_value(d);
            values.push(if ok {
                back_project_unchecked((x0 + x) as f64, (y0 + y) as f64, d, k)
            } else {
                Point3::origin()
            });
            valid.push(ok);
        }
    }
    Surface::from_points(PointMap::from_parts(w, h, values, valid))
}

/// Compares `analytic` against central differences of the total loss with the
/// given step (mm) at every valid predicted pixel.
pub fn check_gradient(
    pred: &DepthMap,
    gt: &DepthMap,
    k: &Intrinsics,
    cfg: &OpLossConfig,
    analytic: &GradientMap,
    step: f64,
) -> Result<GradCheckReport> {
    pred.ensure_same_shape(gt)?;
    k.validate()?;
    cfg.validate()?;
    let gs = Surface::new(gt, k);
    let base = breakdown(pred, gt, &Surface::new(pred, k), &gs, cfg);
    let s_img = cfg.reduction.scale(base.valid_pixel_count);
    let scales = TermScales {
        image: s_img,
        p2p: cfg.lambda * cfg.alpha1 * s_img,
        align: cfg.lambda * cfg.alpha2 * cfg.reduction.scale(base.valid_normal_count),
        reg: cfg.lambda * cfg.alpha2 * cfg.beta * cfg.reduction.scale(base.reg_normal_count),
    };
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst_pixel: None,
        checked: 0,
        excluded: 0,
        negligible: 0,
    };
    let (w, h) = (pred.width(), pred.height());
    for y in 0..h {
        for x in 0..w {
            if !pred.is_valid(x, y) {
                continue;
            }
            // Normals within one pixel of (x, y) read depths at most two pixels
            // away, so a clamped 5×5 crop reproduces them exactly.
            let (x0, y0) = (x.saturating_sub(2), y.saturating_sub(2));
            let (x1, y1) = ((x + 3).min(w), (y + 3).min(h));
            let mut work = crop(pred, x0, y0, x1, y1);
            let gt_crop = crop(gt, x0, y0, x1, y1);
            let gs = window_surface(&gt_crop, k, x0, y0);
            let (cx, cy) = (x - x0, y - y0);
            let d0 = pred.get(x, y);
            let mut eval = |d: f64| {
                work.set(cx, cy, d);
                let ps = window_surface(&work, k, x0, y0);
                let local = local_loss(&work, &gt_crop, &ps, &gs, cfg, &scales, cx, cy);
                let sig = kink_signature(&work, &gt_crop, &ps, &gs, cfg, cx, cy);
                (local, sig)
            };
            let (plus, sig_plus) = eval(d0 + step);
            let (minus, sig_minus) = eval(d0 - step);
            if sig_plus != sig_minus {
                report.excluded += 1;
                continue;
            }
            let fd = (plus - minus) / (2.0 * step);
            if fd.abs() <= MIN_FD_MAGNITUDE {
                report.negligible += 1;
                continue;
            }
            let a = *analytic.get(x, y);
            let rel = (a - fd).abs() / fd.abs();
            report.checked += 1;
            // a NaN error must surface as the maximum
            if rel.is_nan() || rel > report.max_rel_error {
                report.max_rel_error = rel;
                report.worst_pixel = Some((x, y));
            }
        }
    }
    Ok(report)
}
