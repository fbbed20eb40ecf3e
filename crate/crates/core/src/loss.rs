//! Oriented-point loss and its analytic gradient with respect to predicted depth.
//!
//! ```text
//! total  = image_l1 + λ · op
//! op     = α₁ · p2p + α₂ · (align + β · reg)
//! p2p    = Σ ‖Γ⁻¹(d̂) − Γ⁻¹(d)‖₁          (pixels valid in both maps)
//! align  = Σ |1 − ⟨ĥ, h⟩|                (normals valid in both maps)
//! reg    = Σ |1 − ⟨ĥ, ĥ⟩|                (normals valid in the prediction)
//! ```
//!
//! In [`SimilarityMode::NormalizedAlign`] the alignment dot product is taken
//! between unit normals (a cosine) while the regularizer keeps the raw
//! self-dot `‖ĥ‖²`. [`SimilarityMode::RawDot`] uses raw vectors in both terms.
//! With [`Reduction::Mean`] every term is divided by its own contributing count.
//!
//! Each `|·|` uses the subgradient 0 at the kink. When `β = 0` the regularizer
//! is not evaluated and reported as 0.

use nalgebra::Vector3;

use crate::camera::{back_project_map, Intrinsics};
use crate::error::{Error, Result};
use crate::geometry::{normals_from_gradients, sobel_gradients, stencil, DEGENERATE_NORMAL_EPS};
use crate::grid::{DepthMap, GradientMap, NormalMap, PointMap, VectorGrid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SimilarityMode {
    #[default]
    NormalizedAlign,
    RawDot,
}

impl std::str::FromStr for SimilarityMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "normalized_align" => Ok(Self::NormalizedAlign),
            "raw_dot" => Ok(Self::RawDot),
            other => Err(Error::InvalidConfig(format!(
                "unknown similarity mode '{other}' (expected normalized_align or raw_dot)"
            ))),
        }
    }
}

impl std::fmt::Display for SimilarityMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::NormalizedAlign => "normalized_align",
            Self::RawDot => "raw_dot",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Reduction {
    #[default]
    Sum,
    Mean,
}

impl Reduction {
    pub(crate) fn scale(self, count: usize) -> f64 {
        match self {
            Reduction::Sum => 1.0,
            Reduction::Mean if count == 0 => 0.0,
            Reduction::Mean => 1.0 / count as f64,
        }
    }

    fn apply(self, sum: f64, count: usize) -> f64 {
        match self {
            Reduction::Sum => sum,
            Reduction::Mean if count == 0 => 0.0,
            Reduction::Mean => sum / count as f64,
        }
    }
}

impl std::str::FromStr for Reduction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sum" => Ok(Self::Sum),
            "mean" => Ok(Self::Mean),
            other => Err(Error::InvalidConfig(format!(
                "unknown reduction '{other}' (expected sum or mean)"
            ))),
        }
    }
}

impl std::fmt::Display for Reduction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Sum => "sum",
            Self::Mean => "mean",
        })
    }
}

/// Loss weights. All are dimensionless.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OpLossConfig {
    pub alpha1: f64,
    pub alpha2: f64,
    pub beta: f64,
    pub lambda: f64,
    pub similarity_mode: SimilarityMode,
    pub reduction: Reduction,
}

impl Default for OpLossConfig {
    fn default() -> Self {
        Self {
            alpha1: 1.0,
            alpha2: 1.0,
            beta: 1.0,
            lambda: 0.05,
            similarity_mode: SimilarityMode::NormalizedAlign,
            reduction: Reduction::Sum,
        }
    }
}

impl OpLossConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("alpha1", self.alpha1),
            ("alpha2", self.alpha2),
            ("beta", self.beta),
            ("lambda", self.lambda),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidConfig(format!(
                    "{name} must be finite and >= 0, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// A reduced loss term and the number of sites that contributed to it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossTerm {
    pub value: f64,
    pub count: usize,
}

impl LossTerm {
    /// True when no site contributed, so the value is a placeholder 0.
    pub fn is_empty(&self) -> bool {
        self.count == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalSimilarity {
    pub align: LossTerm,
    pub reg: LossTerm,
    pub beta: f64,
}

impl NormalSimilarity {
    pub fn combined(&self) -> f64 {
        self.align.value + self.beta * self.reg.value
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossBreakdown {
    pub p2p: f64,
    pub n2n_align: f64,
    pub n2n_reg: f64,
    pub op: f64,
    pub image_l1: f64,
    pub total: f64,
    /// Pixels valid in both maps (p2p and image terms).
    pub valid_pixel_count: usize,
    /// Normals valid in both maps (alignment term).
    pub valid_normal_count: usize,
    /// Predicted normals contributing to the regularizer.
    pub reg_normal_count: usize,
}

impl LossBreakdown {
    pub const CSV_HEADER: &'static str =
        "p2p,n2n_align,n2n_reg,op,image_l1,total,valid_pixel_count,valid_normal_count";

    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            crate::io::fmt_f64(self.p2p),
            crate::io::fmt_f64(self.n2n_align),
            crate::io::fmt_f64(self.n2n_reg),
            crate::io::fmt_f64(self.op),
            crate::io::fmt_f64(self.image_l1),
            crate::io::fmt_f64(self.total),
            self.valid_pixel_count,
            self.valid_normal_count
        )
    }
}

#[inline]
pub(crate) fn sgn(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Back-projected points, their Sobel derivatives and raw normals.
pub(crate) struct Surface {
    pub points: PointMap,
    pub gx: VectorGrid,
    pub gy: VectorGrid,
    pub normals: NormalMap,
}

impl Surface {
    pub fn new(depth: &DepthMap, k: &Intrinsics) -> Self {
        Self::from_points(back_project_map(depth, k))
    }

    pub fn from_points(points: PointMap) -> Self {
        let (gx, gy) = sobel_gradients(&points);
        let normals = normals_from_gradients(&gx, &gy);
        Self {
            points,
            gx,
            gy,
            normals,
        }
    }
}

/// Cosine between two raw normals, or `None` if either is degenerate.
/// Identical inputs give exactly 1.
#[inline]
pub(crate) fn cosine(a: &Vector3<f64>, b: &Vector3<f64>) -> Option<f64> {
    let aa = a.dot(a);
    let bb = b.dot(b);
    if aa.sqrt() <= DEGENERATE_NORMAL_EPS || bb.sqrt() <= DEGENERATE_NORMAL_EPS {
        return None;
    }
    Some(a.dot(b) / (aa * bb).sqrt())
}

fn check_inputs(pred: &DepthMap, gt: &DepthMap, k: &Intrinsics) -> Result<()> {
    pred.ensure_same_shape(gt)?;
    k.validate()
}

fn warn_empty(term: &str, count: usize) {
    if count == 0 {
        log::warn!("{term}: no contributing pixels, reporting 0");
    }
}

fn p2p_sum(pred: &Surface, gt: &Surface) -> (f64, usize) {
    let mut sum = 0.0;
    let mut count = 0;
    let (pp, pv) = (pred.points.values(), pred.points.valid_mask());
    let (gp, gv) = (gt.points.values(), gt.points.valid_mask());
    for i in 0..pp.len() {
        if pv[i] && gv[i] {
            let d = pp[i] - gp[i];
            sum += d.x.abs() + d.y.abs() + d.z.abs();
            count += 1;
        }
    }
    (sum, count)
}

fn image_l1_sum(pred: &DepthMap, gt: &DepthMap) -> (f64, usize) {
    let mut sum = 0.0;
    let mut count = 0;
    for (&a, &b) in pred.values().iter().zip(gt.values()) {
        if DepthMap::is_valid_value(a) && DepthMap::is_valid_value(b) {
            sum += (a - b).abs();
            count += 1;
        }
    }
    (sum, count)
}

fn align_sum(pred: &Surface, gt: &Surface, mode: SimilarityMode) -> (f64, usize) {
    let mut sum = 0.0;
    let mut count = 0;
    let (pn, pv) = (pred.normals.values(), pred.normals.valid_mask());
    let (gn, gv) = (gt.normals.values(), gt.normals.valid_mask());
    for i in 0..pn.len() {
        if !(pv[i] && gv[i]) {
            continue;
        }
        let c = match mode {
            SimilarityMode::NormalizedAlign => match cosine(&pn[i], &gn[i]) {
                Some(c) => c,
                None => continue,
            },
            SimilarityMode::RawDot => pn[i].dot(&gn[i]),
        };
        sum += (1.0 - c).abs();
        count += 1;
    }
    (sum, count)
}

fn reg_sum(pred: &Surface) -> (f64, usize) {
    let mut sum = 0.0;
    let mut count = 0;
    for (_, h) in pred.normals.iter_valid() {
        sum += (1.0 - h.dot(h)).abs();
        count += 1;
    }
    (sum, count)
}

pub fn point_distance_loss(
    pred: &DepthMap,
    gt: &DepthMap,
    k: &Intrinsics,
    reduction: Reduction,
) -> Result<LossTerm> {
    check_inputs(pred, gt, k)?;
    let a = back_project_map(pred, k);
    let b = back_project_map(gt, k);
    let mut sum = 0.0;
    let mut count = 0;
    for i in 0..a.len() {
        if a.valid_mask()[i] && b.valid_mask()[i] {
            let d = a.values()[i] - b.values()[i];
            sum += d.x.abs() + d.y.abs() + d.z.abs();
            count += 1;
        }
    }
    warn_empty("point distance", count);
    Ok(LossTerm {
        value: reduction.apply(sum, count),
        count,
    })
}

pub fn normal_similarity_loss(
    pred: &DepthMap,
    gt: &DepthMap,
    k: &Intrinsics,
    beta: f64,
    mode: SimilarityMode,
    reduction: Reduction,
) -> Result<NormalSimilarity> {
    check_inputs(pred, gt, k)?;
    let ps = Surface::new(pred, k);
    let gs = Surface::new(gt, k);
    Ok(normal_terms(&ps, &gs, beta, mode, reduction))
}

fn normal_terms(
    ps: &Surface,
    gs: &Surface,
    beta: f64,
    mode: SimilarityMode,
    reduction: Reduction,
) -> NormalSimilarity {
    let (align, align_count) = align_sum(ps, gs, mode);
    let (reg, reg_count) = if beta == 0.0 { (0.0, 0) } else { reg_sum(ps) };
    warn_empty("normal alignment", align_count);
    NormalSimilarity {
        align: LossTerm {
            value: reduction.apply(align, align_count),
            count: align_count,
        },
        reg: LossTerm {
            value: reduction.apply(reg, reg_count),
            count: reg_count,
        },
        beta,
    }
}

pub(crate) fn breakdown(
    pred: &DepthMap,
    gt: &DepthMap,
    ps: &Surface,
    gs: &Surface,
    cfg: &OpLossConfig,
) -> LossBreakdown {
    let (p2p, pixel_count) = p2p_sum(ps, gs);
    let (img, img_count) = image_l1_sum(pred, gt);
    debug_assert_eq!(pixel_count, img_count);
    warn_empty("point distance", pixel_count);
    let p2p = cfg.reduction.apply(p2p, pixel_count);
    let image_l1 = cfg.reduction.apply(img, img_count);
    let n2n = normal_terms(ps, gs, cfg.beta, cfg.similarity_mode, cfg.reduction);
    let op = cfg.alpha1 * p2p + cfg.alpha2 * (n2n.align.value + cfg.beta * n2n.reg.value);
    LossBreakdown {
        p2p,
        n2n_align: n2n.align.value,
        n2n_reg: n2n.reg.value,
        op,
        image_l1,
        total: image_l1 + cfg.lambda * op,
        valid_pixel_count: pixel_count,
        valid_normal_count: n2n.align.count,
        reg_normal_count: n2n.reg.count,
    }
}

pub fn op_loss(
    pred: &DepthMap,
    gt: &DepthMap,
    k: &Intrinsics,
    cfg: &OpLossConfig,
) -> Result<LossBreakdown> {
    check_inputs(pred, gt, k)?;
    cfg.validate()?;
    let ps = Surface::new(pred, k);
    let gs = Surface::new(gt, k);
    Ok(breakdown(pred, gt, &ps, &gs, cfg))
}

/// ∂total/∂d̂ for every valid predicted pixel.
pub fn op_loss_gradient(
    pred: &DepthMap,
    gt: &DepthMap,
    k: &Intrinsics,
    cfg: &OpLossConfig,
) -> Result<GradientMap> {
    loss_and_gradient(pred, gt, k, cfg).map(|(_, g)| g)
}

/// Loss breakdown and gradient from one shared evaluation of both surfaces.
pub fn loss_and_gradient(
    pred: &DepthMap,
    gt: &DepthMap,
    k: &Intrinsics,
    cfg: &OpLossConfig,
) -> Result<(LossBreakdown, GradientMap)> {
    check_inputs(pred, gt, k)?;
    cfg.validate()?;
    let ps = Surface::new(pred, k);
    let gs = Surface::new(gt, k);
    let loss = breakdown(pred, gt, &ps, &gs, cfg);

    let (w, h) = (pred.width(), pred.height());
    let n = w * h;
    let mut grad = vec![0.0; n];
    let pred_valid = pred.valid_mask();

    // image and point-distance terms: per pixel
    let s_img = cfg.reduction.scale(loss.valid_pixel_count);
    let s_p2p = cfg.lambda * cfg.alpha1 * s_img;
    let (pp, gp) = (ps.points.values(), gs.points.values());
    let gv = gs.points.valid_mask();
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            if !(pred_valid[i] && gv[i]) {
                continue;
            }
            let r = k.ray(x as f64, y as f64);
            let dp = pp[i] - gp[i];
            let dd = pred.values()[i] - gt.values()[i];
            grad[i] =
                s_img * sgn(dd) + s_p2p * (sgn(dp.x) * r.x + sgn(dp.y) * r.y + sgn(dp.z) * r.z);
        }
    }

    // normal terms: ∂L/∂ĥ per site, then pulled back through the cross product
    // and the Sobel stencil onto depth pixels
    let s_align = cfg.lambda * cfg.alpha2 * cfg.reduction.scale(loss.valid_normal_count);
    let s_reg = cfg.lambda * cfg.alpha2 * cfg.beta * cfg.reduction.scale(loss.reg_normal_count);
    let (pn, pnv) = (ps.normals.values(), ps.normals.valid_mask());
    let (gn, gnv) = (gs.normals.values(), gs.normals.valid_mask());
    let mut pulled = vec![Vector3::<f64>::zeros(); n];
    if s_align != 0.0 || s_reg != 0.0 {
        for y in 0..h {
            for x in 0..w {
                let v = y * w + x;
                if !pnv[v] {
                    continue;
                }
                let hp = &pn[v];
                let mut g = Vector3::zeros();
                if s_align != 0.0 && gnv[v] {
                    match cfg.similarity_mode {
                        SimilarityMode::NormalizedAlign => {
                            if let Some(c) = cosine(hp, &gn[v]) {
                                let norm_p = hp.norm();
                                let dc = (gn[v] / gn[v].norm() - hp * (c / norm_p)) / norm_p;
                                g -= dc * (s_align * sgn(1.0 - c));
                            }
                        }
                        SimilarityMode::RawDot => {
                            let c = hp.dot(&gn[v]);
                            g -= gn[v] * (s_align * sgn(1.0 - c));
                        }
                    }
                }
                if s_reg != 0.0 {
                    let s = hp.dot(hp);
                    g -= hp * (2.0 * s_reg * sgn(1.0 - s));
                }
                if g == Vector3::zeros() {
                    continue;
                }
                // ∂h/∂d_k = wx·(r_k × Gy) + wy·(Gx × r_k), so
                // g·∂h/∂d_k = r_k · (wx·(Gy × g) + wy·(g × Gx))
                let ax = ps.gy.values()[v].cross(&g);
                let ay = g.cross(&ps.gx.values()[v]);
                for t in stencil(x, y, w, h) {
                    pulled[t.index] += ax * t.wx + ay * t.wy;
                }
            }
        }
        for y in 0..h {
            for x in 0..w {
                let i = y * w + x;
                if pred_valid[i] && pulled[i] != Vector3::zeros() {
                    grad[i] += k.ray(x as f64, y as f64).dot(&pulled[i]);
                }
            }
        }
    }

    for (g, &ok) in grad.iter_mut().zip(&pred_valid) {
        if !ok {
            *g = 0.0;
        }
    }
    Ok((loss, GradientMap::from_parts(w, h, grad, pred_valid)))
}
