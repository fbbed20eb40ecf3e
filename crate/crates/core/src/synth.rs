//! Analytic test scenes rendered to depth maps, with exact normals and seeded noise.
//!
//! The sinusoid is a depth field over pixel coordinates,
//! `z(x, y) = z0 + a · sin(ωx·x) · sin(ωy·y)`, so its camera-space surface is
//! `P(x, y) = z(x, y) · K⁻¹[x, y, 1]ᵀ`. Its normal is the cross product of the
//! parametric tangents `∂P/∂x` and `∂P/∂y`, which equals
//! `(−∂z/∂X, −∂z/∂Y, 1)` up to scale for the surface written as a graph over
//! camera-space X, Y.

use nalgebra::{Point3, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::camera::{project, Intrinsics};
use crate::error::{Error, Result};
use crate::geometry::unsigned_angle_deg;
use crate::grid::{DepthMap, NormalMap};

/// Distance (mm) a point may lie off the surface and still get an analytic normal.
pub const ON_SURFACE_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SurfaceScene {
    /// Points `p` with `normal · p = offset`.
    Plane {
        normal: Vector3<f64>,
        offset: f64,
    },
    Sphere {
        center: Point3<f64>,
        radius: f64,
    },
    /// Angular frequencies in rad/pixel.
    Sinusoid {
        z0: f64,
        amplitude: f64,
        omega_x: f64,
        omega_y: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    /// Standard deviation in mm.
    pub sigma: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma.is_finite() && self.sigma >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "noise sigma must be finite and >= 0, got {}",
                self.sigma
            )));
        }
        Ok(())
    }
}

impl SurfaceScene {
    pub fn validate(&self) -> Result<()> {
        match *self {
            SurfaceScene::Plane { normal, offset } => {
                if !(normal.iter().all(|v| v.is_finite()) && offset.is_finite()) {
                    return Err(Error::InvalidScene(
                        "plane parameters must be finite".into(),
                    ));
                }
                if (normal.norm() - 1.0).abs() > 1e-9 {
                    return Err(Error::InvalidScene(format!(
                        "plane normal must be unit length, got norm {}",
                        normal.norm()
                    )));
                }
                if offset == 0.0 {
                    return Err(Error::InvalidScene(
                        "plane passes through the camera centre".into(),
                    ));
                }
            }
            SurfaceScene::Sphere { center, radius } => {
                if !(center.iter().all(|v| v.is_finite()) && radius.is_finite() && radius > 0.0) {
                    return Err(Error::InvalidScene(
                        "sphere radius must be finite and > 0".into(),
                    ));
                }
                if center.z <= radius {
                    return Err(Error::InvalidScene(
                        "sphere must lie wholly in front of the camera (c.z > r)".into(),
                    ));
                }
            }
            SurfaceScene::Sinusoid {
                z0,
                amplitude,
                omega_x,
                omega_y,
            } => {
                if ![z0, amplitude, omega_x, omega_y]
                    .iter()
                    .all(|v| v.is_finite())
                {
                    return Err(Error::InvalidScene(
                        "sinusoid parameters must be finite".into(),
                    ));
                }
                if z0 - amplitude.abs() <= 0.0 {
                    return Err(Error::InvalidScene(
                        "sinusoid must satisfy z0 - |a| > 0".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    /// The same surface seen by a camera whose image is `factor` times larger
    /// (pair with [`Intrinsics::scaled`]). Only the pixel-space sinusoid changes.
    pub fn resampled(&self, factor: f64) -> Self {
        match *self {
            SurfaceScene::Sinusoid {
                z0,
                amplitude,
                omega_x,
                omega_y,
            } => SurfaceScene::Sinusoid {
                z0,
                amplitude,
                omega_x: omega_x / factor,
                omega_y: omega_y / factor,
            },
            other => other,
        }
    }

    /// Depth of the nearest surface point along the ray through pixel `(x, y)`.
    pub fn depth_at(&self, x: f64, y: f64, k: &Intrinsics) -> Option<f64> {
        let d = match *self {
            SurfaceScene::Plane { normal, offset } => {
                let r = k.ray(x, y);
                offset / normal.dot(&r)
            }
            SurfaceScene::Sphere { center, radius } => {
                // |t·r − c|² = R², with r_z = 1 so t is the depth
                let r = k.ray(x, y);
                let a = r.dot(&r);
                let b = r.dot(&center.coords);
                let c = center.coords.dot(&center.coords) - radius * radius;
                let disc = b * b - a * c;
                if disc < 0.0 || b <= 0.0 {
                    return None;
                }
                // near root c / (b + √disc) avoids cancellation at grazing rays
                c / (b + disc.sqrt())
            }
            SurfaceScene::Sinusoid {
                z0,
                amplitude,
                omega_x,
                omega_y,
            } => z0 + amplitude * (omega_x * x).sin() * (omega_y * y).sin(),
        };
        DepthMap::is_valid_value(d).then_some(d)
    }

    /// Exact unit normal at a surface point.
    ///
    /// Plane: the stored normal. Sphere: `(p − c)/r`. Sinusoid: normalized
    /// `(−∂z/∂X, −∂z/∂Y, 1)`.
    pub fn analytic_normal(&self, p: &Point3<f64>, k: &Intrinsics) -> Result<Vector3<f64>> {
        match *self {
            SurfaceScene::Plane { normal, offset } => {
                let off = (normal.dot(&p.coords) - offset).abs();
                if off > ON_SURFACE_TOLERANCE {
                    return Err(Error::OffSurface(off));
                }
                Ok(normal)
            }
            SurfaceScene::Sphere { center, radius } => {
                let v = p - center;
                let off = (v.norm() - radius).abs();
                if off > ON_SURFACE_TOLERANCE {
                    return Err(Error::OffSurface(off));
                }
                Ok(v / radius)
            }
            SurfaceScene::Sinusoid {
                amplitude,
                omega_x,
                omega_y,
                ..
            } => {
                let u = project(p, k)?;
                let z = self
                    .depth_at(u.x, u.y, k)
                    .ok_or(Error::OffSurface(f64::INFINITY))?;
                let off = (p.z - z).abs();
                if off > ON_SURFACE_TOLERANCE {
                    return Err(Error::OffSurface(off));
                }
                let (sx, cx) = (omega_x * u.x).sin_cos();
                let (sy, cy) = (omega_y * u.y).sin_cos();
                let z_x = amplitude * omega_x * cx * sy;
                let z_y = amplitude * omega_y * sx * cy;
                let r = k.ray(u.x, u.y);
                let dr_dx = Vector3::new(1.0 / k.fx, 0.0, 0.0);
                let dr_dy = Vector3::new(-k.skew / (k.fx * k.fy), 1.0 / k.fy, 0.0);
                let tx = r * z_x + dr_dx * z;
                let ty = r * z_y + dr_dy * z;
                let t = tx.cross(&ty);
                Ok(t * (t.z.signum() / t.norm()))
            }
        }
    }
}

pub fn render_depth(
    scene: &SurfaceScene,
    k: &Intrinsics,
    width: usize,
    height: usize,
) -> Result<DepthMap> {
    scene.validate()?;
    k.validate()?;
    let mut values = Vec::with_capacity(width * height);
    for y in 0..height {
        for x in 0..width {
            values.push(scene.depth_at(x as f64, y as f64, k).unwrap_or(f64::NAN));
        }
    }
    DepthMap::new(width, height, values)
}

/// Analytic unit normals at every valid pixel of a depth map rendered from `scene`.
pub fn oracle_normals(scene: &SurfaceScene, depth: &DepthMap, k: &Intrinsics) -> Result<NormalMap> {
    let (w, h) = (depth.width(), depth.height());
    let mut normals = Vec::with_capacity(w * h);
    let mut valid = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            if depth.is_valid(x, y) {
                let p =
                    crate::camera::back_project_unchecked(x as f64, y as f64, depth.get(x, y), k);
                normals.push(scene.analytic_normal(&p, k)?);
                valid.push(true);
            } else {
                normals.push(Vector3::zeros());
                valid.push(false);
            }
        }
    }
    Ok(NormalMap::from_parts(w, h, normals, valid))
}

/// Sign-agnostic angles (degrees) at pixels valid in both normal maps, row-major.
pub fn normal_angle_errors(estimate: &NormalMap, reference: &NormalMap) -> Vec<f64> {
    estimate
        .iter_valid()
        .filter(|(i, _)| reference.valid_mask()[*i])
        .map(|(i, n)| unsigned_angle_deg(n, &reference.values()[i]))
        .collect()
}

pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len().is_multiple_of(2) {
        0.5 * (v[m - 1] + v[m])
    } else {
        v[m]
    })
}

/// Adds N(0, σ²) noise to every valid pixel. Each pixel draws from its own
/// ChaCha stream keyed by `(seed, pixel index)`, so the result does not depend
/// on evaluation order. Pixels pushed to ≤ 0 become invalid.
pub fn add_noise(depth: &DepthMap, spec: &NoiseSpec) -> DepthMap {
    let mut out = depth.clone();
    if spec.sigma == 0.0 {
        return out;
    }
    for (i, v) in out.values_mut().iter_mut().enumerate() {
        if DepthMap::is_valid_value(*v) {
            *v += spec.sigma * pixel_normal(spec.seed, i as u64);
            if !DepthMap::is_valid_value(*v) {
                *v = f64::NAN;
            }
        }
    }
    out
}

fn pixel_normal(seed: u64, index: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    StandardNormal.sample(&mut rng)
}
