//! Pinhole camera model.
//!
//! Frame convention: x right, y down, z forward. Integer pixel `(x, y)` is the
//! center of column `x`, row `y`, with the origin at the top-left pixel. Depth
//! is the camera-space z coordinate, not the distance along the ray.

use nalgebra::{Matrix3, Point3, Vector3};

use crate::error::{Error, Result};
use crate::grid::{DepthMap, PointMap};

/// Continuous pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pixel {
    pub x: f64,
    pub y: f64,
}

impl Pixel {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }
}

/// Pinhole intrinsics `K = [[fx, skew, cx], [0, fy, cy], [0, 0, 1]]`, all in pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub skew: f64,
}

impl Intrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64) -> Result<Self> {
        Self::with_skew(fx, fy, cx, cy, 0.0)
    }

    pub fn with_skew(fx: f64, fy: f64, cx: f64, cy: f64, skew: f64) -> Result<Self> {
        let k = Self {
            fx,
            fy,
            cx,
            cy,
            skew,
        };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("fx", self.fx),
            ("fy", self.fy),
            ("cx", self.cx),
            ("cy", self.cy),
            ("skew", self.skew),
        ];
        for (name, v) in fields {
            if !v.is_finite() {
                return Err(Error::InvalidIntrinsics(format!("{name} is not finite")));
            }
        }
        if self.fx <= 0.0 {
            return Err(Error::InvalidIntrinsics("fx must be > 0".into()));
        }
        if self.fy <= 0.0 {
            return Err(Error::InvalidIntrinsics("fy must be > 0".into()));
        }
        Ok(())
    }

    pub fn matrix(&self) -> Matrix3<f64> {
        Matrix3::new(
            self.fx, self.skew, self.cx, //
            0.0, self.fy, self.cy, //
            0.0, 0.0, 1.0,
        )
    }

    /// `K⁻¹ [x, y, 1]ᵀ`, solved by back substitution. The z component is exactly 1.
    pub fn ray(&self, x: f64, y: f64) -> Vector3<f64> {
        let ny = (y - self.cy) / self.fy;
        let nx = (x - self.cx - self.skew * ny) / self.fx;
        Vector3::new(nx, ny, 1.0)
    }

    /// L1 norm of the viewing ray through `(x, y)`; the per-pixel weight that
    /// turns a depth residual into a camera-space L1 distance.
    pub fn ray_l1_weight(&self, x: f64, y: f64) -> f64 {
        let r = self.ray(x, y);
        r.x.abs() + r.y.abs() + r.z.abs()
    }

    /// Scales focal lengths, principal point and skew for an image resampled by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            fx: self.fx * factor,
            fy: self.fy * factor,
            cx: self.cx * factor,
            cy: self.cy * factor,
            skew: self.skew * factor,
        }
    }
}

pub fn back_project(u: Pixel, depth: f64, k: &Intrinsics) -> Result<Point3<f64>> {
    if !(depth.is_finite() && depth > 0.0) {
        return Err(Error::InvalidDepth(depth));
    }
    Ok(back_project_unchecked(u.x, u.y, depth, k))
}

#[inline]
pub(crate) fn back_project_unchecked(x: f64, y: f64, depth: f64, k: &Intrinsics) -> Point3<f64> {
    let r = k.ray(x, y);
    Point3::new(depth * r.x, depth * r.y, depth)
}

pub fn project(p: &Point3<f64>, k: &Intrinsics) -> Result<Pixel> {
    // also rejects NaN
    if p.z.is_nan() || p.z <= 0.0 {
        return Err(Error::BehindCamera(p.z));
    }
    let nx = p.x / p.z;
    let ny = p.y / p.z;
    Ok(Pixel {
        x: k.fx * nx + k.skew * ny + k.cx,
        y: k.fy * ny + k.cy,
    })
}

/// Back-projects every valid pixel at its integer center; invalid depths stay invalid.
pub fn back_project_map(depth: &DepthMap, k: &Intrinsics) -> PointMap {
    let (w, h) = (depth.width(), depth.height());
    let mut values = Vec::with_capacity(w * h);
    let mut valid = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let d = depth.get(x, y);
            if DepthMap::is_valid_value(d) {
                values.push(back_project_unchecked(x as f64, y as f64, d, k));
                valid.push(true);
            } else {
                values.push(Point3::origin());
                valid.push(false);
            }
        }
    }
    PointMap::from_parts(w, h, values, valid)
}
