//! Sectioned run configuration in the same `key = value` format as intrinsics.
//!
//! | key | meaning |
//! |-----|---------|
//! | `loss.alpha1`, `loss.alpha2`, `loss.beta`, `loss.lambda` | loss weights |
//! | `loss.similarity_mode` | `normalized_align` or `raw_dot` |
//! | `loss.reduction` | `sum` or `mean` |
//! | `fit.learning_rate` | mm per unit gradient |
//! | `fit.iterations`, `fit.record_every`, `fit.seed` | descent schedule |
//! | `fit.noise_sigma` | mm of Gaussian noise added to the initial map |
//! | `scene.type` | `plane`, `sphere` or `sinusoid` |
//! | `scene.normal`, `scene.offset` | plane `n·p = offset` (`x,y,z`; mm) |
//! | `scene.center`, `scene.radius` | sphere (`x,y,z` mm; mm) |
//! | `scene.z0`, `scene.amplitude`, `scene.omega_x`, `scene.omega_y` | sinusoid (mm; rad/pixel) |
//! | `scene.width`, `scene.height` | render size in pixels |
//! | `noise.sigma`, `noise.seed` | noise added to a rendered scene |
//! | `gradcheck.step`, `gradcheck.threshold` | finite-difference check |

use nalgebra::{Point3, Vector3};

use crate::error::{Error, Result};
use crate::fit::FitConfig;
use crate::io::KeyValues;
use crate::loss::OpLossConfig;
use crate::synth::{NoiseSpec, SurfaceScene};

pub const KNOWN_KEYS: &[&str] = &[
    "loss.alpha1",
    "loss.alpha2",
    "loss.beta",
    "loss.lambda",
    "loss.similarity_mode",
    "loss.reduction",
    "fit.learning_rate",
    "fit.iterations",
    "fit.record_every",
    "fit.seed",
    "fit.noise_sigma",
    "scene.type",
    "scene.normal",
    "scene.offset",
    "scene.center",
    "scene.radius",
    "scene.z0",
    "scene.amplitude",
    "scene.omega_x",
    "scene.omega_y",
    "scene.width",
    "scene.height",
    "noise.sigma",
    "noise.seed",
    "gradcheck.step",
    "gradcheck.threshold",
];

/// A rendered-scene request: surface plus image size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SceneSpec {
    pub scene: SurfaceScene,
    pub width: usize,
    pub height: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigFile {
    kv: KeyValues,
}

fn parse_vec3(s: &str) -> Option<[f64; 3]> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .ok()?;
    <[f64; 3]>::try_from(parts).ok()
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        let kv = KeyValues::parse(text)?;
        kv.reject_unknown(KNOWN_KEYS, &[])?;
        Ok(Self { kv })
    }

    /// Overrides (or adds) a known key, as a command-line flag would.
    pub fn set(&mut self, key: &str, value: impl Into<String>) -> Result<()> {
        if !KNOWN_KEYS.contains(&key) {
            return Err(Error::InvalidConfig(format!("unknown key '{key}'")));
        }
        self.kv.set(key, value);
        Ok(())
    }

    pub fn raw(&self) -> &KeyValues {
        &self.kv
    }

    pub fn get<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>> {
        self.kv.parse_opt(key)
    }

    fn vec3(&self, key: &str) -> Result<Option<[f64; 3]>> {
        let Some(s) = self.kv.get(key) else {
            return Ok(None);
        };
        parse_vec3(s).map(Some).ok_or_else(|| {
            Error::parse(
                self.kv.location_of(key).unwrap_or_default(),
                format!("'{key}' expects three comma-separated numbers, got '{s}'"),
            )
        })
    }

    pub fn apply_loss(&self, cfg: &mut OpLossConfig) -> Result<()> {
        if let Some(v) = self.get("loss.alpha1")? {
            cfg.alpha1 = v;
        }
        if let Some(v) = self.get("loss.alpha2")? {
            cfg.alpha2 = v;
        }
        if let Some(v) = self.get("loss.beta")? {
            cfg.beta = v;
        }
        if let Some(v) = self.get("loss.lambda")? {
            cfg.lambda = v;
        }
        if let Some(v) = self.get("loss.similarity_mode")? {
            cfg.similarity_mode = v;
        }
        if let Some(v) = self.get("loss.reduction")? {
            cfg.reduction = v;
        }
        Ok(())
    }

    pub fn apply_fit(&self, cfg: &mut FitConfig) -> Result<()> {
        self.apply_loss(&mut cfg.loss)?;
        if let Some(v) = self.get("fit.learning_rate")? {
            cfg.learning_rate = v;
        }
        if let Some(v) = self.get("fit.iterations")? {
            cfg.iterations = v;
        }
        if let Some(v) = self.get("fit.record_every")? {
            cfg.record_every = v;
        }
        if let Some(v) = self.get("fit.seed")? {
            cfg.seed = v;
        }
        Ok(())
    }

    pub fn noise(&self) -> Result<NoiseSpec> {
        Ok(NoiseSpec {
            sigma: self.get("noise.sigma")?.unwrap_or(0.0),
            seed: self.get("noise.seed")?.unwrap_or(0),
        })
    }

    /// The scene described by `scene.*` keys, if `scene.type` is present.
    pub fn scene(&self) -> Result<Option<SceneSpec>> {
        let Some(kind) = self.kv.get("scene.type") else {
            return Ok(None);
        };
        let need = |key: &str| -> Result<f64> {
            self.get(key)?.ok_or_else(|| {
                Error::InvalidConfig(format!("scene.type = {kind} requires '{key}'"))
            })
        };
        let scene = match kind {
            "plane" => {
                let n = self.vec3("scene.normal")?.ok_or_else(|| {
                    Error::InvalidConfig("plane scene requires 'scene.normal'".into())
                })?;
                SurfaceScene::Plane {
                    normal: Vector3::from(n).normalize(),
                    offset: need("scene.offset")?,
                }
            }
            "sphere" => {
                let c = self.vec3("scene.center")?.ok_or_else(|| {
                    Error::InvalidConfig("sphere scene requires 'scene.center'".into())
                })?;
                SurfaceScene::Sphere {
                    center: Point3::from(c),
                    radius: need("scene.radius")?,
                }
            }
            "sinusoid" => SurfaceScene::Sinusoid {
                z0: need("scene.z0")?,
                amplitude: need("scene.amplitude")?,
                omega_x: need("scene.omega_x")?,
                omega_y: need("scene.omega_y")?,
            },
            other => {
                return Err(Error::InvalidConfig(format!(
                    "unknown scene.type '{other}' (expected plane, sphere or sinusoid)"
                )))
            }
        };
        let width = self.get("scene.width")?.unwrap_or(64);
        let height = self.get("scene.height")?.unwrap_or(width);
        Ok(Some(SceneSpec {
            scene,
            width,
            height,
        }))
    }
}
