use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use opdepth_core::config::ConfigFile;
use opdepth_core::fit::noisy_init;
use opdepth_core::geometry::flip_to_camera;
use opdepth_core::gradcheck::check_gradient;
use opdepth_core::io::{export_ply, fmt_f64, write_pfm_raw, OrientedPointCloud};
use opdepth_core::{
    add_noise, back_project_map, compare, estimate_normals, fit, op_loss, op_loss_gradient,
    render_depth, unit_normals, DepthMap, FitConfig, GradientMap, Intrinsics, LossBreakdown,
    MetricsReport, NormalMap, OpLossConfig,
};

use crate::files::{read_config, read_depth, read_k, write_atomic, write_depth};
use crate::{Command, Failure, FitFlags, LossFlags, SceneFlags};

const DEFAULT_STEP: f64 = 1e-4;
const DEFAULT_THRESHOLD: f64 = 1e-5;

fn set<T: ToString>(cfg: &mut ConfigFile, key: &str, v: &Option<T>) -> Result<()> {
    if let Some(v) = v {
        cfg.set(key, v.to_string())?;
    }
    Ok(())
}

impl LossFlags {
    fn apply(&self, cfg: &mut ConfigFile) -> Result<()> {
        set(cfg, "loss.alpha1", &self.alpha1)?;
        set(cfg, "loss.alpha2", &self.alpha2)?;
        set(cfg, "loss.beta", &self.beta)?;
        set(cfg, "loss.lambda", &self.lambda)?;
        set(cfg, "loss.similarity_mode", &self.similarity_mode)?;
        set(cfg, "loss.reduction", &self.reduction)
    }
}

impl FitFlags {
    fn apply(&self, cfg: &mut ConfigFile) -> Result<()> {
        set(cfg, "fit.learning_rate", &self.learning_rate)?;
        set(cfg, "fit.iterations", &self.iterations)?;
        set(cfg, "fit.record_every", &self.record_every)?;
        set(cfg, "fit.seed", &self.seed)?;
        set(cfg, "fit.noise_sigma", &self.noise_sigma)
    }
}

impl SceneFlags {
    fn apply(&self, cfg: &mut ConfigFile) -> Result<()> {
        set(cfg, "scene.type", &self.scene_type)?;
        set(cfg, "scene.normal", &self.normal)?;
        set(cfg, "scene.offset", &self.offset)?;
        set(cfg, "scene.center", &self.center)?;
        set(cfg, "scene.radius", &self.radius)?;
        set(cfg, "scene.z0", &self.z0)?;
        set(cfg, "scene.amplitude", &self.amplitude)?;
        set(cfg, "scene.omega_x", &self.omega_x)?;
        set(cfg, "scene.omega_y", &self.omega_y)?;
        set(cfg, "scene.width", &self.width)?;
        set(cfg, "scene.height", &self.height)
    }
}

/// Names the config file (or the command line) in errors raised while
/// interpreting its values.
fn origin(path: Option<&Path>) -> String {
    path.map_or_else(|| "command line".to_string(), |p| p.display().to_string())
}

fn loss_config(cfg: &ConfigFile, path: Option<&Path>) -> Result<OpLossConfig> {
    let mut loss = OpLossConfig::default();
    cfg.apply_loss(&mut loss).with_context(|| origin(path))?;
    loss.validate().with_context(|| origin(path))?;
    Ok(loss)
}

fn fit_config(cfg: &ConfigFile, path: Option<&Path>) -> Result<FitConfig> {
    let mut f = FitConfig::default();
    cfg.apply_fit(&mut f).with_context(|| origin(path))?;
    f.validate().with_context(|| origin(path))?;
    Ok(f)
}

pub fn run(command: Command) -> std::result::Result<(), Failure> {
    match command {
        Command::Gen {
            intrinsics,
            out,
            config,
            scene,
            noise_sigma,
            noise_seed,
        } => {
            let k = read_k(&intrinsics)?;
            let mut cfg = read_config(config.as_deref())?;
            scene.apply(&mut cfg)?;
            set(&mut cfg, "noise.sigma", &noise_sigma)?;
            set(&mut cfg, "noise.seed", &noise_seed)?;
            let depth = render_target(&cfg, config.as_deref(), &k)?;
            let noise = cfg.noise().with_context(|| origin(config.as_deref()))?;
            noise
                .validate()
                .with_context(|| origin(config.as_deref()))?;
            write_depth(&out, &add_noise(&depth, &noise))?;
        }
        Command::Backproject {
            depth,
            intrinsics,
            out,
            keep_invalid_normals,
            flip_to_camera: flip,
        } => {
            let d = read_depth(&depth)?;
            let k = read_k(&intrinsics)?;
            let normals = oriented(unit_normals(&estimate_normals(&d, &k)), flip);
            let cloud = OrientedPointCloud::from_maps(
                &back_project_map(&d, &k),
                &normals,
                keep_invalid_normals,
            );
            write_atomic(&out, &export_ply(&cloud))?;
        }
        Command::Normals {
            depth,
            intrinsics,
            out_dir,
            ply,
            raw,
            flip_to_camera: flip,
        } => {
            if out_dir.is_none() && ply.is_none() {
                return Err(anyhow!("nothing to write: give --out-dir and/or --ply").into());
            }
            let d = read_depth(&depth)?;
            let k = read_k(&intrinsics)?;
            let raw_normals = estimate_normals(&d, &k);
            let units = oriented(unit_normals(&raw_normals), flip);
            if let Some(dir) = out_dir {
                let chosen = if raw {
                    oriented(raw_normals, flip)
                } else {
                    units.clone()
                };
                write_normal_components(&dir, &chosen)?;
            }
            if let Some(path) = ply {
                let cloud = OrientedPointCloud::from_maps(&back_project_map(&d, &k), &units, false);
                write_atomic(&path, &export_ply(&cloud))?;
            }
        }
        Command::Loss {
            pred,
            gt,
            intrinsics,
            config,
            loss,
        } => {
            let (p, g, k) = (read_depth(&pred)?, read_depth(&gt)?, read_k(&intrinsics)?);
            let mut cfg = read_config(config.as_deref())?;
            loss.apply(&mut cfg)?;
            let lc = loss_config(&cfg, config.as_deref())?;
            let l = op_loss(&p, &g, &k, &lc).context("computing the loss")?;
            print!("{}", loss_table(&l));
        }
        Command::Gradcheck {
            pred,
            gt,
            intrinsics,
            config,
            loss,
            step,
            threshold,
            corrupt_gradient,
        } => {
            let (p, g, k) = (read_depth(&pred)?, read_depth(&gt)?, read_k(&intrinsics)?);
            let mut cfg = read_config(config.as_deref())?;
            loss.apply(&mut cfg)?;
            set(&mut cfg, "gradcheck.step", &step)?;
            set(&mut cfg, "gradcheck.threshold", &threshold)?;
            let lc = loss_config(&cfg, config.as_deref())?;
            let ctx = || origin(config.as_deref());
            let step: f64 = cfg
                .get("gradcheck.step")
                .with_context(ctx)?
                .unwrap_or(DEFAULT_STEP);
            let threshold: f64 = cfg
                .get("gradcheck.threshold")
                .with_context(ctx)?
                .unwrap_or(DEFAULT_THRESHOLD);
            if !(step.is_finite() && step > 0.0) {
                return Err(anyhow!("gradcheck step must be finite and > 0 mm, got {step}").into());
            }
            let mut grad = op_loss_gradient(&p, &g, &k, &lc).context("computing the gradient")?;
            if corrupt_gradient {
                grad = scaled(&grad, 1.001);
            }
            let rep =
                check_gradient(&p, &g, &k, &lc, &grad, step).context("checking the gradient")?;
            let pass = rep.passes(threshold);
            let worst = rep
                .worst_pixel
                .map_or_else(|| "none".to_string(), |(x, y)| format!("{x},{y}"));
            println!("max_rel_error = {}", fmt_f64(rep.max_rel_error));
            println!("worst_pixel = {worst}");
            println!("checked = {}", rep.checked);
            println!("excluded = {}", rep.excluded);
            println!("negligible = {}", rep.negligible);
            println!("step = {}", fmt_f64(step));
            println!("threshold = {}", fmt_f64(threshold));
            println!("status = {}", if pass { "pass" } else { "fail" });
            if !pass {
                eprintln!(
                    "opdepth: gradient check failed: max relative error {} >= {}",
                    fmt_f64(rep.max_rel_error),
                    fmt_f64(threshold)
                );
                return Err(Failure::CheckFailed);
            }
        }
        Command::Metrics { pred, gt, name } => {
            let (p, g) = (read_depth(&pred)?, read_depth(&gt)?);
            let rep = MetricsReport::compute(name, &p, &g)
                .with_context(|| format!("comparing {} with {}", pred.display(), gt.display()))?;
            print!("{}", opdepth_core::metrics::to_csv(&[rep]));
        }
        Command::Fit {
            init,
            target,
            intrinsics,
            config,
            out_dir,
            loss,
            fit: fit_flags,
        } => {
            let k = read_k(&intrinsics)?;
            let mut cfg = read_config(config.as_deref())?;
            loss.apply(&mut cfg)?;
            fit_flags.apply(&mut cfg)?;
            let fc = fit_config(&cfg, config.as_deref())?;
            let (start, goal) = fit_inputs(
                &cfg,
                config.as_deref(),
                init.as_deref(),
                target.as_deref(),
                &k,
            )?;
            let r = fit(&start, &goal, &k, &fc).context("fitting")?;
            std::fs::create_dir_all(&out_dir)
                .with_context(|| format!("cannot create {}", out_dir.display()))?;
            write_depth(&out_dir.join("final_depth.pfm"), &r.final_depth)?;
            write_atomic(
                &out_dir.join("trajectory.csv"),
                r.trajectory_csv().as_bytes(),
            )?;
            let (first, last) = (r.first(), r.last());
            println!("iterations = {}", last.iteration);
            println!("total_initial = {}", fmt_f64(first.loss.total));
            println!("total_final = {}", fmt_f64(last.loss.total));
            println!("mae_final_mm = {}", fmt_f64(last.mae));
            println!("rmse_final_mm = {}", fmt_f64(last.rmse));
            println!(
                "normal_angle_final_deg = {}",
                fmt_f64(last.normal_angle_deg)
            );
        }
        Command::Compare {
            config_a,
            config_b,
            init,
            target,
            intrinsics,
            noise_sigma,
            seed,
            out,
        } => {
            let k = read_k(&intrinsics)?;
            let mut a = read_config(Some(&config_a))?;
            let b = read_config(Some(&config_b))?;
            set(&mut a, "fit.noise_sigma", &noise_sigma)?;
            set(&mut a, "fit.seed", &seed)?;
            check_shared(&a, &b, &config_b, noise_sigma.is_some(), seed.is_some())?;
            let fa = fit_config(&a, Some(&config_a))?;
            let fb = fit_config(&b, Some(&config_b))?;
            let (start, goal) =
                fit_inputs(&a, Some(&config_a), init.as_deref(), target.as_deref(), &k)?;
            let c = compare(&start, &goal, &k, &fa, &fb).context("fitting")?;
            let table = c.to_csv();
            match out {
                Some(path) => write_atomic(&path, table.as_bytes())?,
                None => print!("{table}"),
            }
        }
    }
    Ok(())
}

fn oriented(n: NormalMap, flip: bool) -> NormalMap {
    if flip {
        flip_to_camera(&n)
    } else {
        n
    }
}

fn scaled(g: &GradientMap, factor: f64) -> GradientMap {
    let vals = g.values().iter().map(|v| v * factor).collect();
    GradientMap::from_parts(g.width(), g.height(), vals, g.valid_mask().to_vec())
}

fn loss_table(l: &LossBreakdown) -> String {
    format!("{}\n{}\n", LossBreakdown::CSV_HEADER, l.to_csv_row())
}

fn render_target(cfg: &ConfigFile, path: Option<&Path>, k: &Intrinsics) -> Result<DepthMap> {
    let spec = cfg.scene().with_context(|| origin(path))?.ok_or_else(|| {
        anyhow!(
            "{}: no scene given (set scene.type or --scene-type)",
            origin(path)
        )
    })?;
    render_depth(&spec.scene, k, spec.width, spec.height).with_context(|| origin(path))
}

/// Target from a file or the config's scene; initial map from a file or the
/// target, plus the configured noise.
fn fit_inputs(
    cfg: &ConfigFile,
    path: Option<&Path>,
    init: Option<&Path>,
    target: Option<&Path>,
    k: &Intrinsics,
) -> Result<(DepthMap, DepthMap)> {
    let goal = match target {
        Some(t) => read_depth(t)?,
        None => render_target(cfg, path, k)?,
    };
    let start = match init {
        Some(i) => read_depth(i)?,
        None => goal.clone(),
    };
    let sigma: f64 = cfg
        .get("fit.noise_sigma")
        .with_context(|| origin(path))?
        .unwrap_or(0.0);
    let seed: u64 = cfg
        .get("fit.seed")
        .with_context(|| origin(path))?
        .unwrap_or(0);
    if !(sigma.is_finite() && sigma >= 0.0) {
        bail!(
            "{}: fit.noise_sigma must be finite and >= 0 mm, got {sigma}",
            origin(path)
        );
    }
    Ok((noisy_init(&start, sigma, seed), goal))
}

/// Config B may repeat config A's scene and initialization noise but not
/// contradict them, since both runs start from one map.
fn check_shared(
    a: &ConfigFile,
    b: &ConfigFile,
    b_path: &Path,
    sigma_flag: bool,
    seed_flag: bool,
) -> Result<()> {
    let mut keys: Vec<&str> = opdepth_core::config::KNOWN_KEYS
        .iter()
        .copied()
        .filter(|k| k.starts_with("scene."))
        .collect();
    if !sigma_flag {
        keys.push("fit.noise_sigma");
    }
    if !seed_flag {
        keys.push("fit.seed");
    }
    for key in keys {
        if let Some(vb) = b.raw().get(key) {
            if a.raw().get(key) != Some(vb) {
                bail!(
                    "{}: '{key}' differs from config A; both runs must share the target and initial map",
                    b_path.display()
                );
            }
        }
    }
    Ok(())
}

fn write_normal_components(dir: &Path, n: &NormalMap) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    for (axis, name) in ["normal_x.pfm", "normal_y.pfm", "normal_z.pfm"]
        .iter()
        .enumerate()
    {
        let samples: Vec<f32> = n
            .values()
            .iter()
            .zip(n.valid_mask())
            .map(|(v, &ok)| if ok { v[axis] as f32 } else { 0.0 })
            .collect();
        write_atomic(
            &dir.join(name),
            &write_pfm_raw(n.width(), n.height(), &samples),
        )?;
    }
    Ok(())
}
