//! Direct per-pixel gradient descent of a depth map against a target.
//!
//! Every valid pixel of the initial map is a free parameter. Each step applies
//! `d ← max(d − lr · ∂total/∂d, DEPTH_FLOOR)`; pixels invalid in the initial
//! map are never touched. The loss always uses mean reduction.

use std::collections::BTreeMap;
use std::fmt::Write;

use crate::camera::Intrinsics;
use crate::error::{Error, Result};
use crate::geometry::{estimate_normals, unit_normals};
use crate::grid::DepthMap;
use crate::io::fmt_f64;
use crate::loss::{loss_and_gradient, op_loss, LossBreakdown, OpLossConfig, Reduction};
use crate::metrics::MetricsReport;
use crate::synth::{normal_angle_errors, NoiseSpec};

/// Lowest depth (mm) a fitted pixel may take.
pub const DEPTH_FLOOR: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitConfig {
    /// mm per unit gradient.
    pub learning_rate: f64,
    pub iterations: usize,
    pub loss: OpLossConfig,
    /// Trajectory sampling stride in iterations.
    pub record_every: usize,
    /// Seed for noisy initialization (see [`noisy_init`]).
    pub seed: u64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1.0,
            iterations: 100,
            loss: OpLossConfig {
                reduction: Reduction::Mean,
                ..OpLossConfig::default()
            },
            record_every: 10,
            seed: 0,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "learning_rate must be finite and > 0, got {}",
                self.learning_rate
            )));
        }
        if self.record_every == 0 {
            return Err(Error::InvalidConfig("record_every must be >= 1".into()));
        }
        self.loss.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectorySample {
    pub iteration: usize,
    pub loss: LossBreakdown,
    /// mm; NaN when no pixel is jointly valid.
    pub mae: f64,
    pub rmse: f64,
    /// Mean sign-agnostic angle (degrees) between fitted and target unit
    /// normals; NaN when no normal is jointly valid.
    pub normal_angle_deg: f64,
}

impl TrajectorySample {
    pub const CSV_COLUMNS: [&'static str; 9] = [
        "image_l1",
        "p2p",
        "n2n_align",
        "n2n_reg",
        "op",
        "total",
        "mae",
        "rmse",
        "normal_angle_deg",
    ];

    fn cells(&self) -> [f64; 9] {
        let l = &self.loss;
        [
            l.image_l1,
            l.p2p,
            l.n2n_align,
            l.n2n_reg,
            l.op,
            l.total,
            self.mae,
            self.rmse,
            self.normal_angle_deg,
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub final_depth: DepthMap,
    pub trajectory: Vec<TrajectorySample>,
}

impl FitResult {
    pub fn first(&self) -> &TrajectorySample {
        &self.trajectory[0]
    }

    pub fn last(&self) -> &TrajectorySample {
        self.trajectory
            .last()
            .expect("trajectory has a first sample")
    }

    pub fn trajectory_csv(&self) -> String {
        let mut out = format!("iteration,{}\n", TrajectorySample::CSV_COLUMNS.join(","));
        for s in &self.trajectory {
            let cells: Vec<String> = s.cells().iter().map(|&v| fmt_f64(v)).collect();
            let _ = writeln!(out, "{},{}", s.iteration, cells.join(","));
        }
        out
    }
}

/// Target plus seeded Gaussian noise, the usual starting point of a fit.
pub fn noisy_init(target: &DepthMap, sigma: f64, seed: u64) -> DepthMap {
    crate::synth::add_noise(target, &NoiseSpec { sigma, seed })
}

fn mean_normal_angle(
    depth: &DepthMap,
    target_normals: &crate::grid::NormalMap,
    k: &Intrinsics,
) -> f64 {
    let est = unit_normals(&estimate_normals(depth, k));
    let errs = normal_angle_errors(&est, target_normals);
    if errs.is_empty() {
        f64::NAN
    } else {
        errs.iter().sum::<f64>() / errs.len() as f64
    }
}

pub fn fit(
    init: &DepthMap,
    target: &DepthMap,
    k: &Intrinsics,
    cfg: &FitConfig,
) -> Result<FitResult> {
    init.ensure_same_shape(target)?;
    k.validate()?;
    cfg.validate()?;
    let loss_cfg = OpLossConfig {
        reduction: Reduction::Mean,
        ..cfg.loss
    };
    let target_normals = unit_normals(&estimate_normals(target, k));
    let sample = |it: usize, depth: &DepthMap, loss: LossBreakdown| {
        let (mae, rmse) = match MetricsReport::compute("", depth, target) {
            Ok(r) => (r.mae, r.rmse),
            Err(_) => (f64::NAN, f64::NAN),
        };
        TrajectorySample {
            iteration: it,
            loss,
            mae,
            rmse,
            normal_angle_deg: mean_normal_angle(depth, &target_normals, k),
        }
    };

    let mut depth = init.clone();
    let mut trajectory = Vec::new();
    for it in 0..cfg.iterations {
        let (loss, grad) = loss_and_gradient(&depth, target, k, &loss_cfg)?;
        if it % cfg.record_every == 0 {
            trajectory.push(sample(it, &depth, loss));
        }
        for ((d, &g), &ok) in depth
            .values_mut()
            .iter_mut()
            .zip(grad.values())
            .zip(grad.valid_mask())
        {
            if ok {
                *d = (*d - cfg.learning_rate * g).max(DEPTH_FLOOR);
            }
        }
    }
    let loss = op_loss(&depth, target, k, &loss_cfg)?;
    trajectory.push(sample(cfg.iterations, &depth, loss));
    Ok(FitResult {
        final_depth: depth,
        trajectory,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub a: FitResult,
    pub b: FitResult,
}

impl Comparison {
    /// Side-by-side trajectories joined on iteration; a run without a sample
    /// at some iteration leaves its cells empty.
    pub fn to_csv(&self) -> String {
        let mut rows: BTreeMap<usize, (Option<&TrajectorySample>, Option<&TrajectorySample>)> =
            BTreeMap::new();
        for s in &self.a.trajectory {
            rows.entry(s.iteration).or_default().0 = Some(s);
        }
        for s in &self.b.trajectory {
            rows.entry(s.iteration).or_default().1 = Some(s);
        }
        let mut header = vec!["iteration".to_string()];
        for prefix in ["a", "b"] {
            header.extend(
                TrajectorySample::CSV_COLUMNS
                    .iter()
                    .map(|c| format!("{prefix}_{c}")),
            );
        }
        let mut out = header.join(",");
        out.push('\n');
        let cells = |s: Option<&TrajectorySample>| -> Vec<String> {
            match s {
                Some(s) => s.cells().iter().map(|&v| fmt_f64(v)).collect(),
                None => vec![String::new(); TrajectorySample::CSV_COLUMNS.len()],
            }
        };
        for (it, (a, b)) in rows {
            let mut row = vec![it.to_string()];
            row.extend(cells(a));
            row.extend(cells(b));
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

/// Runs both configurations from the same initial map.
pub fn compare(
    init: &DepthMap,
    target: &DepthMap,
    k: &Intrinsics,
    cfg_a: &FitConfig,
    cfg_b: &FitConfig,
) -> Result<Comparison> {
    Ok(Comparison {
        a: fit(init, target, k, cfg_a)?,
        b: fit(init, target, k, cfg_b)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scene() -> (DepthMap, Intrinsics) {
        let k = Intrinsics::new(20.0, 20.0, 7.5, 7.5).unwrap();
        let vals = (0..256)
            .map(|i| 40.0 + ((i % 16) as f64 * 0.3).sin() * 2.0 + (i / 16) as f64 * 0.1)
            .collect();
        (DepthMap::new(16, 16, vals).unwrap(), k)
    }

    #[test]
    fn zero_iterations_return_init() {
        let (target, k) = scene();
        let init = noisy_init(&target, 1.0, 3);
        let cfg = FitConfig {
            iterations: 0,
            ..Default::default()
        };
        let r = fit(&init, &target, &k, &cfg).unwrap();
        assert_eq!(r.final_depth, init);
        assert_eq!(r.trajectory.len(), 1);
        assert_eq!(r.trajectory[0].iteration, 0);
    }

    #[test]
    fn trajectory_iterations_strictly_increase_and_end_at_budget() {
        let (target, k) = scene();
        let init = noisy_init(&target, 1.0, 3);
        let cfg = FitConfig {
            iterations: 25,
            record_every: 10,
            learning_rate: 10.0,
            ..Default::default()
        };
        let r = fit(&init, &target, &k, &cfg).unwrap();
        let its: Vec<usize> = r.trajectory.iter().map(|s| s.iteration).collect();
        assert_eq!(its, vec![0, 10, 20, 25]);
        assert!(r.last().loss.total < r.first().loss.total);
    }

    #[test]
    fn invalid_init_pixels_stay_untouched() {
        let (target, k) = scene();
        let mut init = noisy_init(&target, 1.0, 3);
        init.set(5, 5, f64::NAN);
        init.set(0, 0, -1.0);
        let cfg = FitConfig {
            iterations: 5,
            learning_rate: 50.0,
            ..Default::default()
        };
        let r = fit(&init, &target, &k, &cfg).unwrap();
        assert!(r.final_depth.get(5, 5).is_nan());
        assert_eq!(r.final_depth.get(0, 0), -1.0);
    }

    #[test]
    fn depth_floor_holds() {
        let (target, k) = scene();
        let init = DepthMap::filled(16, 16, 0.01);
        let cfg = FitConfig {
            iterations: 3,
            learning_rate: -1.0,
            ..Default::default()
        };
        assert!(fit(&init, &target, &k, &cfg).is_err());
        let far = DepthMap::filled(16, 16, 1.0);
        let target = DepthMap::filled(16, 16, 0.002);
        let cfg = FitConfig {
            iterations: 4,
            learning_rate: 1e4,
            ..Default::default()
        };
        let r = fit(&far, &target, &k, &cfg).unwrap();
        assert!(r.final_depth.values().iter().all(|&v| v >= DEPTH_FLOOR));
    }

    #[test]
    fn shape_mismatch() {
        let (target, k) = scene();
        let init = DepthMap::filled(4, 4, 1.0);
        assert!(matches!(
            fit(&init, &target, &k, &FitConfig::default()),
            Err(Error::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn comparison_csv_shape() {
        let (target, k) = scene();
        let init = noisy_init(&target, 1.0, 3);
        let a = FitConfig {
            iterations: 0,
            ..Default::default()
        };
        let c = compare(&init, &target, &k, &a, &a).unwrap();
        let csv = c.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[0].split(',').count(), 19);
        let row: Vec<&str> = lines[1].split(',').collect();
        assert_eq!(row[1..10], row[10..19]);
    }
}
