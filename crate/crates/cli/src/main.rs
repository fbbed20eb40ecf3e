//! `opdepth`: command-line front end for opdepth-core.
//!
//! Depth maps are read and written as PFM, or as comma-separated text when the
//! file name ends in `.csv`. Run configuration comes from an optional
//! `--config` file of `section.key = value` lines; any flag that mirrors a
//! config key overrides the file.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod files;

#[derive(Parser, Debug)]
#[command(
    name = "opdepth",
    version,
    about = "Depth back-projection, oriented-point loss and fitting tools"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Loss weights. Each flag overrides the `loss.*` key of the same name.
#[derive(Args, Debug, Default, Clone)]
pub struct LossFlags {
    /// Point-distance weight α1, dimensionless [loss.alpha1, default 1]
    #[arg(long, value_name = "WEIGHT")]
    pub alpha1: Option<f64>,
    /// Normal-similarity weight α2, dimensionless [loss.alpha2, default 1]
    #[arg(long, value_name = "WEIGHT")]
    pub alpha2: Option<f64>,
    /// Normal regularizer weight β, dimensionless [loss.beta, default 1]
    #[arg(long, value_name = "WEIGHT")]
    pub beta: Option<f64>,
    /// Weight λ of the oriented-point loss added to image L1, dimensionless [loss.lambda, default 0.05]
    #[arg(long, value_name = "WEIGHT")]
    pub lambda: Option<f64>,
    /// Alignment similarity, normalized_align or raw_dot (unitless choice) [loss.similarity_mode]
    #[arg(long, value_name = "MODE")]
    pub similarity_mode: Option<String>,
    /// Reduction over pixels, sum or mean (unitless choice) [loss.reduction, default sum; fit always uses mean]
    #[arg(long, value_name = "MODE")]
    pub reduction: Option<String>,
}

/// Gradient-descent schedule. Each flag overrides the `fit.*` key of the same name.
#[derive(Args, Debug, Default, Clone)]
pub struct FitFlags {
    /// Step size in mm per unit gradient [fit.learning_rate, default 1]
    #[arg(long, value_name = "MM")]
    pub learning_rate: Option<f64>,
    /// Number of descent steps (count) [fit.iterations, default 100]
    #[arg(long, value_name = "COUNT")]
    pub iterations: Option<usize>,
    /// Trajectory sampling stride in iterations [fit.record_every, default 10]
    #[arg(long, value_name = "ITERATIONS")]
    pub record_every: Option<usize>,
    /// Seed of the initialization noise (integer) [fit.seed, default 0]
    #[arg(long, value_name = "SEED")]
    pub seed: Option<u64>,
    /// Standard deviation in mm of Gaussian noise added to the initial map [fit.noise_sigma, default 0]
    #[arg(long, value_name = "MM")]
    pub noise_sigma: Option<f64>,
}

/// Synthetic surface. Each flag overrides the `scene.*` key of the same name.
#[derive(Args, Debug, Default, Clone)]
pub struct SceneFlags {
    /// Surface kind, one of plane, sphere or sinusoid (unitless choice) [scene.type]
    #[arg(long, value_name = "KIND")]
    pub scene_type: Option<String>,
    /// Plane normal as x,y,z (dimensionless direction, normalized on read) [scene.normal]
    #[arg(long, value_name = "X,Y,Z", allow_hyphen_values = true)]
    pub normal: Option<String>,
    /// Plane offset d0 in mm, for points with n·p = d0 [scene.offset]
    #[arg(long, value_name = "MM", allow_hyphen_values = true)]
    pub offset: Option<f64>,
    /// Sphere centre as x,y,z in mm [scene.center]
    #[arg(long, value_name = "X,Y,Z", allow_hyphen_values = true)]
    pub center: Option<String>,
    /// Sphere radius in mm [scene.radius]
    #[arg(long, value_name = "MM")]
    pub radius: Option<f64>,
    /// Sinusoid mean depth in mm [scene.z0]
    #[arg(long, value_name = "MM")]
    pub z0: Option<f64>,
    /// Sinusoid amplitude in mm [scene.amplitude]
    #[arg(long, value_name = "MM")]
    pub amplitude: Option<f64>,
    /// Sinusoid angular frequency along x in rad/pixel [scene.omega_x]
    #[arg(long, value_name = "RAD_PER_PIXEL")]
    pub omega_x: Option<f64>,
    /// Sinusoid angular frequency along y in rad/pixel [scene.omega_y]
    #[arg(long, value_name = "RAD_PER_PIXEL")]
    pub omega_y: Option<f64>,
    /// Image width in pixels [scene.width, default 64]
    #[arg(long, value_name = "PIXELS")]
    pub width: Option<usize>,
    /// Image height in pixels [scene.height, default: width]
    #[arg(long, value_name = "PIXELS")]
    pub height: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Render a synthetic depth map (mm) of a plane, sphere or sinusoid
    Gen {
        /// Camera intrinsics file (fx, fy, cx, cy in pixels; optional skew)
        #[arg(long, value_name = "PATH")]
        intrinsics: PathBuf,
        /// Output depth map in mm (.pfm, or .csv)
        #[arg(long, value_name = "PATH")]
        out: PathBuf,
        /// Config file with scene.* and noise.* keys
        #[arg(long, value_name = "PATH")]
        config: Option<PathBuf>,
        #[command(flatten)]
        scene: SceneFlags,
        /// Standard deviation in mm of Gaussian noise added to the render [noise.sigma, default 0]
        #[arg(long, value_name = "MM")]
        noise_sigma: Option<f64>,
        /// Noise seed (integer) [noise.seed, default 0]
        #[arg(long, value_name = "SEED")]
        noise_seed: Option<u64>,
    },
    /// Back-project a depth map to an oriented point cloud (ASCII PLY, mm)
    Backproject {
        /// Input depth map in mm (.pfm or .csv)
        #[arg(long, value_name = "PATH")]
        depth: PathBuf,
        /// Camera intrinsics file (pixels)
        #[arg(long, value_name = "PATH")]
        intrinsics: PathBuf,
        /// Output PLY with positions in mm and unit normals
        #[arg(long, value_name = "PATH")]
        out: PathBuf,
        /// Keep points whose normal is invalid, with a (0,0,0) placeholder normal
        #[arg(long)]
        keep_invalid_normals: bool,
        /// Orient exported normals towards the camera (negative z)
        #[arg(long)]
        flip_to_camera: bool,
    },
    /// Estimate surface normals (unit, or raw in mm²/pixel²) from a depth map
    Normals {
        /// Input depth map in mm (.pfm or .csv)
        #[arg(long, value_name = "PATH")]
        depth: PathBuf,
        /// Camera intrinsics file (pixels)
        #[arg(long, value_name = "PATH")]
        intrinsics: PathBuf,
        /// Directory for normal_x.pfm, normal_y.pfm, normal_z.pfm (0,0,0 marks invalid)
        #[arg(long, value_name = "DIR")]
        out_dir: Option<PathBuf>,
        /// Also or instead write an oriented point cloud (PLY, mm)
        #[arg(long, value_name = "PATH")]
        ply: Option<PathBuf>,
        /// Write raw cross-product normals (mm²/pixel²) to the PFMs instead of unit normals
        #[arg(long)]
        raw: bool,
        /// Orient normals towards the camera (negative z)
        #[arg(long)]
        flip_to_camera: bool,
    },
    /// Print the loss breakdown (mm-based terms, dimensionless weights) as CSV
    Loss {
        /// Predicted depth map in mm
        #[arg(long, value_name = "PATH")]
        pred: PathBuf,
        /// Ground-truth depth map in mm
        #[arg(long, value_name = "PATH")]
        gt: PathBuf,
        /// Camera intrinsics file (pixels)
        #[arg(long, value_name = "PATH")]
        intrinsics: PathBuf,
        /// Config file with loss.* keys
        #[arg(long, value_name = "PATH")]
        config: Option<PathBuf>,
        #[command(flatten)]
        loss: LossFlags,
    },
    /// Check the analytic loss gradient against central finite differences
    ///
    /// Exits 0 when the maximum relative error is below the threshold, 2 when
    /// it is not, and 1 on any other error.
    Gradcheck {
        /// Predicted depth map in mm
        #[arg(long, value_name = "PATH")]
        pred: PathBuf,
        /// Ground-truth depth map in mm
        #[arg(long, value_name = "PATH")]
        gt: PathBuf,
        /// Camera intrinsics file (pixels)
        #[arg(long, value_name = "PATH")]
        intrinsics: PathBuf,
        /// Config file with loss.* and gradcheck.* keys
        #[arg(long, value_name = "PATH")]
        config: Option<PathBuf>,
        #[command(flatten)]
        loss: LossFlags,
        /// Finite-difference step in mm [gradcheck.step, default 1e-4]
        #[arg(long, value_name = "MM")]
        step: Option<f64>,
        /// Pass threshold on the maximum relative error (dimensionless) [gradcheck.threshold, default 1e-5]
        #[arg(long, value_name = "RATIO")]
        threshold: Option<f64>,
        /// Test hook: scale the analytic gradient by 1.001 before checking
        #[arg(long, hide = true)]
        corrupt_gradient: bool,
    },
    /// Print MAE and RMSE in mm over jointly valid pixels as CSV
    Metrics {
        /// Predicted depth map in mm
        #[arg(long, value_name = "PATH")]
        pred: PathBuf,
        /// Ground-truth depth map in mm
        #[arg(long, value_name = "PATH")]
        gt: PathBuf,
        /// Row label in the output table (text)
        #[arg(long, value_name = "NAME", default_value = "pred")]
        name: String,
    },
    /// Fit a depth map (mm) to a target by per-pixel gradient descent
    ///
    /// The target comes from --target or, failing that, from the scene.* keys
    /// of the config file. The initial map is --init, or the target itself;
    /// fit.noise_sigma then adds seeded Gaussian noise to it.
    Fit {
        /// Initial depth map in mm (default: the target)
        #[arg(long, value_name = "PATH")]
        init: Option<PathBuf>,
        /// Target depth map in mm (default: rendered from scene.* config keys)
        #[arg(long, value_name = "PATH")]
        target: Option<PathBuf>,
        /// Camera intrinsics file (pixels)
        #[arg(long, value_name = "PATH")]
        intrinsics: PathBuf,
        /// Config file with loss.*, fit.* and scene.* keys
        #[arg(long, value_name = "PATH")]
        config: Option<PathBuf>,
        /// Output directory for final_depth.pfm (mm) and trajectory.csv
        #[arg(long, value_name = "DIR")]
        out_dir: PathBuf,
        #[command(flatten)]
        loss: LossFlags,
        #[command(flatten)]
        fit: FitFlags,
    },
    /// Run two fit configurations from the same initial map and tabulate both trajectories
    ///
    /// Scene and initialization noise come from config A unless given as
    /// flags; config B may not specify different ones.
    Compare {
        /// Config file for run A (loss.*, fit.*, scene.* keys)
        #[arg(long, value_name = "PATH")]
        config_a: PathBuf,
        /// Config file for run B (loss.*, fit.*, scene.* keys)
        #[arg(long, value_name = "PATH")]
        config_b: PathBuf,
        /// Initial depth map in mm (default: the target)
        #[arg(long, value_name = "PATH")]
        init: Option<PathBuf>,
        /// Target depth map in mm (default: rendered from scene.* config keys)
        #[arg(long, value_name = "PATH")]
        target: Option<PathBuf>,
        /// Camera intrinsics file (pixels)
        #[arg(long, value_name = "PATH")]
        intrinsics: PathBuf,
        /// Standard deviation in mm of the shared initialization noise [fit.noise_sigma]
        #[arg(long, value_name = "MM")]
        noise_sigma: Option<f64>,
        /// Seed of the shared initialization noise (integer) [fit.seed]
        #[arg(long, value_name = "SEED")]
        seed: Option<u64>,
        /// Output CSV with iteration, a_* and b_* columns (default: standard output)
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
    },
}

/// Failure kinds mapped to exit statuses.
#[derive(Debug)]
pub enum Failure {
    Error(anyhow::Error),
    /// The gradient check ran but did not meet its threshold.
    CheckFailed,
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Error(e)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::CheckFailed) => ExitCode::from(2),
        Err(Failure::Error(e)) => {
            eprintln!("opdepth: error: {e:#}");
            ExitCode::from(1)
        }
    }
}
