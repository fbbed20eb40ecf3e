//! File formats: PFM depth maps, key-value text (intrinsics and run
//! configuration), comma-separated depth grids and ASCII PLY point clouds.

mod csv;
mod keyvalue;
mod pfm;
mod ply;

pub use self::csv::{read_csv_depth, write_csv_depth};
pub use self::keyvalue::{read_intrinsics, write_intrinsics, KeyValues};
pub use self::pfm::{read_pfm, write_pfm, write_pfm_raw};
pub use self::ply::{export_ply, OrientedPoint, OrientedPointCloud};

/// Full-precision text form of a float: 17 significant digits, so parsing the
/// output recovers the exact value.
pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "nan".to_string()
    } else if v > 0.0 {
        "inf".to_string()
    } else {
        "-inf".to_string()
    }
}
