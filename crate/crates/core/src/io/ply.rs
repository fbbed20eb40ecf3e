//! ASCII PLY export of oriented point clouds.

use std::fmt::Write;

use nalgebra::{Point3, Vector3};

use crate::grid::{NormalMap, PointMap};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrientedPoint {
    pub position: Point3<f64>,
    /// Unit normal, or zero when exported as an unoriented placeholder.
    pub normal: Vector3<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct OrientedPointCloud {
    pub points: Vec<OrientedPoint>,
    pub colors: Option<Vec<[u8; 3]>>,
}

impl OrientedPointCloud {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Pairs each valid point with its unit normal. Points whose normal is
    /// invalid are dropped, or kept with a zero normal when `keep_unoriented`.
    pub fn from_maps(points: &PointMap, unit_normals: &NormalMap, keep_unoriented: bool) -> Self {
        let mut out = Vec::new();
        for (i, p) in points.iter_valid() {
            if unit_normals.valid_mask()[i] {
                out.push(OrientedPoint {
                    position: *p,
                    normal: unit_normals.values()[i],
                });
            } else if keep_unoriented {
                out.push(OrientedPoint {
                    position: *p,
                    normal: Vector3::zeros(),
                });
            }
        }
        Self {
            points: out,
            colors: None,
        }
    }
}

/// Nine significant digits, shortest form (`1`, not `1.00000000e0`).
fn fmt9(v: f64) -> String {
    let rounded: f64 = format!("{v:.8e}").parse().unwrap_or(v);
    let rounded = if rounded == 0.0 { 0.0 } else { rounded };
    format!("{rounded}")
}

pub fn export_ply(cloud: &OrientedPointCloud) -> Vec<u8> {
    let colors = cloud
        .colors
        .as_ref()
        .filter(|c| c.len() == cloud.points.len());
    let mut s = String::new();
    s.push_str("ply\nformat ascii 1.0\n");
    let _ = writeln!(s, "element vertex {}", cloud.points.len());
    for p in ["x", "y", "z", "nx", "ny", "nz"] {
        let _ = writeln!(s, "property float {p}");
    }
    if colors.is_some() {
        for c in ["red", "green", "blue"] {
            let _ = writeln!(s, "property uchar {c}");
        }
    }
    s.push_str("end_header\n");
    for (i, p) in cloud.points.iter().enumerate() {
        let _ = write!(
            s,
            "{} {} {} {} {} {}",
            fmt9(p.position.x),
            fmt9(p.position.y),
            fmt9(p.position.z),
            fmt9(p.normal.x),
            fmt9(p.normal.y),
            fmt9(p.normal.z)
        );
        if let Some(c) = colors {
            let [r, g, b] = c[i];
            let _ = write!(s, " {r} {g} {b}");
        }
        s.push('\n');
    }
    s.into_bytes()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn body(bytes: &[u8]) -> Vec<String> {
        let text = String::from_utf8(bytes.to_vec()).unwrap();
        let (_, body) = text.split_once("end_header\n").unwrap();
        body.lines().map(str::to_string).collect()
    }

    #[test]
    fn empty_cloud() {
        let text = String::from_utf8(export_ply(&OrientedPointCloud::default())).unwrap();
        assert!(text.starts_with("ply\nformat ascii 1.0\n"));
        assert!(text.contains("element vertex 0\n"));
        assert!(text.ends_with("end_header\n"));
    }

    #[test]
    fn single_point_line() {
        let cloud = OrientedPointCloud {
            points: vec![OrientedPoint {
                position: Point3::new(1.0, 2.0, 3.0),
                normal: Vector3::new(0.0, 0.0, 1.0),
            }],
            colors: None,
        };
        assert_eq!(body(&export_ply(&cloud)), vec!["1 2 3 0 0 1"]);
    }

    #[test]
    fn colours_and_precision() {
        let cloud = OrientedPointCloud {
            points: vec![OrientedPoint {
                position: Point3::new(1.0 / 3.0, -0.0, 12345.678901234),
                normal: Vector3::new(0.6, 0.0, -0.8),
            }],
            colors: Some(vec![[255, 0, 7]]),
        };
        let bytes = export_ply(&cloud);
        let text = String::from_utf8(bytes.clone()).unwrap();
        assert!(text.contains("property uchar red\n"));
        assert_eq!(
            body(&bytes),
            vec!["0.333333333 0 12345.6789 0.6 0 -0.8 255 0 7"]
        );
    }

    #[test]
    fn from_maps_drops_or_keeps_unoriented() {
        let pm = PointMap::from_parts(
            3,
            1,
            vec![
                Point3::new(0.0, 0.0, 1.0),
                Point3::new(1.0, 0.0, 1.0),
                Point3::origin(),
            ],
            vec![true, true, false],
        );
        let nm = NormalMap::from_parts(
            3,
            1,
            vec![Vector3::z(), Vector3::zeros(), Vector3::z()],
            vec![true, false, true],
        );
        assert_eq!(OrientedPointCloud::from_maps(&pm, &nm, false).len(), 1);
        let kept = OrientedPointCloud::from_maps(&pm, &nm, true);
        assert_eq!(kept.len(), 2);
        assert_eq!(kept.points[1].normal, Vector3::zeros());
    }
}
