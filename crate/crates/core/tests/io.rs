mod common;

use common::{random_depth, random_intrinsics, rng};
use nalgebra::Point3;
use opdepth_core::io::{
    export_ply, read_intrinsics, read_pfm, write_intrinsics, write_pfm, OrientedPointCloud,
};
use opdepth_core::{
    back_project_map, estimate_normals, render_depth, unit_normals, DepthMap, Intrinsics,
    SurfaceScene,
};

#[test]
fn pfm_golden_bytes() {
    let bytes = write_pfm(&DepthMap::filled(1, 1, 8.0));
    let mut want = b"Pf\n1 1\n-1.0\n".to_vec();
    want.extend(8.0f32.to_le_bytes());
    assert_eq!(bytes, want);
}

#[test]
fn pfm_round_trip_keeps_f32_values_and_masks() {
    let mut r = rng(51);
    for _ in 0..50 {
        let d = random_depth(&mut r, 13, 7, 1e-3, 1e4, 0.2);
        let back = read_pfm(&write_pfm(&d)).unwrap();
        assert_eq!(back.valid_mask(), d.valid_mask());
        for (a, b) in d.values().iter().zip(back.values()) {
            if common::valid(*a) {
                assert_eq!(*b, *a as f32 as f64);
            }
        }
    }
}

#[test]
fn pfm_truncated_payload_is_rejected() {
    let mut bytes = b"Pf\n4 4\n-1.0\n".to_vec();
    bytes.extend(std::iter::repeat_n(0u8, 15 * 4));
    assert!(read_pfm(&bytes).is_err());
}

#[test]
fn intrinsics_round_trip_is_exact() {
    let mut r = rng(52);
    for n in 1..200 {
        let k = random_intrinsics(&mut r, n);
        assert_eq!(read_intrinsics(&write_intrinsics(&k)).unwrap(), k);
    }
}

fn vertex_count(ply: &[u8]) -> (usize, usize) {
    let text = std::str::from_utf8(ply).unwrap();
    let declared = text
        .lines()
        .find_map(|l| l.strip_prefix("element vertex "))
        .unwrap()
        .parse()
        .unwrap();
    let body = text.split("end_header\n").nth(1).unwrap().lines().count();
    (declared, body)
}

#[test]
fn sphere_ply_has_one_vertex_per_valid_normal() {
    let k = Intrinsics::new(40.0, 40.0, 15.5, 15.5).unwrap();
    let scene = SurfaceScene::Sphere {
        center: Point3::new(0.0, 0.0, 80.0),
        radius: 25.0,
    };
    let d = render_depth(&scene, &k, 32, 32).unwrap();
    let normals = unit_normals(&estimate_normals(&d, &k));
    let points = back_project_map(&d, &k);
    let cloud = OrientedPointCloud::from_maps(&points, &normals, false);
    assert_eq!(cloud.len(), normals.valid_count());
    assert!(!cloud.is_empty() && cloud.len() < d.valid_count());
    assert_eq!(
        vertex_count(&export_ply(&cloud)),
        (cloud.len(), cloud.len())
    );

    let all = OrientedPointCloud::from_maps(&points, &normals, true);
    assert_eq!(all.len(), d.valid_count());
    assert_eq!(vertex_count(&export_ply(&all)), (all.len(), all.len()));
}

#[test]
fn empty_cloud_is_valid_ply() {
    let cloud = OrientedPointCloud {
        points: vec![],
        colors: None,
    };
    assert_eq!(vertex_count(&export_ply(&cloud)), (0, 0));
}
