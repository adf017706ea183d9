use nalgebra::{Matrix3, Matrix3x4, Rotation3};
use proptest::prelude::*;

use plsparse::kitti_io::CameraCalib;
use plsparse::projection::{self, DepthMap, RangeCropConfig};
use plsparse::{Frame, PointCloud};

fn kitti_intrinsics() -> CameraCalib {
    CameraCalib::from_intrinsics(721.5377, 721.5377, 609.5593, 172.854)
}

fn rigid_calib(angles: [f64; 3], t: [f64; 3], rect: [f64; 3]) -> CameraCalib {
    let mut calib = kitti_intrinsics();
    let r = Rotation3::from_euler_angles(angles[0], angles[1], angles[2]);
    calib.sensor_to_camera = Matrix3x4::from_fn(|i, j| if j < 3 { r[(i, j)] } else { t[i] });
    calib.rect_rotation = *Rotation3::from_euler_angles(rect[0], rect[1], rect[2]).matrix();
    calib
}

fn random_depth(w: usize, h: usize, seed: u64) -> DepthMap {
    let mut state = seed;
    let mut next = || {
        state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (state >> 11) as f64 / (1u64 << 53) as f64
    };
    let mut d = DepthMap::uniform(w, h, 1.0);
    for i in 0..w * h {
        d.valid[i] = next() > 0.2;
        d.depth[i] = 0.5 + 90.0 * next();
    }
    d
}

#[test]
fn full_kitti_frame_point_count() {
    let depth = DepthMap::uniform(1242, 375, 15.0);
    let cloud = projection::backproject(&depth, &kitti_intrinsics(), &RangeCropConfig::none()).unwrap();
    assert_eq!(cloud.len(), 465_750);
}

#[test]
fn count_equals_valid_in_crop_pixels() {
    let calib = kitti_intrinsics();
    let depth = random_depth(300, 120, 7);
    let crop = RangeCropConfig::default();
    let cloud = projection::backproject(&depth, &calib, &crop).unwrap();
    let mut expected = 0;
    for v in 0..depth.height {
        for u in 0..depth.width {
            if let Some(z) = depth.get(u, v) {
                let x = (u as f64 - calib.cx()) * z / calib.fx();
                expected += usize::from(z <= 70.0 && x.abs() <= 40.0);
            }
        }
    }
    assert_eq!(cloud.len(), expected);
    assert!(cloud.points.iter().all(|p| p[2] <= 70.0 && p[0].abs() <= 40.0));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn pixel_round_trip(w in 8usize..120, h in 8usize..60, seed in any::<u64>()) {
        let calib = kitti_intrinsics();
        let depth = random_depth(w, h, seed);
        let (cloud, pixels) = projection::backproject_with_pixels(&depth, &calib, &RangeCropConfig::none()).unwrap();
        let proj = projection::project_to_pixels(&cloud, &calib).unwrap();
        prop_assert_eq!(proj.behind_camera, 0);
        prop_assert_eq!(proj.hits.len(), pixels.len());
        for (hit, &px) in proj.hits.iter().zip(&pixels) {
            let (u, v) = ((px % w) as f64, (px / w) as f64);
            prop_assert!((hit.u - u).abs() < 1e-6 && (hit.v - v).abs() < 1e-6);
            prop_assert!((hit.z - depth.depth[px]).abs() < 1e-6);
        }
    }

    #[test]
    fn frame_round_trip_and_rigidity(
        angles in prop::array::uniform3(-3.1f64..3.1),
        rect in prop::array::uniform3(-0.05f64..0.05),
        t in prop::array::uniform3(-2.0f64..2.0),
        pts in prop::collection::vec(prop::array::uniform3(-80.0f64..80.0), 2..60),
    ) {
        let calib = rigid_calib(angles, t, rect);
        let cloud = PointCloud::new(pts.clone(), Frame::CameraRect);
        let sensor = projection::camera_to_sensor(&cloud, &calib).unwrap();
        prop_assert_eq!(sensor.frame, Frame::Sensor);
        let back = projection::sensor_to_camera_frame(&sensor, &calib).unwrap();
        for (a, b) in pts.iter().zip(&back.points) {
            for k in 0..3 {
                prop_assert!((a[k] - b[k]).abs() < 1e-9);
            }
        }
        let dist = |p: &[f64; 3], q: &[f64; 3]| ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) + (p[2] - q[2]).powi(2)).sqrt();
        for i in 1..pts.len() {
            prop_assert!((dist(&pts[0], &pts[i]) - dist(&sensor.points[0], &sensor.points[i])).abs() < 1e-9);
        }
    }

    #[test]
    fn projection_is_scale_invariant(p in prop::array::uniform3(-20.0f64..20.0), z in 0.5f64..80.0, lambda in 0.1f64..10.0) {
        let calib = kitti_intrinsics();
        let a = projection::project_point(&[p[0], p[1], z], &calib).unwrap();
        let b = projection::project_point(&[lambda * p[0], lambda * p[1], lambda * z], &calib).unwrap();
        prop_assert!((a.0 - b.0).abs() < 1e-9 && (a.1 - b.1).abs() < 1e-9);
    }
}

#[test]
fn pure_translation_shifts_points() {
    let mut calib = kitti_intrinsics();
    calib.sensor_to_camera = Matrix3x4::new(1.0, 0.0, 0.0, 0.5, 0.0, 1.0, 0.0, -1.25, 0.0, 0.0, 1.0, 3.0);
    calib.rect_rotation = Matrix3::identity();
    let cloud = PointCloud::new(vec![[1.0, 2.0, 3.0], [-4.0, 0.0, 9.5]], Frame::Sensor);
    let cam = projection::sensor_to_camera_frame(&cloud, &calib).unwrap();
    assert_eq!(cam.points, vec![[1.5, 0.75, 6.0], [-3.5, -1.25, 12.5]]);
}

#[test]
fn frame_mismatch_is_usage_error() {
    let calib = kitti_intrinsics();
    let cloud = PointCloud::new(vec![[0.0, 0.0, 1.0]], Frame::Sensor);
    assert!(projection::camera_to_sensor(&cloud, &calib).is_err());
    assert!(projection::project_to_pixels(&cloud, &calib).is_err());
}
