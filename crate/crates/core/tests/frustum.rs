use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use plsparse::foreground::SeparationConfig;
use plsparse::frustum::{self, FrustumConfig, Mask, Region2D, RegionShape};
use plsparse::kitti_io::CameraCalib;
use plsparse::projection::{DepthMap, RangeCropConfig};
use plsparse::sampler::StratifyConfig;
use plsparse::{Frame, PointCloud};

const W: usize = 160;
const H: usize = 90;

fn calib() -> CameraCalib {
    CameraCalib::from_intrinsics(150.0, 150.0, 80.2, 44.7)
}

fn random_cloud(rng: &mut ChaCha8Rng, n: usize) -> PointCloud {
    let points = (0..n)
        .map(|_| {
            let z = rng.random_range(-1.0..30.0);
            [rng.random_range(-20.0..20.0), rng.random_range(-8.0..8.0), z]
        })
        .collect();
    PointCloud::new(points, Frame::CameraRect)
}

fn random_box(rng: &mut ChaCha8Rng) -> [f64; 4] {
    let (l, t) = (rng.random_range(-10.0..W as f64), rng.random_range(-10.0..H as f64));
    [l, t, l + rng.random_range(0.5..60.0), t + rng.random_range(0.5..40.0)]
}

fn fg(cloud: &PointCloud, regions: &[Region2D], dilate_px: usize) -> Vec<usize> {
    let cfg = FrustumConfig { score_floor: 0.0, dilate_px };
    let (tagged, _) = frustum::extract(cloud, regions, &calib(), (W, H), &cfg).unwrap();
    frustum::foreground_indices(&tagged)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn box_and_rasterized_mask_agree(seed in any::<u64>(), dilate in 0usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cloud = random_cloud(&mut rng, 3000);
        let b = random_box(&mut rng);
        let mask = Mask::rasterize_box(W, H, b);
        prop_assume!(mask.data.iter().any(|&m| m));
        let as_box = fg(&cloud, &[Region2D::from_box(b, "Car", 1.0)], dilate);
        let as_mask = fg(&cloud, &[Region2D { shape: RegionShape::Mask(mask), class_name: "Car".into(), score: 1.0 }], dilate);
        prop_assert_eq!(as_box, as_mask);
    }

    #[test]
    fn dilation_is_monotone(seed in any::<u64>(), a in 0usize..8, b in 0usize..8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cloud = random_cloud(&mut rng, 2000);
        let regions: Vec<Region2D> = (0..3).map(|_| Region2D::from_box(random_box(&mut rng), "Car", 0.9)).collect();
        let (lo, hi) = (fg(&cloud, &regions, a.min(b)), fg(&cloud, &regions, a.max(b)));
        prop_assert!(lo.iter().all(|i| hi.binary_search(i).is_ok()));
    }
}

#[test]
fn points_straddling_a_box_edge() {
    let c = calib();
    let b = [40.0, 20.0, 90.0, 60.0];
    let dilate = 2usize;
    let z = 12.0;
    let mut pixels = Vec::new();
    for du in [-3.6, -2.6, -2.4, -0.6, -0.4, 0.0, 0.4, 0.6] {
        pixels.push((b[0] + du, 40.0));
        pixels.push((b[2] - du, 40.0));
        pixels.push((60.0, b[1] + du));
        pixels.push((60.0, b[3] - du));
    }
    let points: Vec<[f64; 3]> = pixels
        .iter()
        .map(|&(u, v)| [(u - c.cx()) * z / c.fx(), (v - c.cy()) * z / c.fy(), z])
        .collect();
    let cloud = PointCloud::new(points.clone(), Frame::CameraRect);
    let got = fg(&cloud, &[Region2D::from_box(b, "Car", 1.0)], dilate);
    let d = dilate as f64;
    let expected: Vec<usize> = points
        .iter()
        .enumerate()
        .filter(|(_, p)| {
            let u = (c.fx() * p[0] / p[2] + c.cx()).round();
            let v = (c.fy() * p[1] / p[2] + c.cy()).round();
            u >= b[0] - d && u <= b[2] + d && v >= b[1] - d && v <= b[3] + d
        })
        .map(|(i, _)| i)
        .collect();
    assert_eq!(got, expected);
    assert!(!expected.is_empty() && expected.len() < points.len());
}

#[test]
fn score_floor_is_inclusive() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let cloud = random_cloud(&mut rng, 500);
    let region = Region2D::from_box([0.0, 0.0, W as f64 - 1.0, H as f64 - 1.0], "Car", 0.5);
    let run = |floor: f64| {
        let cfg = FrustumConfig { score_floor: floor, dilate_px: 0 };
        frustum::extract(&cloud, std::slice::from_ref(&region), &calib(), (W, H), &cfg).unwrap().1
    };
    assert_eq!(run(0.5).per_region, vec![Some(run(0.0).separation.foreground)]);
    assert_eq!(run(0.5 + 1e-12).per_region, vec![None]);
    assert_eq!(run(0.5 + 1e-12).separation.foreground, 0);
}

#[test]
fn supervised_count_composes_in_closed_form() {
    let depth = DepthMap::uniform(W, H, 10.0);
    // Two boxes, 28% of the image between them.
    let regions = vec![
        Region2D::from_box([0.0, 0.0, 63.0, 44.0], "Car", 1.0),
        Region2D::from_box([96.0, 50.0, 159.0, 67.0], "Pedestrian", 1.0),
    ];
    let inside = 64 * 45 + 64 * 18;
    assert!((inside as f64 / (W * H) as f64 - 0.28).abs() < 0.01);
    let frustum_cfg = FrustumConfig { score_floor: 0.0, dilate_px: 0 };
    let sep = SeparationConfig { bg_keep_ratio: 0.0, ..Default::default() };
    let dss = StratifyConfig::default();
    let (out, counts) =
        frustum::pipeline_supervised(&depth, &calib(), &regions, &RangeCropConfig::default(), &frustum_cfg, &sep, &dss)
            .unwrap();
    assert_eq!(counts.raw, W * H);
    assert_eq!(counts.foreground, inside);
    assert_eq!(counts.blended, inside);
    // Each occupied range bin rounds independently.
    let bins_used = 3.0;
    assert!((out.len() as f64 - 0.1 * inside as f64).abs() <= 0.5 * bins_used);

    let identity = frustum::pipeline_supervised(
        &depth,
        &calib(),
        &[Region2D::from_box([0.0, 0.0, W as f64 - 1.0, H as f64 - 1.0], "Car", 1.0)],
        &RangeCropConfig::default(),
        &frustum_cfg,
        &sep,
        &StratifyConfig { rate: 1.0, ..Default::default() },
    )
    .unwrap();
    assert_eq!(identity.1.sampled, W * H);
}
