use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use plsparse::sampler::{self, RangeMode, StratifyConfig, RATE_LADDER};
use plsparse::{Frame, PointCloud};

fn random_cloud(seed: u64, n: usize, reach: f64) -> PointCloud {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points = (0..n)
        .map(|_| [rng.random_range(-reach..reach), rng.random_range(-3.0..3.0), rng.random_range(0.0..reach)])
        .collect();
    PointCloud::new(points, Frame::CameraRect)
}

fn oracle_bin(p: &[f64; 3], bin_width: f64, max_range: f64) -> usize {
    let r = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
    let regular = (max_range / bin_width).ceil() as usize;
    if r >= max_range {
        regular
    } else {
        (r / bin_width) as usize
    }
}

fn oracle_quota(n: usize, rate: f64, min_keep: usize) -> usize {
    let by_rate = (rate * n as f64 + 0.5).floor() as usize;
    n.min(min_keep.max(by_rate))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn stratification_matches_floor_oracle(seed in any::<u64>(), bw in 0.5f64..12.0, max_range in 5.0f64..90.0) {
        let cloud = random_cloud(seed, 2000, 100.0);
        let cfg = StratifyConfig { bin_width: bw, max_range, ..Default::default() };
        let bins = sampler::stratify(&cloud, &cfg).unwrap();
        prop_assert_eq!(bins.iter().map(Vec::len).sum::<usize>(), cloud.len());
        for (b, members) in bins.iter().enumerate() {
            for &i in members {
                prop_assert_eq!(oracle_bin(&cloud.points[i], bw, max_range), b);
            }
        }
    }

    #[test]
    fn kept_counts_match_closed_form(seed in any::<u64>(), n in 0usize..3000, rate in 0.01f64..=1.0, min_keep in 0usize..30) {
        let cloud = random_cloud(seed, n, 90.0);
        let cfg = StratifyConfig { rate, min_keep_per_bin: min_keep, seed, ..Default::default() };
        let (out, counts) = sampler::sample_with_counts(&cloud, &cfg).unwrap();
        let mut total = vec![0usize; cfg.bin_count()];
        for p in &cloud.points {
            total[oracle_bin(p, cfg.bin_width, cfg.max_range)] += 1;
        }
        prop_assert_eq!(&counts.total, &total);
        for (b, &n_b) in total.iter().enumerate() {
            let k = oracle_quota(n_b, rate, min_keep);
            prop_assert_eq!(counts.kept[b], k);
            if n_b > 0 {
                let dev = (k as f64 / n_b as f64 - rate).abs();
                prop_assert!(dev <= min_keep.max(1) as f64 / n_b as f64 + 1e-12 || k == n_b);
            }
        }
        prop_assert_eq!(out.len(), counts.kept.iter().sum::<usize>());
    }

    #[test]
    fn output_is_ordered_subset_and_deterministic(seed in any::<u64>(), rate in 0.05f64..=1.0) {
        let cloud = random_cloud(seed, 1500, 80.0);
        let cfg = StratifyConfig { rate, seed, ..Default::default() };
        let out = sampler::sample(&cloud, &cfg).unwrap();
        let mut cursor = 0;
        for p in &out.points {
            let j = cloud.points[cursor..].iter().position(|q| q == p).unwrap();
            cursor += j + 1;
        }
        prop_assert_eq!(&out, &sampler::sample(&cloud, &cfg).unwrap());
    }

    #[test]
    fn kept_count_monotone_in_rate(n in 0usize..100_000, min_keep in 0usize..50, a in 0.01f64..=1.0, b in 0.01f64..=1.0) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let q = |rate| StratifyConfig { rate, min_keep_per_bin: min_keep, ..Default::default() }.quota(n);
        prop_assert!(q(lo) <= q(hi));
    }
}

#[test]
fn rate_ladder_counts() {
    let cloud = random_cloud(11, 20_000, 75.0);
    let mut previous = usize::MAX;
    for rate in RATE_LADDER {
        let cfg = StratifyConfig { rate, ..Default::default() };
        let (out, counts) = sampler::sample_with_counts(&cloud, &cfg).unwrap();
        for (&n, &k) in counts.total.iter().zip(&counts.kept) {
            assert_eq!(k, oracle_quota(n, rate, 0));
        }
        assert!(out.len() <= previous);
        previous = out.len();
    }
}

#[test]
fn depth_mode_bins_on_forward_axis() {
    let cloud = PointCloud::new(vec![[40.0, 0.0, 3.0], [0.0, 0.0, 12.0]], Frame::CameraRect);
    let cfg = StratifyConfig { range_mode: RangeMode::Depth, ..Default::default() };
    let bins = sampler::stratify(&cloud, &cfg).unwrap();
    assert_eq!((bins[0].clone(), bins[2].clone()), (vec![0], vec![1]));
}
