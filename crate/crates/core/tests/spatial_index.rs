use std::time::Instant;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use plsparse::spatial_index::SpatialIndex;

fn d2(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    (0..3).map(|k| (a[k] - b[k]) * (a[k] - b[k])).sum()
}

fn brute_ball(points: &[[f64; 3]], c: &[f64; 3], r: f64) -> Vec<usize> {
    (0..points.len()).filter(|&i| d2(&points[i], c) <= r * r).collect()
}

fn brute_knn(points: &[[f64; 3]], c: &[f64; 3], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..points.len()).collect();
    idx.sort_by(|&a, &b| d2(&points[a], c).total_cmp(&d2(&points[b], c)).then(a.cmp(&b)));
    idx.truncate(k);
    idx
}

/// Points on a coarse lattice, so exact ties and boundary hits are common.
fn lattice_points(rng: &mut ChaCha8Rng, n: usize) -> Vec<[f64; 3]> {
    (0..n)
        .map(|_| [0; 3].map(|_: i32| rng.random_range(-20i32..20) as f64 * 0.25))
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn queries_match_brute_force(seed in any::<u64>(), n in 1usize..600, leaf in 1usize..40) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let points = lattice_points(&mut rng, n);
        let index = SpatialIndex::build(&points, leaf).unwrap();
        for _ in 0..10 {
            let c = if rng.random_bool(0.5) {
                points[rng.random_range(0..n)]
            } else {
                [0; 3].map(|_: i32| rng.random_range(-6.0..6.0))
            };
            let r = rng.random_range(0..12) as f64 * 0.25;
            prop_assert_eq!(index.ball_query(&c, r).unwrap(), brute_ball(&points, &c, r));
            let k = rng.random_range(1..=n);
            let got: Vec<usize> = index.knn_query(&c, k).unwrap().into_iter().map(|(i, _)| i).collect();
            prop_assert_eq!(got, brute_knn(&points, &c, k));
        }
    }

    #[test]
    fn results_do_not_depend_on_leaf_size(seed in any::<u64>(), a in 1usize..64, b in 1usize..64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let points = lattice_points(&mut rng, 400);
        let (ia, ib) = (SpatialIndex::build(&points, a).unwrap(), SpatialIndex::build(&points, b).unwrap());
        for _ in 0..20 {
            let c = points[rng.random_range(0..points.len())];
            let r = rng.random_range(0.0..3.0);
            prop_assert_eq!(ia.ball_query(&c, r).unwrap(), ib.ball_query(&c, r).unwrap());
            prop_assert_eq!(ia.knn_query(&c, 7).unwrap(), ib.knn_query(&c, 7).unwrap());
        }
    }
}

#[test]
fn self_query_and_duplicates() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut points: Vec<[f64; 3]> = (0..500).map(|_| [0; 3].map(|_: i32| rng.random_range(-5.0..5.0))).collect();
    points.push(points[17]);
    let index = SpatialIndex::build(&points, 8).unwrap();
    for (i, p) in points.iter().enumerate() {
        let hits = index.ball_query(p, 0.0).unwrap();
        assert!(hits.contains(&i));
    }
    assert_eq!(index.ball_query(&points[17], 0.0).unwrap(), vec![17, 500]);
    assert_eq!(index.knn_query(&points[17], 1).unwrap(), vec![(17, 0.0)]);
    assert_eq!(index.ball_query(&[0.0; 3], 100.0).unwrap().len(), points.len());
}

#[test]
fn knn_full_is_sorted_distance_list() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let points: Vec<[f64; 3]> = (0..300).map(|_| [0; 3].map(|_: i32| rng.random_range(-5.0..5.0))).collect();
    let index = SpatialIndex::build(&points, 16).unwrap();
    let c = [0.3, -0.2, 1.0];
    let all = index.knn_query(&c, points.len()).unwrap();
    assert_eq!(all.iter().map(|&(i, _)| i).collect::<Vec<_>>(), brute_knn(&points, &c, points.len()));
    assert!(all.windows(2).all(|w| w[0].1 <= w[1].1));
}

#[test]
fn build_scales_near_n_log_n() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let points: Vec<[f64; 3]> = (0..400_000).map(|_| [0; 3].map(|_: i32| rng.random_range(-50.0..50.0))).collect();
    let time = |n: usize| {
        (0..3)
            .map(|_| {
                let t = Instant::now();
                std::hint::black_box(SpatialIndex::build(&points[..n], 16).unwrap());
                t.elapsed().as_secs_f64()
            })
            .fold(f64::INFINITY, f64::min)
    };
    let ratio = time(400_000) / time(200_000);
    assert!(ratio < 2.4, "doubling n multiplied build time by {ratio:.2}");
}
