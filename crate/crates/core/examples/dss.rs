// Distance-stratified sampling over the rate ladder.

use plsparse::sampler::{self, StratifyConfig, RATE_LADDER};
use plsparse::{Frame, PointCloud};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn run_example() -> plsparse::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    // Density falls with range, as in a back-projected depth map.
    let points = (0..100_000)
        .map(|_| {
            let z = 2.0 + 78.0 * rng.random::<f64>().powi(2);
            [rng.random_range(-0.5..0.5) * z, rng.random_range(-1.0..1.5), z]
        })
        .collect();
    let cloud = PointCloud::new(points, Frame::CameraRect);

    for rate in RATE_LADDER {
        let cfg = StratifyConfig { rate, ..Default::default() };
        let (out, counts) = sampler::sample_with_counts(&cloud, &cfg)?;
        let near: Vec<String> = counts.kept.iter().take(4).map(|k| k.to_string()).collect();
        println!("rate {rate:.1}: {} points, first bins {}", out.len(), near.join("/"));
    }
    Ok(())
}

fn main() -> plsparse::Result<()> {
    run_example()
}
