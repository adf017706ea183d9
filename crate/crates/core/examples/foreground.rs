// Approximate foreground separation around a handful of anchors, with a
// small share of background blended back.

use plsparse::foreground::{self, SeparationConfig};
use plsparse::{Frame, PointCloud, Tag};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn run_example() -> plsparse::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let points = (0..50_000)
        .map(|_| [rng.random_range(-20.0..20.0), rng.random_range(-2.0..2.0), rng.random_range(2.0..60.0)])
        .collect();
    let cloud = PointCloud::new(points, Frame::CameraRect);
    let anchors = [[0.0, 0.0, 10.0], [4.0, 1.0, 22.0], [-6.0, 0.5, 35.0]];

    let cfg = SeparationConfig::default();
    let (tagged, counts) = foreground::separate(&cloud, &anchors, &cfg)?;
    let blended = foreground::blend_background(&tagged, &cfg)?;
    println!("foreground {}, background {}", counts.foreground, counts.background);
    println!(
        "blended {} = {} foreground + {} background",
        blended.len(),
        blended.count_tag(Tag::Foreground),
        blended.count_tag(Tag::Background)
    );
    Ok(())
}

fn main() -> plsparse::Result<()> {
    run_example()
}
