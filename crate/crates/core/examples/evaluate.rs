// BEV and 3D average precision of jittered detections against rendered
// ground truth.

use plsparse::eval3d::{self, EvalConfig, FrameLabels};
use plsparse::fixtures::{render, scene_suite};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn run_example() -> plsparse::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut frames = Vec::new();
    for spec in scene_suite() {
        let gts = render(&spec)?.gt;
        let dets = gts
            .iter()
            .map(|g| {
                let mut d = g.clone();
                // Displace by up to a tenth of the box size.
                d.location[0] += rng.random_range(-0.1..0.1) * g.dims[1];
                d.location[2] += rng.random_range(-0.1..0.1) * g.dims[2];
                d.location[1] += rng.random_range(-0.1..0.1) * g.dims[0];
                d.yaw += rng.random_range(-0.1..0.1);
                d.score = Some(rng.random_range(0.3..1.0));
                d
            })
            .collect();
        frames.push(FrameLabels { gts, dets });
    }
    let classes: Vec<String> = ["Car", "Pedestrian"].map(String::from).to_vec();
    let report = eval3d::evaluate_frames(&frames, &classes, &EvalConfig::default())?;
    print!("{}", report.to_text());
    Ok(())
}

fn main() -> plsparse::Result<()> {
    run_example()
}
