// Points of interest on a rendered street scene: LoG extrema of the
// difference image, lifted to 3D and thinned by radius.

use plsparse::fixtures::{render, scene_suite};
use plsparse::keypoints::{self, PoisConfig};

pub fn run_example() -> plsparse::Result<()> {
    let spec = &scene_suite()[0];
    let scene = render(spec)?;
    let cfg = PoisConfig::default();
    let out = keypoints::select_points_of_interest(&scene.image, &scene.depth, &spec.calib(), &cfg)?;
    println!(
        "{}: detected {}, on valid depth {}, kept {}",
        spec.name, out.detected, out.lifted, out.kept.len()
    );
    for k in out.kept.iter().take(5) {
        let p = k.point3d.unwrap_or_default();
        println!(
            "({:4}, {:3}) sigma {:.2} response {:.1} -> ({:.2}, {:.2}, {:.2})",
            k.u, k.v, k.sigma, k.response, p[0], p[1], p[2]
        );
    }
    Ok(())
}

fn main() -> plsparse::Result<()> {
    run_example()
}
