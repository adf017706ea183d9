// Frustum extraction: points projecting into 2D detection boxes become
// foreground.

use plsparse::fixtures::{render, scene_suite};
use plsparse::frustum::{self, FrustumConfig};
use plsparse::projection::{self, RangeCropConfig};

pub fn run_example() -> plsparse::Result<()> {
    let spec = &scene_suite()[1];
    let scene = render(spec)?;
    let calib = spec.calib();
    let cloud = projection::backproject(&scene.depth, &calib, &RangeCropConfig::default())?;

    let cfg = FrustumConfig::default();
    let (tagged, counts) = frustum::extract(&cloud, &scene.regions, &calib, (spec.width, spec.height), &cfg)?;
    println!("{} points, {} in frusta", tagged.len(), counts.separation.foreground);
    for (region, n) in scene.regions.iter().zip(&counts.per_region) {
        println!("{:<10} {:>6}", region.class_name, n.unwrap_or(0));
    }
    Ok(())
}

fn main() -> plsparse::Result<()> {
    run_example()
}
