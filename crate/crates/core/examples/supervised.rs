// Supervised sparsification with 2D boxes read from label files.

use plsparse::fixtures::{render, scene_suite};
use plsparse::pipeline::{self, PipelineConfig, Scheme};

pub fn run_example() -> plsparse::Result<()> {
    let dir = tempfile::tempdir()?;
    let root = dir.path();
    for (i, spec) in scene_suite().iter().enumerate().skip(3).take(3) {
        render(spec)?.write_kitti(spec, root, &format!("{i:06}"))?;
    }
    let mut cfg = PipelineConfig { seed: 42, ..Default::default() };
    cfg.io.depth_dir = root.join("depth");
    cfg.io.calib_dir = root.join("calib");
    cfg.io.regions_dir = Some(root.join("label"));
    cfg.io.output_dir = root.join("out");
    cfg.frustum.dilate_px = 2;

    let report = pipeline::run_batch(Scheme::Supervised, &cfg)?;
    print!("{}", report.to_text());
    Ok(())
}

fn main() -> plsparse::Result<()> {
    run_example()
}
