// Unsupervised sparsification of a small batch: keypoints, foreground
// separation and stratified sampling, written to disk.

use plsparse::fixtures::{render, scene_suite};
use plsparse::pipeline::{self, PipelineConfig, Scheme};

pub fn run_example() -> plsparse::Result<()> {
    let dir = tempfile::tempdir()?;
    let root = dir.path();
    for (i, spec) in scene_suite().iter().enumerate().take(3) {
        render(spec)?.write_kitti(spec, root, &format!("{i:06}"))?;
    }
    let mut cfg = PipelineConfig { seed: 42, workers: 2, ..Default::default() };
    cfg.io.depth_dir = root.join("depth");
    cfg.io.calib_dir = root.join("calib");
    cfg.io.image_dir = Some(root.join("image"));
    cfg.io.output_dir = root.join("out");

    let report = pipeline::run_batch(Scheme::Unsupervised, &cfg)?;
    print!("{}", report.to_text());
    Ok(())
}

fn main() -> plsparse::Result<()> {
    run_example()
}
