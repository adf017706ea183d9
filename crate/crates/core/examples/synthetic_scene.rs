// Renders the fixture suite and writes one scene as KITTI-style files.

use plsparse::fixtures::{render, scene_suite, GROUND_ID};

pub fn run_example() -> plsparse::Result<()> {
    for spec in scene_suite() {
        let scene = render(&spec)?;
        println!(
            "{:<16} valid {:>6}  ground {:>6}  objects {:>2}  boxes {}",
            spec.name,
            scene.depth.valid_count(),
            scene.pixel_count(GROUND_ID),
            spec.objects.len(),
            scene.gt.len()
        );
    }
    let dir = tempfile::tempdir()?;
    let spec = &scene_suite()[2];
    render(spec)?.write_kitti(spec, dir.path(), "000000")?;
    for sub in ["depth", "calib", "image", "label"] {
        let n = std::fs::read_dir(dir.path().join(sub))?.count();
        println!("{sub}/: {n} file");
    }
    Ok(())
}

fn main() -> plsparse::Result<()> {
    run_example()
}
