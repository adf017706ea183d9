// Back-projects a depth map into a camera-frame cloud, then into the range
// sensor frame.

use nalgebra::Matrix3x4;
use plsparse::kitti_io::CameraCalib;
use plsparse::projection::{self, DepthMap, RangeCropConfig};

pub fn run_example() -> plsparse::Result<()> {
    let (w, h) = (1242, 375);
    let mut depth = DepthMap::uniform(w, h, 25.0);
    // Knock out the top rows, as a stereo or monocular estimate would, and
    // push the right half of the frame past the crop range.
    depth.valid[..w * 60].iter_mut().for_each(|v| *v = false);
    for v in 0..h {
        depth.depth[v * w + w / 2..(v + 1) * w].iter_mut().for_each(|d| *d = 85.0);
    }

    let mut calib = CameraCalib::from_intrinsics(721.5377, 721.5377, 609.5593, 172.854);
    calib.sensor_to_camera = Matrix3x4::new(0.0, -1.0, 0.0, 0.0, 0.0, 0.0, -1.0, -0.08, 1.0, 0.0, 0.0, -0.27);

    let all = projection::backproject(&depth, &calib, &RangeCropConfig::none())?;
    let cropped = projection::backproject(&depth, &calib, &RangeCropConfig::default())?;
    println!("valid pixels {}, points {}, after crop {}", depth.valid_count(), all.len(), cropped.len());

    let lidar = projection::camera_to_sensor(&cropped, &calib)?;
    let p = lidar.points[0];
    println!("first point in sensor frame: ({:.2}, {:.2}, {:.2})", p[0], p[1], p[2]);
    Ok(())
}

fn main() -> plsparse::Result<()> {
    run_example()
}
