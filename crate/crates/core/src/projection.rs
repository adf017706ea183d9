//! Pinhole back-projection of depth maps into PseudoLiDAR and the reverse
//! mapping from points to pixels, plus sensor/camera frame changes.

use nalgebra::{Matrix4, Vector4};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cloud::{Frame, PointCloud};
use crate::error::{Error, Result};
use crate::kitti_io::CameraCalib;

/// Dense metric depth with a validity mask, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct DepthMap {
    pub width: usize,
    pub height: usize,
    pub depth: Vec<f64>,
    pub valid: Vec<bool>,
}

impl DepthMap {
    /// A map where every pixel is valid at the same depth.
    pub fn uniform(width: usize, height: usize, depth: f64) -> Self {
        DepthMap {
            width,
            height,
            depth: vec![depth; width * height],
            valid: vec![true; width * height],
        }
    }

    pub fn get(&self, u: usize, v: usize) -> Option<f64> {
        let i = v * self.width + u;
        (u < self.width && v < self.height && self.valid[i]).then(|| self.depth[i])
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|&&v| v).count()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.width * self.height;
        if self.depth.len() != n || self.valid.len() != n {
            return Err(Error::usage(format!(
                "depth grid of {}x{} has {} depths and {} mask entries",
                self.width,
                self.height,
                self.depth.len(),
                self.valid.len()
            )));
        }
        if let Some(i) = (0..n).find(|&i| self.valid[i] && !(self.depth[i] > 0.0)) {
            return Err(Error::Data {
                index: i,
                msg: format!("valid pixel with non-positive depth {}", self.depth[i]),
            });
        }
        Ok(())
    }
}

/// Limits applied to back-projected points. `None` disables a limit.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RangeCropConfig {
    pub max_z: Option<f64>,
    pub max_abs_x: Option<f64>,
    /// Inclusive `[min, max]` on the camera y axis.
    pub y_range: Option<(f64, f64)>,
}

impl Default for RangeCropConfig {
    fn default() -> Self {
        RangeCropConfig {
            max_z: Some(70.0),
            max_abs_x: Some(40.0),
            y_range: None,
        }
    }
}

impl RangeCropConfig {
    pub fn none() -> Self {
        RangeCropConfig {
            max_z: None,
            max_abs_x: None,
            y_range: None,
        }
    }

    pub fn keeps(&self, p: &[f64; 3]) -> bool {
        p[2] > 0.0
            && self.max_z.is_none_or(|m| p[2] <= m)
            && self.max_abs_x.is_none_or(|m| p[0].abs() <= m)
            && self.y_range.is_none_or(|(lo, hi)| p[1] >= lo && p[1] <= hi)
    }
}

fn check_focal(calib: &CameraCalib) -> Result<()> {
    if !(calib.fx() > 0.0 && calib.fy() > 0.0) {
        return Err(Error::config(format!(
            "focal lengths must be positive (fx={}, fy={})",
            calib.fx(),
            calib.fy()
        )));
    }
    Ok(())
}

/// Ray through pixel `(u, v)` scaled to depth `z`.
#[inline]
pub fn backproject_pixel(u: f64, v: f64, z: f64, calib: &CameraCalib) -> [f64; 3] {
    [
        (u - calib.cx()) * z / calib.fx(),
        (v - calib.cy()) * z / calib.fy(),
        z,
    ]
}

/// Back-projects every valid pixel that survives `crop`. Output is in the
/// rectified camera frame, in row-major pixel order.
pub fn backproject(depth: &DepthMap, calib: &CameraCalib, crop: &RangeCropConfig) -> Result<PointCloud> {
    Ok(backproject_with_pixels(depth, calib, crop)?.0)
}

/// Like [`backproject`], also returning the flat pixel index of each point.
pub fn backproject_with_pixels(
    depth: &DepthMap,
    calib: &CameraCalib,
    crop: &RangeCropConfig,
) -> Result<(PointCloud, Vec<usize>)> {
    check_focal(calib)?;
    depth.validate()?;
    let w = depth.width;
    let rows: Vec<Vec<([f64; 3], usize)>> = (0..depth.height)
        .into_par_iter()
        .map(|v| {
            let mut row = Vec::new();
            for u in 0..w {
                let i = v * w + u;
                if !depth.valid[i] {
                    continue;
                }
                let p = backproject_pixel(u as f64, v as f64, depth.depth[i], calib);
                if crop.keeps(&p) {
                    row.push((p, i));
                }
            }
            row
        })
        .collect();
    let n: usize = rows.iter().map(Vec::len).sum();
    let mut points = Vec::with_capacity(n);
    let mut pixels = Vec::with_capacity(n);
    for (p, i) in rows.into_iter().flatten() {
        points.push(p);
        pixels.push(i);
    }
    Ok((PointCloud::new(points, Frame::CameraRect), pixels))
}

/// A point's image coordinates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PixelHit {
    /// Index of the point in the source cloud.
    pub index: usize,
    pub u: f64,
    pub v: f64,
    pub z: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Projection {
    pub hits: Vec<PixelHit>,
    /// Points with `z <= 0`, which have no image location.
    pub behind_camera: usize,
}

pub fn project_point(p: &[f64; 3], calib: &CameraCalib) -> Option<(f64, f64)> {
    (p[2] > 0.0).then(|| {
        (
            calib.fx() * p[0] / p[2] + calib.cx(),
            calib.fy() * p[1] / p[2] + calib.cy(),
        )
    })
}

pub fn project_to_pixels(cloud: &PointCloud, calib: &CameraCalib) -> Result<Projection> {
    if cloud.frame != Frame::CameraRect {
        return Err(Error::usage("projection needs a camera_rect cloud"));
    }
    check_focal(calib)?;
    let mut out = Projection::default();
    for (index, p) in cloud.points.iter().enumerate() {
        match project_point(p, calib) {
            Some((u, v)) => out.hits.push(PixelHit { index, u, v, z: p[2] }),
            None => out.behind_camera += 1,
        }
    }
    Ok(out)
}

fn transform_cloud(cloud: &PointCloud, m: &Matrix4<f64>, frame: Frame) -> PointCloud {
    let points = cloud
        .points
        .iter()
        .map(|p| {
            let q = m * Vector4::new(p[0], p[1], p[2], 1.0);
            [q[0], q[1], q[2]]
        })
        .collect();
    PointCloud {
        points,
        frame,
        intensity: cloud.intensity.clone(),
        tags: cloud.tags.clone(),
    }
}

pub fn camera_to_sensor(cloud: &PointCloud, calib: &CameraCalib) -> Result<PointCloud> {
    if cloud.frame != Frame::CameraRect {
        return Err(Error::usage("camera_to_sensor needs a camera_rect cloud"));
    }
    let inv = calib
        .sensor_to_rect()
        .try_inverse()
        .ok_or_else(|| Error::config("sensor-to-camera transform is singular"))?;
    Ok(transform_cloud(cloud, &inv, Frame::Sensor))
}

pub fn sensor_to_camera_frame(cloud: &PointCloud, calib: &CameraCalib) -> Result<PointCloud> {
    if cloud.frame != Frame::Sensor {
        return Err(Error::usage("sensor_to_camera_frame needs a sensor cloud"));
    }
    Ok(transform_cloud(cloud, &calib.sensor_to_rect(), Frame::CameraRect))
}
