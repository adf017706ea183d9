//! Supervised foreground separation from external 2D detections: a point is
//! foreground when its image projection falls inside any detected region.
//!
//! Points are attributed to the pixel nearest their projection; boxes and
//! masks are both tested on that integer pixel, so a mask rasterised from a
//! box selects exactly the same points as the box.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cloud::{PointCloud, Tag};
use crate::error::{Error, Result};
use crate::foreground::{self, SeparationConfig, SeparationCounts};
use crate::kitti_io::{CameraCalib, LabelRecord};
use crate::projection::{self, DepthMap, RangeCropConfig};
use crate::sampler::{self, StratifyConfig};

/// Boolean image-sized mask, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Mask {
    pub width: usize,
    pub height: usize,
    pub data: Vec<bool>,
}

impl Mask {
    pub fn get(&self, u: usize, v: usize) -> bool {
        self.data[v * self.width + u]
    }

    /// Pixels whose centers lie in the closed box `[l, r] × [t, b]`.
    pub fn rasterize_box(width: usize, height: usize, bbox: [f64; 4]) -> Mask {
        let mut data = vec![false; width * height];
        for v in 0..height {
            for u in 0..width {
                let (x, y) = (u as f64, v as f64);
                data[v * width + u] = x >= bbox[0] && x <= bbox[2] && y >= bbox[1] && y <= bbox[3];
            }
        }
        Mask {
            width,
            height,
            data,
        }
    }

    /// Square (Chebyshev) dilation by `r` pixels.
    pub fn dilate(&self, r: usize) -> Mask {
        if r == 0 {
            return self.clone();
        }
        let (w, h) = (self.width, self.height);
        // Separable: rows then columns.
        let mut rows = vec![false; w * h];
        for v in 0..h {
            for u in 0..w {
                if self.data[v * w + u] {
                    let lo = u.saturating_sub(r);
                    let hi = (u + r).min(w - 1);
                    rows[v * w + lo..=v * w + hi].iter_mut().for_each(|x| *x = true);
                }
            }
        }
        let mut data = vec![false; w * h];
        for v in 0..h {
            for u in 0..w {
                if rows[v * w + u] {
                    for vv in v.saturating_sub(r)..=(v + r).min(h - 1) {
                        data[vv * w + u] = true;
                    }
                }
            }
        }
        Mask {
            width: w,
            height: h,
            data,
        }
    }

    pub fn read_png(path: impl AsRef<Path>) -> Result<Mask> {
        let path = path.as_ref();
        let img = image::ImageReader::open(path)
            .map_err(|e| Error::from(e).at(path))?
            .with_guessed_format()
            .map_err(|e| Error::from(e).at(path))?
            .decode()
            .map_err(|e| Error::from(e).at(path))?;
        let data: Vec<bool> = match &img {
            image::DynamicImage::ImageLuma8(b) => b.as_raw().iter().map(|&v| v != 0).collect(),
            image::DynamicImage::ImageLuma16(b) => b.as_raw().iter().map(|&v| v != 0).collect(),
            other => {
                return Err(Error::Format {
                    offset: 0,
                    msg: format!("mask must be single-channel, found {:?}", other.color()),
                }
                .at(path))
            }
        };
        Ok(Mask {
            width: img.width() as usize,
            height: img.height() as usize,
            data,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum RegionShape {
    /// `(left, top, right, bottom)` in pixels.
    Box([f64; 4]),
    Mask(Mask),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Region2D {
    pub shape: RegionShape,
    pub class_name: String,
    pub score: f64,
}

impl Region2D {
    pub fn from_box(bbox: [f64; 4], class_name: impl Into<String>, score: f64) -> Self {
        Region2D {
            shape: RegionShape::Box(bbox),
            class_name: class_name.into(),
            score,
        }
    }

    /// Regions from label/detection records; `DontCare` entries are skipped
    /// and a missing score counts as 1.
    pub fn from_labels(records: &[LabelRecord]) -> Vec<Region2D> {
        records
            .iter()
            .filter(|r| !r.is_dont_care())
            .map(|r| Region2D::from_box(r.bbox2d, r.class_name.clone(), r.score.unwrap_or(1.0)))
            .collect()
    }

    fn validate(&self, index: usize, width: usize, height: usize) -> Result<()> {
        if !(0.0..=1.0).contains(&self.score) {
            return Err(Error::Data {
                index,
                msg: format!("region score {} outside [0, 1]", self.score),
            });
        }
        match &self.shape {
            RegionShape::Box(b) if !(b[2] > b[0] && b[3] > b[1]) => Err(Error::Data {
                index,
                msg: format!("degenerate region box {b:?}"),
            }),
            RegionShape::Mask(m) if m.width != width || m.height != height => Err(Error::Data {
                index,
                msg: format!(
                    "{}x{} mask for a {width}x{height} image",
                    m.width, m.height
                ),
            }),
            _ => Ok(()),
        }
    }
}

/// Region after score filtering and dilation, ready for pixel tests.
enum Prepared {
    Box { u0: f64, v0: f64, u1: f64, v1: f64 },
    Mask(Mask),
}

impl Prepared {
    fn contains(&self, u: usize, v: usize) -> bool {
        match self {
            Prepared::Box { u0, v0, u1, v1 } => {
                let (x, y) = (u as f64, v as f64);
                x >= *u0 && x <= *u1 && y >= *v0 && y <= *v1
            }
            Prepared::Mask(m) => m.get(u, v),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FrustumConfig {
    pub score_floor: f64,
    pub dilate_px: usize,
}

impl Default for FrustumConfig {
    fn default() -> Self {
        FrustumConfig {
            score_floor: 0.0,
            dilate_px: 4,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct FrustumCounts {
    pub separation: SeparationCounts,
    /// Points inside each region; `None` for regions below the score floor.
    pub per_region: Vec<Option<usize>>,
    pub behind_camera: usize,
}

/// Tags points foreground when they project into a region scoring at least
/// `cfg.score_floor`, after growing boxes by `cfg.dilate_px` on every side.
pub fn extract(
    cloud: &PointCloud,
    regions: &[Region2D],
    calib: &CameraCalib,
    image_size: (usize, usize),
    cfg: &FrustumConfig,
) -> Result<(PointCloud, FrustumCounts)> {
    let (width, height) = image_size;
    for (i, r) in regions.iter().enumerate() {
        r.validate(i, width, height)?;
    }
    let d = cfg.dilate_px as f64;
    let prepared: Vec<Option<Prepared>> = regions
        .iter()
        .map(|r| {
            (r.score >= cfg.score_floor).then(|| match &r.shape {
                RegionShape::Box(b) => Prepared::Box {
                    u0: (b[0] - d).max(0.0),
                    v0: (b[1] - d).max(0.0),
                    u1: (b[2] + d).min(width as f64 - 1.0),
                    v1: (b[3] + d).min(height as f64 - 1.0),
                },
                RegionShape::Mask(m) => Prepared::Mask(m.dilate(cfg.dilate_px)),
            })
        })
        .collect();

    let projection = projection::project_to_pixels(cloud, calib)?;
    let mut mask = vec![false; cloud.len()];
    let mut per_region: Vec<Option<usize>> = prepared.iter().map(|p| p.as_ref().map(|_| 0)).collect();
    for hit in &projection.hits {
        let (u, v) = (hit.u.round(), hit.v.round());
        if !(u >= 0.0 && v >= 0.0 && u < width as f64 && v < height as f64) {
            continue;
        }
        let (u, v) = (u as usize, v as usize);
        for (region, count) in prepared.iter().zip(per_region.iter_mut()) {
            if let (Some(region), Some(count)) = (region, count.as_mut()) {
                if region.contains(u, v) {
                    *count += 1;
                    mask[hit.index] = true;
                }
            }
        }
    }
    let (tagged, separation) = foreground::tag_by_mask(cloud, &mask);
    Ok((
        tagged,
        FrustumCounts {
            separation,
            per_region,
            behind_camera: projection.behind_camera,
        },
    ))
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct SupervisedCounts {
    pub raw: usize,
    pub foreground: usize,
    pub blended: usize,
    pub sampled: usize,
}

/// Back-projection, frustum extraction, background blending and
/// distance-stratified sampling in one call.
#[allow(clippy::too_many_arguments)]
pub fn pipeline_supervised(
    depth: &DepthMap,
    calib: &CameraCalib,
    regions: &[Region2D],
    crop: &RangeCropConfig,
    frustum_cfg: &FrustumConfig,
    separation_cfg: &SeparationConfig,
    dss_cfg: &StratifyConfig,
) -> Result<(PointCloud, SupervisedCounts)> {
    let mut raw = projection::backproject(depth, calib, crop)?;
    raw.quantize_f32();
    let (tagged, counts) = extract(&raw, regions, calib, (depth.width, depth.height), frustum_cfg)?;
    let blended = foreground::blend_background(&tagged, separation_cfg)?;
    let sampled = sampler::sample(&blended, dss_cfg)?;
    let counts = SupervisedCounts {
        raw: raw.len(),
        foreground: counts.separation.foreground,
        blended: blended.len(),
        sampled: sampled.len(),
    };
    Ok((sampled, counts))
}

/// Foreground indices of a tagged cloud; handy for comparing extractions.
pub fn foreground_indices(cloud: &PointCloud) -> Vec<usize> {
    cloud.indices_with_tag(Tag::Foreground)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cloud::Frame;

    fn calib() -> CameraCalib {
        CameraCalib::from_intrinsics(100.0, 100.0, 50.0, 40.0)
    }

    fn cloud_at_pixels(pixels: &[(f64, f64)], z: f64) -> PointCloud {
        let c = calib();
        PointCloud::new(
            pixels
                .iter()
                .map(|&(u, v)| projection::backproject_pixel(u, v, z, &c))
                .collect(),
            Frame::CameraRect,
        )
    }

    #[test]
    fn full_image_region_takes_everything() {
        let cloud = cloud_at_pixels(&[(0.0, 0.0), (99.0, 79.0), (50.0, 40.0)], 7.0);
        let r = Region2D::from_box([0.0, 0.0, 99.0, 79.0], "Car", 1.0);
        let (_, counts) = extract(&cloud, &[r], &calib(), (100, 80), &FrustumConfig::default()).unwrap();
        assert_eq!(counts.separation.foreground, 3);
    }

    #[test]
    fn no_regions_all_background() {
        let cloud = cloud_at_pixels(&[(1.0, 1.0), (2.0, 2.0)], 7.0);
        let (tagged, counts) = extract(&cloud, &[], &calib(), (100, 80), &FrustumConfig::default()).unwrap();
        assert_eq!(counts.separation.background, 2);
        assert_eq!(tagged.count_tag(Tag::Foreground), 0);
    }

    #[test]
    fn score_floor_filters_regions() {
        let cloud = cloud_at_pixels(&[(10.0, 10.0)], 5.0);
        let r = Region2D::from_box([5.0, 5.0, 15.0, 15.0], "Car", 0.3);
        let cfg = FrustumConfig {
            score_floor: 0.5,
            dilate_px: 0,
        };
        let (_, counts) = extract(&cloud, std::slice::from_ref(&r), &calib(), (100, 80), &cfg).unwrap();
        assert_eq!(counts.separation.foreground, 0);
        assert_eq!(counts.per_region, vec![None]);
        let cfg = FrustumConfig {
            score_floor: 0.0,
            dilate_px: 0,
        };
        let (_, counts) = extract(&cloud, &[r], &calib(), (100, 80), &cfg).unwrap();
        assert_eq!(counts.per_region, vec![Some(1)]);
    }

    #[test]
    fn bad_score_is_data_error() {
        let r = Region2D::from_box([5.0, 5.0, 15.0, 15.0], "Car", 1.2);
        let cloud = cloud_at_pixels(&[(10.0, 10.0)], 5.0);
        assert!(matches!(
            extract(&cloud, &[r], &calib(), (100, 80), &FrustumConfig::default()),
            Err(Error::Data { .. })
        ));
    }

    #[test]
    fn dilation_grows_box() {
        let cloud = cloud_at_pixels(&[(18.0, 10.0)], 5.0);
        let r = Region2D::from_box([5.0, 5.0, 15.0, 15.0], "Car", 1.0);
        let tight = FrustumConfig {
            score_floor: 0.0,
            dilate_px: 0,
        };
        let (_, c) = extract(&cloud, std::slice::from_ref(&r), &calib(), (100, 80), &tight).unwrap();
        assert_eq!(c.separation.foreground, 0);
        let (_, c) = extract(&cloud, &[r], &calib(), (100, 80), &FrustumConfig::default()).unwrap();
        assert_eq!(c.separation.foreground, 1);
    }

    #[test]
    fn mask_dilation_is_square() {
        let mut m = Mask::rasterize_box(9, 9, [4.0, 4.0, 4.0, 4.0]);
        assert_eq!(m.data.iter().filter(|&&b| b).count(), 1);
        m = m.dilate(2);
        assert_eq!(m.data.iter().filter(|&&b| b).count(), 25);
        assert!(m.get(2, 6) && !m.get(1, 4));
    }
}
