//! Deterministic synthetic scenes: a flat ground plane and axis-aligned
//! boxes ray-cast into a depth map and a shaded intensity image, with exact
//! per-pixel object membership, tight 2D regions and ground-truth 3D boxes.
//!
//! Scene specs serialise to TOML so a failing case can be committed and
//! replayed.

use std::f64::consts::FRAC_PI_2;
use std::path::Path;

use nalgebra::{Matrix3, Matrix3x4};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frustum::Region2D;
use crate::keypoints::Image;
use crate::kitti_io::{self, CameraCalib, LabelRecord};
use crate::projection::{project_point, DepthMap};

/// Object id of ground pixels in [`RenderedScene::object_id`].
pub const GROUND_ID: i32 = 0;
/// Object id of pixels without depth.
pub const EMPTY_ID: i32 = -1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneObject {
    pub class: String,
    /// Footprint center, camera frame.
    pub x: f64,
    pub z: f64,
    /// Extent along camera x, height, extent along camera z.
    pub size: [f64; 3],
    /// Camera y of the bottom face; defaults to resting on the ground.
    #[serde(default)]
    pub bottom: Option<f64>,
}

impl SceneObject {
    pub fn new(class: &str, x: f64, z: f64, size: [f64; 3]) -> Self {
        SceneObject {
            class: class.into(),
            x,
            z,
            size,
            bottom: None,
        }
    }

    pub fn car(x: f64, z: f64) -> Self {
        SceneObject::new("Car", x, z, [1.6, 1.5, 3.9])
    }

    pub fn pedestrian(x: f64, z: f64) -> Self {
        SceneObject::new("Pedestrian", x, z, [0.6, 1.75, 0.8])
    }

    pub fn cyclist(x: f64, z: f64) -> Self {
        SceneObject::new("Cyclist", x, z, [0.6, 1.7, 1.8])
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneSpec {
    pub name: String,
    pub width: usize,
    pub height: usize,
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    /// Camera height above a flat ground plane (camera y of the ground).
    pub camera_height: f64,
    pub ground: bool,
    /// Hits farther than this leave the pixel invalid.
    pub max_depth: f64,
    /// Std-dev of additive depth noise, meters.
    pub noise_sigma: f64,
    pub seed: u64,
    pub objects: Vec<SceneObject>,
}

impl Default for SceneSpec {
    fn default() -> Self {
        SceneSpec {
            name: "scene".into(),
            width: 1242,
            height: 375,
            fx: 721.5377,
            fy: 721.5377,
            cx: 609.5593,
            cy: 172.854,
            camera_height: 1.65,
            ground: true,
            max_depth: 80.0,
            noise_sigma: 0.0,
            seed: 0,
            objects: Vec::new(),
        }
    }
}

/// Classes that get a tight 2D region and a ground-truth box.
pub const DETECTION_CLASSES: [&str; 3] = ["Car", "Pedestrian", "Cyclist"];

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::config("scene has zero image size"));
        }
        if !(self.fx > 0.0 && self.fy > 0.0) {
            return Err(Error::config("scene focal lengths must be positive"));
        }
        if !(self.max_depth > 0.0) || !(self.noise_sigma >= 0.0) {
            return Err(Error::config("max_depth must be positive and noise non-negative"));
        }
        let calib = self.calib();
        for (i, o) in self.objects.iter().enumerate() {
            if !o.size.iter().all(|&s| s > 0.0) {
                return Err(Error::config(format!("object {i} has non-positive size")));
            }
            if !(o.z - o.size[2] / 2.0 > 0.0) {
                return Err(Error::config(format!("object {i} is not in front of the camera")));
            }
            let bottom = o.bottom.unwrap_or(self.camera_height);
            let center = [o.x, bottom - o.size[1] / 2.0, o.z];
            let (u, v) = project_point(&center, &calib).unwrap();
            if !(u >= 0.0 && v >= 0.0 && u < self.width as f64 && v < self.height as f64) {
                return Err(Error::config(format!("object {i} is outside the image")));
            }
        }
        Ok(())
    }

    /// Pinhole intrinsics with a conventional range-sensor mounting:
    /// sensor x forward, y left, z up, 0.27 m behind and 0.08 m above the
    /// camera.
    pub fn calib(&self) -> CameraCalib {
        let mut calib = CameraCalib::from_intrinsics(self.fx, self.fy, self.cx, self.cy);
        calib.rect_rotation = Matrix3::identity();
        #[rustfmt::skip]
        let mount = Matrix3x4::new(
            0.0, -1.0, 0.0, 0.0,
            0.0, 0.0, -1.0, -0.08,
            1.0, 0.0, 0.0, -0.27,
        );
        calib.sensor_to_camera = mount;
        calib
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scene specs always serialise")
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let spec: SceneSpec = toml::from_str(text).map_err(|e| Error::config(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::from(e).at(path))?;
        Self::from_toml(&text).map_err(|e| e.at(path))
    }
}

#[derive(Clone, Debug)]
pub struct RenderedScene {
    pub depth: DepthMap,
    /// Grey levels in [0, 255]: flat sky and ground, checker-textured
    /// objects.
    pub image: Image,
    /// Tight 2D boxes of each visible detection-class object.
    pub regions: Vec<Region2D>,
    /// Object index (into `SceneSpec::objects`) of each region.
    pub region_objects: Vec<usize>,
    pub gt: Vec<LabelRecord>,
    /// Per pixel: [`EMPTY_ID`], [`GROUND_ID`], or object index + 1.
    pub object_id: Vec<i32>,
}

impl RenderedScene {
    pub fn pixel_count(&self, id: i32) -> usize {
        self.object_id.iter().filter(|&&o| o == id).count()
    }

    /// Writes `depth/<frame>.png`, `calib/<frame>.txt`, `image/<frame>.png`
    /// and `label/<frame>.txt` under `root`.
    pub fn write_kitti(&self, spec: &SceneSpec, root: impl AsRef<Path>, frame: &str) -> Result<()> {
        let root = root.as_ref();
        for sub in ["depth", "calib", "image", "label"] {
            let d = root.join(sub);
            std::fs::create_dir_all(&d).map_err(|e| Error::from(e).at(&d))?;
        }
        kitti_io::write_depth_png(&self.depth, root.join(format!("depth/{frame}.png")), 256.0)?;
        kitti_io::write_calib(&spec.calib(), root.join(format!("calib/{frame}.txt")))?;
        kitti_io::write_labels(&self.gt, root.join(format!("label/{frame}.txt")))?;
        let grey: Vec<u8> = self.image.data.iter().map(|&g| g.round().clamp(0.0, 255.0) as u8).collect();
        let path = root.join(format!("image/{frame}.png"));
        image::GrayImage::from_raw(self.image.width as u32, self.image.height as u32, grey)
            .expect("image buffer matches its size")
            .save(&path)
            .map_err(|e| Error::from(e).at(&path))
    }
}

const SKY: f64 = 220.0;
const GROUND: f64 = 80.0;
const CHECKER_M: f64 = 0.4;

fn class_shade(class: &str) -> f64 {
    match class {
        "Car" => 120.0,
        "Pedestrian" => 70.0,
        "Cyclist" => 150.0,
        "Building" => 170.0,
        "Tree" => 60.0,
        _ => 100.0,
    }
}

/// Grey level of a surface point: a checker of `CHECKER_M` cells on objects,
/// flat sky and ground.
fn shade(p: &[f64; 3], id: i32, spec: &SceneSpec) -> f64 {
    match id {
        EMPTY_ID => SKY,
        GROUND_ID => GROUND,
        _ => {
            let o = &spec.objects[(id - 1) as usize];
            let cell: i64 = p.iter().map(|c| (c / CHECKER_M).floor() as i64).sum();
            class_shade(&o.class) + if cell.rem_euclid(2) == 0 { 40.0 } else { -40.0 }
        }
    }
}

struct Aabb {
    lo: [f64; 3],
    hi: [f64; 3],
}

impl Aabb {
    fn of(o: &SceneObject, ground_y: f64) -> Self {
        let bottom = o.bottom.unwrap_or(ground_y);
        Aabb {
            lo: [o.x - o.size[0] / 2.0, bottom - o.size[1], o.z - o.size[2] / 2.0],
            hi: [o.x + o.size[0] / 2.0, bottom, o.z + o.size[2] / 2.0],
        }
    }

    /// Entry distance along `dir` from the origin, if the ray hits.
    fn hit(&self, dir: &[f64; 3]) -> Option<f64> {
        let (mut t0, mut t1) = (0.0f64, f64::INFINITY);
        for ((&d, &lo), &hi) in dir.iter().zip(&self.lo).zip(&self.hi) {
            if d == 0.0 {
                if 0.0 < lo || 0.0 > hi {
                    return None;
                }
                continue;
            }
            let (mut n, mut f) = (lo / d, hi / d);
            if n > f {
                std::mem::swap(&mut n, &mut f);
            }
            t0 = t0.max(n);
            t1 = t1.min(f);
        }
        (t0 <= t1 && t0 > 0.0).then_some(t0)
    }
}

/// Ray-casts the scene. Depth is the camera z of the nearest hit.
pub fn render(spec: &SceneSpec) -> Result<RenderedScene> {
    spec.validate()?;
    let (w, h) = (spec.width, spec.height);
    let boxes: Vec<Aabb> = spec.objects.iter().map(|o| Aabb::of(o, spec.camera_height)).collect();
    let mut depth = DepthMap {
        width: w,
        height: h,
        depth: vec![0.0; w * h],
        valid: vec![false; w * h],
    };
    let mut object_id = vec![EMPTY_ID; w * h];
    let mut grey = vec![SKY; w * h];
    let mut unoccluded = vec![0usize; boxes.len()];
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let noise = Normal::new(0.0, spec.noise_sigma).map_err(|e| Error::config(e.to_string()))?;

    for v in 0..h {
        for u in 0..w {
            // Unit z component, so the ray parameter equals camera depth.
            let dir = [(u as f64 - spec.cx) / spec.fx, (v as f64 - spec.cy) / spec.fy, 1.0];
            let mut best = (f64::INFINITY, EMPTY_ID);
            if spec.ground && dir[1] > 0.0 {
                best = (spec.camera_height / dir[1], GROUND_ID);
            }
            for (k, b) in boxes.iter().enumerate() {
                if let Some(t) = b.hit(&dir) {
                    if t <= spec.max_depth {
                        unoccluded[k] += 1;
                    }
                    if t < best.0 {
                        best = (t, k as i32 + 1);
                    }
                }
            }
            let i = v * w + u;
            if best.1 != EMPTY_ID {
                let p = dir.map(|d| d * best.0);
                grey[i] = shade(&p, best.1, spec);
            }
            if best.1 != EMPTY_ID && best.0 <= spec.max_depth {
                let mut z = best.0;
                if spec.noise_sigma > 0.0 {
                    z = (z + noise.sample(&mut rng)).max(1e-3);
                }
                depth.depth[i] = z;
                depth.valid[i] = true;
                object_id[i] = best.1;
            }
        }
    }

    let calib = spec.calib();
    let mut regions = Vec::new();
    let mut region_objects = Vec::new();
    let mut gt = Vec::new();
    for (k, o) in spec.objects.iter().enumerate() {
        if !DETECTION_CLASSES.contains(&o.class.as_str()) {
            continue;
        }
        let id = k as i32 + 1;
        let mut bounds: Option<[usize; 4]> = None;
        let mut visible = 0usize;
        for (i, _) in object_id.iter().enumerate().filter(|(_, &o)| o == id) {
            let (u, v) = (i % w, i / w);
            visible += 1;
            bounds = Some(match bounds {
                None => [u, v, u, v],
                Some(b) => [b[0].min(u), b[1].min(v), b[2].max(u), b[3].max(v)],
            });
        }
        let Some(b) = bounds else { continue };
        let bbox = [b[0] as f64, b[1] as f64, b[2] as f64, b[3] as f64];
        if b[2] > b[0] && b[3] > b[1] {
            regions.push(Region2D::from_box(bbox, o.class.clone(), 1.0));
            region_objects.push(k);
        }
        gt.push(ground_truth_label(o, spec, &calib, visible, unoccluded[k]));
    }

    Ok(RenderedScene {
        depth,
        image: Image::new(w, h, grey)?,
        regions,
        region_objects,
        gt,
        object_id,
    })
}

fn ground_truth_label(o: &SceneObject, spec: &SceneSpec, calib: &CameraCalib, visible: usize, own: usize) -> LabelRecord {
    let bottom = o.bottom.unwrap_or(spec.camera_height);
    // The longer horizontal side is the box length.
    let (w, l, yaw) = if o.size[0] >= o.size[2] {
        (o.size[2], o.size[0], 0.0)
    } else {
        (o.size[0], o.size[2], -FRAC_PI_2)
    };
    let aabb = Aabb::of(o, spec.camera_height);
    let (mut u0, mut v0, mut u1, mut v1) = (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
    for cx in [aabb.lo[0], aabb.hi[0]] {
        for cy in [aabb.lo[1], aabb.hi[1]] {
            for cz in [aabb.lo[2], aabb.hi[2]] {
                let (u, v) = project_point(&[cx, cy, cz], calib).unwrap();
                u0 = u0.min(u);
                v0 = v0.min(v);
                u1 = u1.max(u);
                v1 = v1.max(v);
            }
        }
    }
    let full = (u1 - u0) * (v1 - v0);
    let clipped = [
        u0.max(0.0),
        v0.max(0.0),
        u1.min(spec.width as f64 - 1.0),
        v1.min(spec.height as f64 - 1.0),
    ];
    let inside = (clipped[2] - clipped[0]).max(0.0) * (clipped[3] - clipped[1]).max(0.0);
    let truncation = if full > 0.0 { (1.0 - inside / full).clamp(0.0, 1.0) } else { 0.0 };
    let visible_share = if own > 0 { visible as f64 / own as f64 } else { 0.0 };
    let occlusion = match visible_share {
        s if s >= 0.8 => 0,
        s if s >= 0.5 => 1,
        s if s >= 0.1 => 2,
        _ => 3,
    };
    LabelRecord {
        class_name: o.class.clone(),
        truncation,
        occlusion,
        alpha: yaw - o.x.atan2(o.z),
        bbox2d: clipped,
        dims: [o.size[1], w, l],
        location: [o.x, bottom, o.z],
        yaw,
        score: None,
    }
}

/// Street-like scenes used by the tests and examples. Every scene is a
/// 1242×375 frame with KITTI-like intrinsics.
pub fn scene_suite() -> Vec<SceneSpec> {
    SUITE
        .iter()
        .map(|text| SceneSpec::from_toml(text).expect("committed scene parses"))
        .collect()
}

const SUITE: &[&str] = &[
    include_str!("../fixtures/scenes/s00_parked_row.toml"),
    include_str!("../fixtures/scenes/s01_intersection.toml"),
    include_str!("../fixtures/scenes/s02_three_ranges.toml"),
    include_str!("../fixtures/scenes/s03_crowd.toml"),
    include_str!("../fixtures/scenes/s04_oncoming.toml"),
    include_str!("../fixtures/scenes/s05_cyclists.toml"),
    include_str!("../fixtures/scenes/s06_alley.toml"),
    include_str!("../fixtures/scenes/s07_queue.toml"),
    include_str!("../fixtures/scenes/s08_mixed.toml"),
    include_str!("../fixtures/scenes/s09_noisy.toml"),
    include_str!("../fixtures/scenes/s10_boulevard.toml"),
];
