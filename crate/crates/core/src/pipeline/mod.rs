//! Per-frame and batch orchestration of the two sparsification chains, plus
//! the point-count statistics table.
//!
//! Unsupervised: back-projection → points of interest → foreground
//! separation and background blending → distance-stratified sampling.
//! Supervised: back-projection → frustum extraction from 2D regions →
//! background blending → distance-stratified sampling.

mod config;
mod report;

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;

pub use config::{frame_seed, IoConfig, PipelineConfig};
pub use report::{FrameReport, StageCounts, StageReport, StatsRow};

use crate::cloud::{Frame, PointCloud};
use crate::error::{Error, Result};
use crate::foreground::{self, SeparationConfig};
use crate::frustum::{self, Mask, Region2D, RegionShape};
use crate::keypoints::{self, Image};
use crate::kitti_io::{self, CameraCalib};
use crate::projection::{self, DepthMap};
use crate::sampler::{self, StratifyConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scheme {
    Unsupervised,
    Supervised,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::Unsupervised => "unsupervised",
            Scheme::Supervised => "supervised",
        }
    }
}

/// Everything one frame needs, already decoded.
#[derive(Clone, Debug)]
pub struct FrameInputs {
    pub depth: DepthMap,
    pub calib: CameraCalib,
    pub image: Option<Image>,
    pub regions: Option<Vec<Region2D>>,
}

/// Reads an intensity image: single-channel images are used as-is, colour
/// images are converted to luma.
pub fn read_intensity_image(path: impl AsRef<Path>) -> Result<Image> {
    let path = path.as_ref();
    let img = image::ImageReader::open(path)
        .map_err(|e| Error::from(e).at(path))?
        .with_guessed_format()
        .map_err(|e| Error::from(e).at(path))?
        .decode()
        .map_err(|e| Error::from(e).at(path))?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    match img {
        image::DynamicImage::ImageLuma8(b) => Image::new(w, h, b.into_raw().into_iter().map(f64::from).collect()),
        image::DynamicImage::ImageLuma16(b) => Image::new(w, h, b.into_raw().into_iter().map(f64::from).collect()),
        other => Image::from_rgb8(w, h, other.to_rgb8().as_raw()),
    }
}

impl FrameInputs {
    pub fn load(cfg: &PipelineConfig, frame: &str, scheme: Scheme) -> Result<Self> {
        let io = &cfg.io;
        let depth = kitti_io::read_depth_png(io.depth_dir.join(format!("{frame}.png")), io.depth_divisor)?;
        let calib = kitti_io::read_calib(io.calib_dir.join(format!("{frame}.txt")))?;
        let image = match (&io.image_dir, scheme) {
            (Some(dir), Scheme::Unsupervised) => {
                let p = dir.join(format!("{frame}.png"));
                p.exists().then(|| read_intensity_image(&p)).transpose()?
            }
            _ => None,
        };
        let regions = match scheme {
            Scheme::Unsupervised => None,
            Scheme::Supervised => Some(load_regions(io, frame)?),
        };
        Ok(FrameInputs {
            depth,
            calib,
            image,
            regions,
        })
    }
}

fn load_regions(io: &IoConfig, frame: &str) -> Result<Vec<Region2D>> {
    if let Some(dir) = &io.regions_dir {
        let labels = kitti_io::read_labels(dir.join(format!("{frame}.txt")))?;
        return Ok(Region2D::from_labels(&labels));
    }
    if let Some(dir) = &io.masks_dir {
        let mask = Mask::read_png(dir.join(format!("{frame}.png")))?;
        return Ok(vec![Region2D {
            shape: RegionShape::Mask(mask),
            class_name: "Foreground".into(),
            score: 1.0,
        }]);
    }
    Err(Error::config("no regions_dir or masks_dir configured"))
}

struct Timer(Instant);

impl Timer {
    fn start() -> Self {
        Timer(Instant::now())
    }

    fn lap(&mut self) -> f64 {
        let ms = self.0.elapsed().as_secs_f64() * 1e3;
        self.0 = Instant::now();
        ms
    }
}

fn with_seed(cfg: &PipelineConfig, seed: u64) -> (SeparationConfig, StratifyConfig) {
    (
        SeparationConfig { seed, ..cfg.separation },
        StratifyConfig { seed, ..cfg.sampler },
    )
}

/// Back-projection as every chain and the `project` verb perform it: the
/// cloud is rounded to `f32` so in-memory and on-disk intermediates agree.
pub fn raw_cloud(inputs: &FrameInputs, cfg: &PipelineConfig) -> Result<PointCloud> {
    let mut raw = projection::backproject(&inputs.depth, &inputs.calib, &cfg.crop)?;
    raw.quantize_f32();
    Ok(raw)
}

fn finish(cloud: PointCloud, calib: &CameraCalib, cfg: &PipelineConfig) -> Result<PointCloud> {
    let mut out = if cfg.io.sensor_frame {
        projection::camera_to_sensor(&cloud, calib)?
    } else {
        cloud
    };
    // Written clouds carry no tags; intensity reverts to the default.
    out.tags = None;
    out.intensity = None;
    Ok(out)
}

pub fn run_unsupervised_frame(
    frame: &str,
    inputs: &FrameInputs,
    cfg: &PipelineConfig,
    seed: u64,
) -> Result<(PointCloud, FrameReport)> {
    let (sep_cfg, dss_cfg) = with_seed(cfg, seed);
    let mut report = FrameReport::new(frame);
    let mut t = Timer::start();

    let raw = raw_cloud(inputs, cfg)?;
    report.timing("project", t.lap());

    let intensity = inputs.image.clone().unwrap_or_else(|| Image::from_depth(&inputs.depth));
    let pois = keypoints::select_points_of_interest(&intensity, &inputs.depth, &inputs.calib, &cfg.keypoints)?;
    report.timing("keypoints", t.lap());

    let anchors: Vec<[f64; 3]> = pois.kept.iter().filter_map(|k| k.point3d).collect();
    let (tagged, sep) = foreground::separate(&raw, &anchors, &sep_cfg)?;
    let blended = foreground::blend_background(&tagged, &sep_cfg)?;
    report.timing("separate", t.lap());

    let sampled = sampler::sample(&blended, &dss_cfg)?;
    report.timing("dss", t.lap());

    report.counts = StageCounts {
        raw: raw.len(),
        keypoints_detected: Some(pois.detected),
        keypoints_kept: Some(pois.kept.len()),
        foreground: sep.foreground,
        blended: blended.len(),
        sampled: sampled.len(),
    };
    let out = finish(sampled, &inputs.calib, cfg)?;
    Ok((out, report))
}

pub fn run_supervised_frame(
    frame: &str,
    inputs: &FrameInputs,
    cfg: &PipelineConfig,
    seed: u64,
) -> Result<(PointCloud, FrameReport)> {
    let (sep_cfg, dss_cfg) = with_seed(cfg, seed);
    let regions = inputs
        .regions
        .as_deref()
        .ok_or_else(|| Error::usage("supervised run without regions"))?;
    let mut report = FrameReport::new(frame);
    let mut t = Timer::start();

    let raw = raw_cloud(inputs, cfg)?;
    report.timing("project", t.lap());

    let size = (inputs.depth.width, inputs.depth.height);
    let (tagged, counts) = frustum::extract(&raw, regions, &inputs.calib, size, &cfg.frustum)?;
    let blended = foreground::blend_background(&tagged, &sep_cfg)?;
    report.timing("separate", t.lap());

    let sampled = sampler::sample(&blended, &dss_cfg)?;
    report.timing("dss", t.lap());

    report.counts = StageCounts {
        raw: raw.len(),
        keypoints_detected: None,
        keypoints_kept: None,
        foreground: counts.separation.foreground,
        blended: blended.len(),
        sampled: sampled.len(),
    };
    let out = finish(sampled, &inputs.calib, cfg)?;
    Ok((out, report))
}

pub fn run_frame(scheme: Scheme, frame: &str, inputs: &FrameInputs, cfg: &PipelineConfig) -> Result<(PointCloud, FrameReport)> {
    let seed = frame_seed(cfg.seed, frame);
    match scheme {
        Scheme::Unsupervised => run_unsupervised_frame(frame, inputs, cfg, seed),
        Scheme::Supervised => run_supervised_frame(frame, inputs, cfg, seed),
    }
}

/// Frame ids from the config, or every depth image stem, sorted.
pub fn resolve_frames(cfg: &PipelineConfig) -> Result<Vec<String>> {
    if !cfg.frames.is_empty() {
        return Ok(cfg.frames.clone());
    }
    let dir = &cfg.io.depth_dir;
    let mut ids: Vec<String> = std::fs::read_dir(dir)
        .map_err(|e| Error::from(e).at(dir))?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|x| x == "png"))
        .filter_map(|p| p.file_stem().map(|s| s.to_string_lossy().into_owned()))
        .collect();
    ids.sort();
    Ok(ids)
}

pub fn output_path(cfg: &PipelineConfig, frame: &str) -> PathBuf {
    cfg.io.output_dir.join(format!("{frame}.bin"))
}

fn worker_pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::config(e.to_string()))
}

/// Runs a scheme over every frame, writing `<output_dir>/<frame>.bin` and
/// `<output_dir>/report.json`.
///
/// With more than one frame, a failing frame is logged and recorded in the
/// report; with a single frame its error is returned.
pub fn run_batch(scheme: Scheme, cfg: &PipelineConfig) -> Result<StageReport> {
    cfg.validate()?;
    cfg.check_dirs(scheme == Scheme::Supervised)?;
    let frames = resolve_frames(cfg)?;
    std::fs::create_dir_all(&cfg.io.output_dir).map_err(|e| Error::from(e).at(&cfg.io.output_dir))?;
    let single = frames.len() == 1;

    let process = |frame: &String| -> Result<FrameReport> {
        let inputs = FrameInputs::load(cfg, frame, scheme)?;
        let (cloud, report) = run_frame(scheme, frame, &inputs, cfg)?;
        kitti_io::write_point_bin(&cloud, output_path(cfg, frame))?;
        Ok(report)
    };
    let results: Vec<Result<FrameReport>> =
        worker_pool(cfg.workers)?.install(|| frames.par_iter().map(process).collect());

    let mut report = StageReport::new(scheme.name());
    for (frame, result) in frames.iter().zip(results) {
        match result {
            Ok(r) => report.frames.push(r),
            Err(e) if single => return Err(e),
            Err(e) => {
                log::error!("frame {frame}: {e}");
                report.failures.push((frame.clone(), e.to_string()));
            }
        }
    }
    report.aggregate();
    report.write_json(cfg.io.output_dir.join("report.json"))?;
    Ok(report)
}

/// Point counts for every frame: raw PseudoLiDAR, keypoints, foreground and
/// the sampled output of each scheme that has inputs, plus real-scan sizes
/// when `lidar_dir` is set.
pub fn stats(cfg: &PipelineConfig) -> Result<Vec<StatsRow>> {
    cfg.validate()?;
    let frames = resolve_frames(cfg)?;
    let has_regions = cfg.io.regions_dir.is_some() || cfg.io.masks_dir.is_some();
    worker_pool(cfg.workers)?.install(|| {
        frames
            .par_iter()
            .map(|frame| {
                let inputs = FrameInputs::load(cfg, frame, Scheme::Unsupervised)?;
                let (_, unsup) = run_frame(Scheme::Unsupervised, frame, &inputs, cfg)?;
                let sup = if has_regions {
                    let inputs = FrameInputs {
                        regions: Some(load_regions(&cfg.io, frame)?),
                        ..inputs
                    };
                    Some(run_frame(Scheme::Supervised, frame, &inputs, cfg)?.1)
                } else {
                    None
                };
                let lidar_points = match &cfg.io.lidar_dir {
                    Some(dir) => {
                        let p = dir.join(format!("{frame}.bin"));
                        if p.exists() {
                            Some(kitti_io::read_point_bin(&p, Frame::Sensor)?.len())
                        } else {
                            None
                        }
                    }
                    None => None,
                };
                Ok(StatsRow {
                    frame: frame.clone(),
                    raw: unsup.counts.raw,
                    keypoints: unsup.counts.keypoints_kept.unwrap_or(0),
                    foreground_unsup: unsup.counts.foreground,
                    sampled_unsup: unsup.counts.sampled,
                    foreground_sup: sup.as_ref().map(|r| r.counts.foreground),
                    sampled_sup: sup.as_ref().map(|r| r.counts.sampled),
                    lidar_points,
                })
            })
            .collect()
    })
}
