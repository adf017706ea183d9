use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::foreground::SeparationConfig;
use crate::frustum::FrustumConfig;
use crate::keypoints::PoisConfig;
use crate::kitti_io::DEFAULT_DEPTH_DIVISOR;
use crate::projection::RangeCropConfig;
use crate::sampler::StratifyConfig;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IoConfig {
    /// `<frame>.png`, single-channel 16-bit.
    pub depth_dir: PathBuf,
    /// `<frame>.txt`.
    pub calib_dir: PathBuf,
    /// Optional `<frame>.png` intensity images for keypoints; the depth map
    /// stands in when absent.
    pub image_dir: Option<PathBuf>,
    /// `<frame>.txt` detections in label format.
    pub regions_dir: Option<PathBuf>,
    /// `<frame>.png` single-channel masks, used when `regions_dir` is unset.
    pub masks_dir: Option<PathBuf>,
    /// Real scans (`<frame>.bin`) for point-count comparison in `stats`.
    pub lidar_dir: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub depth_divisor: f64,
    /// Write outputs in the range-sensor frame instead of the camera frame.
    pub sensor_frame: bool,
}

impl Default for IoConfig {
    fn default() -> Self {
        IoConfig {
            depth_dir: "depth".into(),
            calib_dir: "calib".into(),
            image_dir: None,
            regions_dir: None,
            masks_dir: None,
            lidar_dir: None,
            output_dir: "out".into(),
            depth_divisor: DEFAULT_DEPTH_DIVISOR,
            sensor_frame: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    pub workers: usize,
    /// Frame ids; empty means every `*.png` in the depth directory.
    pub frames: Vec<String>,
    pub io: IoConfig,
    pub crop: RangeCropConfig,
    pub keypoints: PoisConfig,
    pub separation: SeparationConfig,
    pub sampler: StratifyConfig,
    pub frustum: FrustumConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            seed: 0,
            workers: 1,
            frames: Vec::new(),
            io: IoConfig::default(),
            crop: RangeCropConfig::default(),
            keypoints: PoisConfig::default(),
            separation: SeparationConfig::default(),
            sampler: StratifyConfig::default(),
            frustum: FrustumConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::config(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("pipeline config always serialises")
    }

    /// Reads a config; relative directories resolve against the file's
    /// parent directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::from(e).at(path))?;
        let mut cfg = Self::from_toml(&text).map_err(|e| e.at(path))?;
        if let Some(base) = path.parent() {
            cfg.io.rebase(base);
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.separation.validate()?;
        self.sampler.validate()?;
        if !(self.io.depth_divisor > 0.0) {
            return Err(Error::config("depth_divisor must be positive"));
        }
        if !(0.0..=1.0).contains(&self.frustum.score_floor) {
            return Err(Error::config("score_floor must lie in [0, 1]"));
        }
        Ok(())
    }

    /// Checks that the directories a run reads from exist.
    pub fn check_dirs(&self, supervised: bool) -> Result<()> {
        let mut dirs = vec![&self.io.depth_dir, &self.io.calib_dir];
        dirs.extend(self.io.image_dir.as_ref());
        if supervised {
            match (&self.io.regions_dir, &self.io.masks_dir) {
                (Some(d), _) | (None, Some(d)) => dirs.push(d),
                (None, None) => {
                    return Err(Error::config("supervised run needs regions_dir or masks_dir"))
                }
            }
        }
        for d in dirs {
            if !d.is_dir() {
                return Err(Error::config(format!("directory {} does not exist", d.display())));
            }
        }
        Ok(())
    }
}

impl IoConfig {
    fn rebase(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.depth_dir);
        fix(&mut self.calib_dir);
        fix(&mut self.output_dir);
        for p in [
            &mut self.image_dir,
            &mut self.regions_dir,
            &mut self.masks_dir,
            &mut self.lidar_dir,
        ]
        .into_iter()
        .flatten()
        {
            fix(p);
        }
    }
}

/// Per-frame seed: FNV-1a of the frame id mixed into the global seed with a
/// splitmix64 finaliser. Independent of batch order and worker count.
pub fn frame_seed(seed: u64, frame_id: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in frame_id.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    let mut z = seed.wrapping_add(0x9E37_79B9_7F4A_7C15) ^ h;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
