//! Distance-stratified sampling: points are binned by range from the sensor
//! origin and each bin is thinned at the same rate, so the range-wise density
//! profile survives the reduction.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cloud::PointCloud;
use crate::error::{Error, Result};

/// The sampling-rate ladder swept by `dss --sweep`.
pub const RATE_LADDER: [f64; 5] = [0.8, 0.6, 0.4, 0.2, 0.1];

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RangeMode {
    /// Euclidean distance from the origin.
    #[default]
    Euclidean,
    /// Coordinate along the frame's forward axis.
    Depth,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StratifyConfig {
    pub bin_width: f64,
    pub max_range: f64,
    pub rate: f64,
    pub seed: u64,
    pub min_keep_per_bin: usize,
    pub range_mode: RangeMode,
}

impl Default for StratifyConfig {
    fn default() -> Self {
        StratifyConfig {
            bin_width: 5.0,
            max_range: 70.0,
            rate: 0.10,
            seed: 0,
            min_keep_per_bin: 0,
            range_mode: RangeMode::Euclidean,
        }
    }
}

impl StratifyConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.bin_width > 0.0) {
            return Err(Error::config("bin_width must be positive"));
        }
        if !(self.max_range > 0.0) {
            return Err(Error::config("max_range must be positive"));
        }
        if !(self.rate > 0.0 && self.rate <= 1.0) {
            return Err(Error::config("rate must lie in (0, 1]"));
        }
        Ok(())
    }

    /// Regular bins plus the trailing overflow bin.
    pub fn bin_count(&self) -> usize {
        (self.max_range / self.bin_width).ceil() as usize + 1
    }

    pub fn bin_of(&self, range: f64) -> usize {
        let overflow = self.bin_count() - 1;
        if range >= self.max_range {
            overflow
        } else {
            ((range / self.bin_width).floor() as usize).min(overflow)
        }
    }

    /// Points kept from a bin of `n` points.
    pub fn quota(&self, n: usize) -> usize {
        let by_rate = (self.rate * n as f64).round() as usize;
        by_rate.max(self.min_keep_per_bin).min(n)
    }
}

pub fn point_range(p: &[f64; 3], mode: RangeMode, forward_axis: usize) -> f64 {
    match mode {
        RangeMode::Euclidean => (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt(),
        RangeMode::Depth => p[forward_axis],
    }
}

/// Per-bin point indices, each list ascending.
pub fn stratify(cloud: &PointCloud, cfg: &StratifyConfig) -> Result<Vec<Vec<usize>>> {
    cfg.validate()?;
    let axis = cloud.frame.forward_axis();
    let mut bins = vec![Vec::new(); cfg.bin_count()];
    for (i, p) in cloud.points.iter().enumerate() {
        bins[cfg.bin_of(point_range(p, cfg.range_mode, axis))].push(i);
    }
    Ok(bins)
}

/// Per-bin generator seed.
fn bin_seed(seed: u64, bin: usize) -> u64 {
    // splitmix64 finaliser over the pair.
    let mut z = seed ^ (bin as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// First `k` entries of a seeded Fisher-Yates shuffle of `items`.
fn shuffle_prefix(items: &[usize], k: usize, seed: u64) -> Vec<usize> {
    let mut v = items.to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in 0..k {
        let j = rng.random_range(i..v.len());
        v.swap(i, j);
    }
    v.truncate(k);
    v
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct BinCounts {
    pub total: Vec<usize>,
    pub kept: Vec<usize>,
}

/// Samples every bin at `cfg.rate` and returns the survivors in input order.
pub fn sample(cloud: &PointCloud, cfg: &StratifyConfig) -> Result<PointCloud> {
    Ok(sample_with_counts(cloud, cfg)?.0)
}

pub fn sample_with_counts(cloud: &PointCloud, cfg: &StratifyConfig) -> Result<(PointCloud, BinCounts)> {
    let bins = stratify(cloud, cfg)?;
    let picked: Vec<Vec<usize>> = bins
        .par_iter()
        .enumerate()
        .map(|(b, members)| shuffle_prefix(members, cfg.quota(members.len()), bin_seed(cfg.seed, b)))
        .collect();
    let counts = BinCounts {
        total: bins.iter().map(Vec::len).collect(),
        kept: picked.iter().map(Vec::len).collect(),
    };
    let mut keep: Vec<usize> = picked.into_iter().flatten().collect();
    keep.sort_unstable();
    Ok((cloud.select(&keep), counts))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cloud::Frame;

    #[test]
    fn bin_assignment() {
        let cfg = StratifyConfig::default();
        assert_eq!(cfg.bin_of(7.3), 1);
        assert_eq!(cfg.bin_of(0.0), 0);
        assert_eq!(cfg.bin_of(69.999), 13);
        assert_eq!(cfg.bin_of(70.0), 14);
        assert_eq!(cfg.bin_count(), 15);
    }

    #[test]
    fn points_beyond_max_range_overflow() {
        let cloud = PointCloud::new(vec![[0.0, 0.0, 80.0], [100.0, 0.0, 0.0]], Frame::CameraRect);
        let bins = stratify(&cloud, &StratifyConfig::default()).unwrap();
        assert_eq!(bins.last().unwrap(), &vec![0, 1]);
        assert!(bins[..bins.len() - 1].iter().all(Vec::is_empty));
    }

    #[test]
    fn depth_mode_uses_forward_axis() {
        let cfg = StratifyConfig {
            range_mode: RangeMode::Depth,
            ..Default::default()
        };
        let cam = PointCloud::new(vec![[30.0, 0.0, 7.0]], Frame::CameraRect);
        assert_eq!(stratify(&cam, &cfg).unwrap()[1], vec![0]);
        let sensor = PointCloud::new(vec![[7.0, 30.0, 0.0]], Frame::Sensor);
        assert_eq!(stratify(&sensor, &cfg).unwrap()[1], vec![0]);
    }

    #[test]
    fn full_rate_is_identity() {
        let cloud = PointCloud::new(
            (0..200).map(|i| [i as f64 * 0.3, 1.0, 2.0]).collect(),
            Frame::CameraRect,
        );
        let cfg = StratifyConfig {
            rate: 1.0,
            ..Default::default()
        };
        assert_eq!(sample(&cloud, &cfg).unwrap(), cloud);
    }

    #[test]
    fn thousand_points_at_ten_percent() {
        // One bin: every point at range 12 m.
        let cloud = PointCloud::new(vec![[0.0, 0.0, 12.0]; 1000], Frame::CameraRect);
        let (out, counts) = sample_with_counts(&cloud, &StratifyConfig::default()).unwrap();
        assert_eq!(out.len(), 100);
        assert_eq!(counts.kept[2], 100);
    }

    #[test]
    fn min_keep_floor_and_cap() {
        let cfg = StratifyConfig {
            min_keep_per_bin: 5,
            ..Default::default()
        };
        assert_eq!(cfg.quota(3), 3);
        assert_eq!(cfg.quota(20), 5);
        assert_eq!(cfg.quota(1000), 100);
        assert_eq!(cfg.quota(0), 0);
    }

    #[test]
    fn invalid_rate_rejected() {
        for rate in [0.0, -0.1, 1.5, f64::NAN] {
            let cfg = StratifyConfig {
                rate,
                ..Default::default()
            };
            assert!(cfg.validate().is_err());
        }
    }
}
