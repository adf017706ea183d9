//! Approximate foreground separation: points near any retained keypoint are
//! foreground, the rest background, and a small seeded share of the
//! background is blended back in.

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cloud::{PointCloud, Tag};
use crate::error::{Error, Result};
use crate::spatial_index::{SpatialIndex, DEFAULT_LEAF_SIZE};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SeparationConfig {
    /// Radius around each anchor, meters.
    pub fg_radius: f64,
    /// Share of background points blended back in.
    pub bg_keep_ratio: f64,
    pub seed: u64,
}

impl Default for SeparationConfig {
    fn default() -> Self {
        SeparationConfig {
            fg_radius: 0.8,
            bg_keep_ratio: 0.02,
            seed: 0,
        }
    }
}

impl SeparationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.fg_radius > 0.0) {
            return Err(Error::config("fg_radius must be positive"));
        }
        if !(0.0..=1.0).contains(&self.bg_keep_ratio) {
            return Err(Error::config("bg_keep_ratio must lie in [0, 1]"));
        }
        Ok(())
    }
}

/// Which side of the radius relation gets indexed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum QueryDirection {
    /// Index the anchors, query once per cloud point.
    #[default]
    AnchorIndex,
    /// Index the cloud, query once per anchor.
    CloudIndex,
}

/// `mask[i]` is true iff point `i` lies within `radius` of some anchor.
pub fn foreground_mask(
    points: &[[f64; 3]],
    anchors: &[[f64; 3]],
    radius: f64,
    direction: QueryDirection,
) -> Result<Vec<bool>> {
    if anchors.is_empty() || points.is_empty() {
        return Ok(vec![false; points.len()]);
    }
    match direction {
        QueryDirection::AnchorIndex => {
            let index = SpatialIndex::build(anchors, DEFAULT_LEAF_SIZE)?;
            points
                .par_iter()
                .map(|p| index.any_within(p, radius))
                .collect()
        }
        QueryDirection::CloudIndex => {
            let index = SpatialIndex::build(points, DEFAULT_LEAF_SIZE)?;
            let mut mask = vec![false; points.len()];
            for a in anchors {
                for i in index.ball_query(a, radius)? {
                    mask[i] = true;
                }
            }
            Ok(mask)
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct SeparationCounts {
    pub foreground: usize,
    pub background: usize,
}

/// Tags every point foreground or background by distance to `anchors`.
pub fn separate(
    cloud: &PointCloud,
    anchors: &[[f64; 3]],
    cfg: &SeparationConfig,
) -> Result<(PointCloud, SeparationCounts)> {
    cfg.validate()?;
    let mask = foreground_mask(&cloud.points, anchors, cfg.fg_radius, QueryDirection::default())?;
    Ok(tag_by_mask(cloud, &mask))
}

pub(crate) fn tag_by_mask(cloud: &PointCloud, mask: &[bool]) -> (PointCloud, SeparationCounts) {
    let tags: Vec<Tag> = mask
        .iter()
        .map(|&fg| if fg { Tag::Foreground } else { Tag::Background })
        .collect();
    let foreground = mask.iter().filter(|&&m| m).count();
    let counts = SeparationCounts {
        foreground,
        background: mask.len() - foreground,
    };
    let mut tagged = cloud.clone();
    tagged.tags = Some(tags);
    (tagged, counts)
}

/// Number of background points kept for a given background size.
pub fn background_quota(n_background: usize, ratio: f64) -> usize {
    ((ratio * n_background as f64).round() as usize).min(n_background)
}

/// All foreground points (input order) followed by a seeded uniform sample
/// of the background (input order).
pub fn blend_background(tagged: &PointCloud, cfg: &SeparationConfig) -> Result<PointCloud> {
    cfg.validate()?;
    if tagged.tags.is_none() {
        return Err(Error::usage("blend_background needs a tagged cloud"));
    }
    let mut keep = tagged.indices_with_tag(Tag::Foreground);
    let background = tagged.indices_with_tag(Tag::Background);
    let quota = background_quota(background.len(), cfg.bg_keep_ratio);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut picked: Vec<usize> = index::sample(&mut rng, background.len(), quota)
        .into_iter()
        .map(|j| background[j])
        .collect();
    picked.sort_unstable();
    keep.extend(picked);
    Ok(tagged.select(&keep))
}
