use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::ap::RecallPositions;
use super::dataset::{FrameLabels, Metric};
use super::iou::{bev_iou, iou_2d, iou_3d, OrientedBox};
use crate::error::Result;
use crate::kitti_io::LabelRecord;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Difficulty {
    Easy,
    Moderate,
    Hard,
}

impl Difficulty {
    pub const ALL: [Difficulty; 3] = [Difficulty::Easy, Difficulty::Moderate, Difficulty::Hard];

    /// `(min 2D box height px, max occlusion, max truncation)`.
    fn gate(self) -> (f64, i32, f64) {
        match self {
            Difficulty::Easy => (40.0, 0, 0.15),
            Difficulty::Moderate => (25.0, 1, 0.30),
            Difficulty::Hard => (25.0, 2, 0.50),
        }
    }

    pub fn admits(self, gt: &LabelRecord) -> bool {
        let (min_h, max_occ, max_trunc) = self.gate();
        gt.bbox_height() >= min_h && (0..=max_occ).contains(&gt.occlusion) && gt.truncation <= max_trunc
    }
}

/// Tiers a ground-truth box belongs to. Tiers are cumulative: an easy box
/// is also moderate and hard. Empty means ignored everywhere.
pub fn assign_difficulty(gt: &LabelRecord) -> Vec<Difficulty> {
    Difficulty::ALL.into_iter().filter(|d| d.admits(gt)).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    /// Minimum IoU for a true positive, per class.
    pub iou_thresholds: BTreeMap<String, f64>,
    pub recall_positions: RecallPositions,
    pub difficulty: Difficulty,
    /// 2D IoU with a `DontCare` region above which a detection is ignored.
    pub dont_care_iou: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        let iou_thresholds = [("Car", 0.7), ("Pedestrian", 0.5), ("Cyclist", 0.5)]
            .into_iter()
            .map(|(c, t)| (c.to_string(), t))
            .collect();
        EvalConfig {
            iou_thresholds,
            recall_positions: RecallPositions::R40,
            difficulty: Difficulty::Moderate,
            dont_care_iou: 0.5,
        }
    }
}

impl EvalConfig {
    pub fn threshold(&self, class: &str) -> f64 {
        self.iou_thresholds.get(class).copied().unwrap_or(0.5)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct SweepCounts {
    pub tp: usize,
    pub fp: usize,
    /// Detections absorbed by ignored ground truth or `DontCare` regions.
    pub ignored: usize,
    pub matched_gt: usize,
    pub n_gt: usize,
}

/// `(recall, precision)` after each counted detection.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct PrCurve {
    pub points: Vec<(f64, f64)>,
    pub counts: SweepCounts,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum GtRole {
    Valid,
    Ignored,
}

fn overlap(metric: Metric, a: &OrientedBox, b: &OrientedBox) -> Result<f64> {
    match metric {
        Metric::Bev => bev_iou(a, b),
        Metric::ThreeD => iou_3d(a, b),
    }
}

/// Greedy matching in descending score order over all frames.
///
/// Each detection takes the unmatched in-tier ground truth of highest IoU at
/// or above the class threshold. Failing that, a detection overlapping
/// same-class ground truth outside the tier, or a `DontCare` region, is
/// neither a true nor a false positive.
pub fn match_and_sweep(frames: &[FrameLabels], class: &str, metric: Metric, cfg: &EvalConfig) -> Result<PrCurve> {
    let thr = cfg.threshold(class);
    struct FrameState {
        gts: Vec<(OrientedBox, GtRole)>,
        used: Vec<bool>,
        dont_care: Vec<[f64; 4]>,
    }
    let mut states = Vec::with_capacity(frames.len());
    let mut n_gt = 0;
    let mut dets = Vec::new();
    for (f, frame) in frames.iter().enumerate() {
        let mut gts = Vec::new();
        let mut dont_care = Vec::new();
        for gt in &frame.gts {
            if gt.is_dont_care() {
                dont_care.push(gt.bbox2d);
            } else if gt.class_name == class {
                let role = if cfg.difficulty.admits(gt) {
                    n_gt += 1;
                    GtRole::Valid
                } else {
                    GtRole::Ignored
                };
                gts.push((OrientedBox::from_label(gt), role));
            }
        }
        states.push(FrameState {
            used: vec![false; gts.len()],
            gts,
            dont_care,
        });
        for (d, det) in frame.dets.iter().enumerate() {
            if det.class_name == class {
                dets.push((det.score.unwrap_or(0.0), f, d));
            }
        }
    }
    // Descending score; equal scores keep input order.
    dets.sort_by(|a, b| b.0.total_cmp(&a.0).then((a.1, a.2).cmp(&(b.1, b.2))));

    let mut curve = PrCurve::default();
    curve.counts.n_gt = n_gt;
    for &(_, f, d) in &dets {
        let det = &frames[f].dets[d];
        let det_box = OrientedBox::from_label(det);
        let state = &mut states[f];
        let mut best: [Option<(f64, usize)>; 2] = [None, None];
        for (g, (gt_box, role)) in state.gts.iter().enumerate() {
            if state.used[g] {
                continue;
            }
            let iou = overlap(metric, &det_box, gt_box)?;
            if iou < thr {
                continue;
            }
            let slot = &mut best[(*role == GtRole::Ignored) as usize];
            if slot.is_none_or(|(b, _)| iou > b) {
                *slot = Some((iou, g));
            }
        }
        if let Some((_, g)) = best[0] {
            state.used[g] = true;
            curve.counts.tp += 1;
        } else if let Some((_, g)) = best[1] {
            state.used[g] = true;
            curve.counts.ignored += 1;
            continue;
        } else if state
            .dont_care
            .iter()
            .any(|dc| iou_2d(&det.bbox2d, dc) >= cfg.dont_care_iou)
        {
            curve.counts.ignored += 1;
            continue;
        } else {
            curve.counts.fp += 1;
        }
        if n_gt > 0 {
            let tp = curve.counts.tp as f64;
            curve
                .points
                .push((tp / n_gt as f64, tp / (curve.counts.tp + curve.counts.fp) as f64));
        }
    }
    curve.counts.matched_gt = curve.counts.tp;
    Ok(curve)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gt(h: f64, occ: i32, trunc: f64) -> LabelRecord {
        LabelRecord {
            class_name: "Car".into(),
            truncation: trunc,
            occlusion: occ,
            alpha: 0.0,
            bbox2d: [100.0, 100.0, 150.0, 100.0 + h],
            dims: [1.5, 1.6, 3.9],
            location: [0.0, 1.6, 20.0],
            yaw: 0.0,
            score: None,
        }
    }

    #[test]
    fn difficulty_tiers() {
        use Difficulty::*;
        assert_eq!(assign_difficulty(&gt(50.0, 0, 0.0)), vec![Easy, Moderate, Hard]);
        assert_eq!(assign_difficulty(&gt(30.0, 1, 0.2)), vec![Moderate, Hard]);
        assert_eq!(assign_difficulty(&gt(20.0, 0, 0.0)), vec![]);
        assert_eq!(assign_difficulty(&gt(50.0, 2, 0.4)), vec![Hard]);
        assert_eq!(assign_difficulty(&gt(50.0, 3, 0.0)), vec![]);
    }

    #[test]
    fn exact_copies_reach_full_recall() {
        let gts: Vec<_> = (0..4)
            .map(|i| {
                let mut g = gt(50.0, 0, 0.0);
                g.location[0] = 5.0 * i as f64;
                g
            })
            .collect();
        let dets = gts
            .iter()
            .map(|g| LabelRecord {
                score: Some(0.9),
                ..g.clone()
            })
            .collect();
        let frames = [FrameLabels { gts, dets }];
        let curve = match_and_sweep(&frames, "Car", Metric::ThreeD, &EvalConfig::default()).unwrap();
        assert_eq!(curve.points.last(), Some(&(1.0, 1.0)));
        assert_eq!(curve.counts.tp, 4);
    }

    #[test]
    fn no_detections_empty_curve() {
        let frames = [FrameLabels {
            gts: vec![gt(50.0, 0, 0.0)],
            dets: vec![],
        }];
        let curve = match_and_sweep(&frames, "Car", Metric::Bev, &EvalConfig::default()).unwrap();
        assert!(curve.points.is_empty());
        assert_eq!(curve.counts.n_gt, 1);
    }

    #[test]
    fn hard_only_gt_is_ignored_for_easy() {
        let hard = gt(30.0, 2, 0.0);
        let det = LabelRecord {
            score: Some(0.5),
            ..hard.clone()
        };
        let frames = [FrameLabels {
            gts: vec![hard],
            dets: vec![det],
        }];
        let cfg = EvalConfig {
            difficulty: Difficulty::Easy,
            ..Default::default()
        };
        let curve = match_and_sweep(&frames, "Car", Metric::Bev, &cfg).unwrap();
        assert_eq!(curve.counts, SweepCounts { tp: 0, fp: 0, ignored: 1, matched_gt: 0, n_gt: 0 });
    }

    #[test]
    fn dont_care_absorbs_detection() {
        let mut dc = gt(50.0, 0, 0.0);
        dc.class_name = "DontCare".into();
        let mut det = gt(50.0, 0, 0.0);
        det.location = [30.0, 1.6, 40.0];
        det.score = Some(0.4);
        let frames = [FrameLabels {
            gts: vec![gt(50.0, 0, 0.0), dc],
            dets: vec![det],
        }];
        let curve = match_and_sweep(&frames, "Car", Metric::Bev, &EvalConfig::default()).unwrap();
        assert_eq!(curve.counts.ignored, 1);
        assert_eq!(curve.counts.fp, 0);
    }
}
