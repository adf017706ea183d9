use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ap::{interpolated_ap, RecallPositions};
use super::matching::{match_and_sweep, Difficulty, EvalConfig};
use crate::error::{Error, Result};
use crate::kitti_io::{read_labels, LabelRecord};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Metric {
    #[serde(rename = "BEV")]
    Bev,
    #[serde(rename = "3D")]
    ThreeD,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::Bev => "BEV",
            Metric::ThreeD => "3D",
        }
    }
}

/// Ground truth and detections for one frame.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FrameLabels {
    pub gts: Vec<LabelRecord>,
    pub dets: Vec<LabelRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EvalEntry {
    pub class: String,
    pub difficulty: Difficulty,
    pub metric: Metric,
    pub grid: RecallPositions,
    pub iou_threshold: f64,
    pub ap: f64,
    pub tp: usize,
    pub fp: usize,
    pub n_gt: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct EvalReport {
    pub frames: usize,
    pub entries: Vec<EvalEntry>,
}

impl EvalReport {
    pub fn get(&self, class: &str, difficulty: Difficulty, metric: Metric, grid: RecallPositions) -> Option<&EvalEntry> {
        self.entries
            .iter()
            .find(|e| e.class == class && e.difficulty == difficulty && e.metric == metric && e.grid == grid)
    }

    /// Aligned table, AP in percent.
    pub fn to_text(&self) -> String {
        let mut s = format!("frames: {}\n", self.frames);
        writeln!(
            s,
            "{:<12} {:<6} {:<4} {:>4}  {:>7} {:>7} {:>7}",
            "class", "metric", "grid", "IoU", "easy", "mod", "hard"
        )
        .unwrap();
        let mut keys: Vec<(&str, Metric, RecallPositions, f64)> = Vec::new();
        for e in &self.entries {
            let k = (e.class.as_str(), e.metric, e.grid, e.iou_threshold);
            if !keys.contains(&k) {
                keys.push(k);
            }
        }
        for (class, metric, grid, thr) in keys {
            write!(s, "{:<12} {:<6} {:<4} {:>4.2} ", class, metric.name(), grid.name(), thr).unwrap();
            for d in Difficulty::ALL {
                match self.get(class, d, metric, grid) {
                    Some(e) => write!(s, " {:>7.2}", 100.0 * e.ap).unwrap(),
                    None => write!(s, " {:>7}", "-").unwrap(),
                }
            }
            s.push('\n');
        }
        s
    }
}

/// AP for every class × difficulty × metric × recall grid.
pub fn evaluate_frames(frames: &[FrameLabels], classes: &[String], base: &EvalConfig) -> Result<EvalReport> {
    let mut entries = Vec::new();
    for class in classes {
        for metric in [Metric::Bev, Metric::ThreeD] {
            for difficulty in Difficulty::ALL {
                let cfg = EvalConfig {
                    difficulty,
                    ..base.clone()
                };
                let curve = match_and_sweep(frames, class, metric, &cfg)?;
                for grid in [RecallPositions::R11, RecallPositions::R40] {
                    let res = interpolated_ap(&curve, grid);
                    entries.push(EvalEntry {
                        class: class.clone(),
                        difficulty,
                        metric,
                        grid,
                        iou_threshold: cfg.threshold(class),
                        ap: res.ap,
                        tp: res.counts.tp,
                        fp: res.counts.fp,
                        n_gt: res.counts.n_gt,
                    });
                }
            }
        }
    }
    Ok(EvalReport {
        frames: frames.len(),
        entries,
    })
}

/// Pairs every `*.txt` in `gt_dir` with the same-named file in `det_dir`; a
/// missing detection file means no detections for that frame.
pub fn evaluate_dirs(det_dir: &Path, gt_dir: &Path, classes: &[String], cfg: &EvalConfig) -> Result<EvalReport> {
    let mut names: Vec<_> = fs::read_dir(gt_dir)
        .map_err(|e| Error::from(e).at(gt_dir))?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|x| x == "txt"))
        .collect();
    names.sort();
    let mut frames = Vec::with_capacity(names.len());
    for gt_path in names {
        let det_path = det_dir.join(gt_path.file_name().unwrap());
        let dets = if det_path.exists() {
            read_labels(&det_path)?
        } else {
            Vec::new()
        };
        frames.push(FrameLabels {
            gts: read_labels(&gt_path)?,
            dets,
        });
    }
    evaluate_frames(&frames, classes, cfg)
}
