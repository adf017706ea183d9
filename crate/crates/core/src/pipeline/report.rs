use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct StageCounts {
    pub raw: usize,
    pub keypoints_detected: Option<usize>,
    pub keypoints_kept: Option<usize>,
    pub foreground: usize,
    pub blended: usize,
    pub sampled: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FrameReport {
    pub frame: String,
    pub counts: StageCounts,
    /// Wall time per stage, milliseconds.
    pub timings_ms: BTreeMap<String, f64>,
}

impl FrameReport {
    pub fn new(frame: &str) -> Self {
        FrameReport {
            frame: frame.to_string(),
            counts: StageCounts::default(),
            timings_ms: BTreeMap::new(),
        }
    }

    pub(crate) fn timing(&mut self, stage: &str, ms: f64) {
        self.timings_ms.insert(stage.to_string(), ms);
    }

    pub fn total_ms(&self) -> f64 {
        self.timings_ms.values().sum()
    }

    /// Written points over raw points.
    pub fn reduction_ratio(&self) -> f64 {
        if self.counts.raw == 0 {
            0.0
        } else {
            self.counts.sampled as f64 / self.counts.raw as f64
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StageReport {
    pub scheme: String,
    pub frames: Vec<FrameReport>,
    /// `(frame, error)` for frames skipped in batch mode.
    pub failures: Vec<(String, String)>,
    pub total_raw: usize,
    pub total_sampled: usize,
    pub reduction_ratio: f64,
}

impl StageReport {
    pub fn new(scheme: &str) -> Self {
        StageReport {
            scheme: scheme.to_string(),
            frames: Vec::new(),
            failures: Vec::new(),
            total_raw: 0,
            total_sampled: 0,
            reduction_ratio: 0.0,
        }
    }

    pub fn aggregate(&mut self) {
        self.total_raw = self.frames.iter().map(|f| f.counts.raw).sum();
        self.total_sampled = self.frames.iter().map(|f| f.counts.sampled).sum();
        self.reduction_ratio = if self.total_raw == 0 {
            0.0
        } else {
            self.total_sampled as f64 / self.total_raw as f64
        };
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self).expect("report serialises");
        std::fs::write(path, text + "\n").map_err(|e| Error::from(e).at(path))
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        writeln!(
            s,
            "{:<12} {:>9} {:>9} {:>11} {:>9} {:>9} {:>7} {:>9}",
            "frame", "raw", "keypts", "foreground", "blended", "sampled", "ratio", "ms"
        )
        .unwrap();
        for f in &self.frames {
            let c = &f.counts;
            writeln!(
                s,
                "{:<12} {:>9} {:>9} {:>11} {:>9} {:>9} {:>7.4} {:>9.1}",
                f.frame,
                c.raw,
                c.keypoints_kept.map_or("-".to_string(), |k| k.to_string()),
                c.foreground,
                c.blended,
                c.sampled,
                f.reduction_ratio(),
                f.total_ms()
            )
            .unwrap();
        }
        writeln!(
            s,
            "{} frames, {} failed, {} -> {} points (ratio {:.4})",
            self.frames.len(),
            self.failures.len(),
            self.total_raw,
            self.total_sampled,
            self.reduction_ratio
        )
        .unwrap();
        s
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct StatsRow {
    pub frame: String,
    pub raw: usize,
    pub keypoints: usize,
    pub foreground_unsup: usize,
    pub sampled_unsup: usize,
    pub foreground_sup: Option<usize>,
    pub sampled_sup: Option<usize>,
    pub lidar_points: Option<usize>,
}

impl StatsRow {
    pub fn header() -> String {
        format!(
            "{:<12} {:>9} {:>7} {:>10} {:>10} {:>10} {:>10} {:>9}",
            "frame", "raw", "keypts", "fg_unsup", "out_unsup", "fg_sup", "out_sup", "lidar"
        )
    }

    pub fn to_line(&self) -> String {
        let opt = |v: Option<usize>| v.map_or("-".to_string(), |v| v.to_string());
        format!(
            "{:<12} {:>9} {:>7} {:>10} {:>10} {:>10} {:>10} {:>9}",
            self.frame,
            self.raw,
            self.keypoints,
            self.foreground_unsup,
            self.sampled_unsup,
            opt(self.foreground_sup),
            opt(self.sampled_sup),
            opt(self.lidar_points)
        )
    }
}
