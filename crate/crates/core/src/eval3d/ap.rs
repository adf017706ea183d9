use serde::{Deserialize, Serialize};

use super::matching::{PrCurve, SweepCounts};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RecallPositions {
    /// `{0, 0.1, …, 1}`.
    R11,
    /// `{1/40, 2/40, …, 1}`; recall 0 is excluded.
    #[default]
    R40,
}

impl RecallPositions {
    pub fn name(self) -> &'static str {
        match self {
            RecallPositions::R11 => "R11",
            RecallPositions::R40 => "R40",
        }
    }
}

pub fn recall_grid(positions: RecallPositions) -> Vec<f64> {
    match positions {
        RecallPositions::R11 => (0..=10).map(|i| i as f64 / 10.0).collect(),
        RecallPositions::R40 => (1..=40).map(|i| i as f64 / 40.0).collect(),
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ApResult {
    pub ap: f64,
    pub pr_curve: Vec<(f64, f64)>,
    pub counts: SweepCounts,
}

/// Mean over the recall grid of the best precision reached at or beyond each
/// grid recall; grid positions the curve never reaches contribute zero.
pub fn interpolated_ap(curve: &PrCurve, positions: RecallPositions) -> ApResult {
    let points = &curve.points;
    // Suffix maxima of precision; curve recall is non-decreasing.
    let mut best_after = vec![0.0f64; points.len() + 1];
    for i in (0..points.len()).rev() {
        best_after[i] = best_after[i + 1].max(points[i].1);
    }
    let grid = recall_grid(positions);
    let sum: f64 = grid
        .iter()
        .map(|&r| best_after[points.partition_point(|p| p.0 < r)])
        .sum();
    ApResult {
        ap: sum / grid.len() as f64,
        pr_curve: points.clone(),
        counts: curve.counts,
    }
}
