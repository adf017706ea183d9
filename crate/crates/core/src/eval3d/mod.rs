//! KITTI-style 3D detection evaluation: rotated BEV and 3D IoU, difficulty
//! tiers, greedy score-ordered matching and N-point interpolated average
//! precision on the 11- and 40-point recall grids.

mod ap;
mod dataset;
mod iou;
mod matching;

pub use ap::{interpolated_ap, recall_grid, ApResult, RecallPositions};
pub use dataset::{evaluate_dirs, evaluate_frames, EvalEntry, EvalReport, FrameLabels, Metric};
pub use iou::{bev_corners, bev_intersection_area, bev_iou, convex_clip, iou_2d, iou_3d, polygon_area, OrientedBox};
pub use matching::{assign_difficulty, match_and_sweep, Difficulty, EvalConfig, PrCurve, SweepCounts};
