//! PseudoLiDAR data engineering.
//!
//! Turns dense monocular depth maps into point clouds, sparsifies them down to
//! a few percent of their points with either an unsupervised chain
//! (keypoints, approximate foreground separation, distance-stratified
//! sampling) or a supervised one driven by external 2D detections, and scores
//! 3D detections with a KITTI-style interpolated average precision.
//!
//! Each stage is an ordinary function over in-memory data; [`pipeline`] wires
//! them into per-frame and batch runs, and [`kitti_io`] covers the on-disk
//! formats.

// Config checks are written `!(x > 0.0)` so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cloud;
pub mod error;
pub mod eval3d;
pub mod fixtures;
pub mod foreground;
pub mod frustum;
pub mod keypoints;
pub mod kitti_io;
pub mod pipeline;
pub mod projection;
pub mod sampler;
pub mod spatial_index;

pub use cloud::{Frame, PointCloud, Tag};
pub use error::{Error, Result};
