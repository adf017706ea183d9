//! The point cloud container shared by every stage.

use crate::error::{Error, Result};

/// Coordinate frame a cloud is expressed in.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Frame {
    /// Rectified camera frame: x right, y down, z forward.
    CameraRect,
    /// Range-sensor frame: x forward, y left, z up.
    Sensor,
}

impl Frame {
    /// Index of the forward-looking axis.
    pub fn forward_axis(self) -> usize {
        match self {
            Frame::CameraRect => 2,
            Frame::Sensor => 0,
        }
    }
}

/// Per-point provenance label.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum Tag {
    Foreground,
    Background,
    #[default]
    Unassigned,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PointCloud {
    pub points: Vec<[f64; 3]>,
    pub frame: Frame,
    pub intensity: Option<Vec<f32>>,
    pub tags: Option<Vec<Tag>>,
}

impl PointCloud {
    pub fn new(points: Vec<[f64; 3]>, frame: Frame) -> Self {
        PointCloud {
            points,
            frame,
            intensity: None,
            tags: None,
        }
    }

    pub fn empty(frame: Frame) -> Self {
        Self::new(Vec::new(), frame)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn with_tags(mut self, tags: Vec<Tag>) -> Result<Self> {
        if tags.len() != self.points.len() {
            return Err(Error::usage(format!(
                "{} tags for {} points",
                tags.len(),
                self.points.len()
            )));
        }
        self.tags = Some(tags);
        Ok(self)
    }

    pub fn tag(&self, i: usize) -> Tag {
        self.tags.as_ref().map_or(Tag::Unassigned, |t| t[i])
    }

    pub fn count_tag(&self, tag: Tag) -> usize {
        match &self.tags {
            Some(tags) => tags.iter().filter(|&&t| t == tag).count(),
            None if tag == Tag::Unassigned => self.len(),
            None => 0,
        }
    }

    /// Checks that every coordinate (and intensity) is finite and that the
    /// side channels match the point count.
    pub fn validate(&self) -> Result<()> {
        for (i, p) in self.points.iter().enumerate() {
            if !p.iter().all(|c| c.is_finite()) {
                return Err(Error::Data {
                    index: i,
                    msg: format!("non-finite point {p:?}"),
                });
            }
        }
        if let Some(intensity) = &self.intensity {
            if intensity.len() != self.len() {
                return Err(Error::usage("intensity length differs from point count"));
            }
            if let Some(i) = intensity.iter().position(|v| !v.is_finite()) {
                return Err(Error::Data {
                    index: i,
                    msg: "non-finite intensity".into(),
                });
            }
        }
        if let Some(tags) = &self.tags {
            if tags.len() != self.len() {
                return Err(Error::usage("tag length differs from point count"));
            }
        }
        Ok(())
    }

    /// Keeps the points at `indices`, in the given order, along with their
    /// side channels.
    pub fn select(&self, indices: &[usize]) -> PointCloud {
        PointCloud {
            points: indices.iter().map(|&i| self.points[i]).collect(),
            frame: self.frame,
            intensity: self
                .intensity
                .as_ref()
                .map(|v| indices.iter().map(|&i| v[i]).collect()),
            tags: self
                .tags
                .as_ref()
                .map(|v| indices.iter().map(|&i| v[i]).collect()),
        }
    }

    /// Rounds every coordinate to the nearest `f32`, which is what a cloud
    /// looks like after a trip through the binary point format.
    pub fn quantize_f32(&mut self) {
        for p in &mut self.points {
            for c in p.iter_mut() {
                *c = *c as f32 as f64;
            }
        }
    }

    /// Index of every point carrying `tag`, ascending.
    pub fn indices_with_tag(&self, tag: Tag) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.tag(i) == tag).collect()
    }
}

pub(crate) fn dist2(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    dx * dx + dy * dy + dz * dz
}
