use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::kitti_io::LabelRecord;

/// Intersections thinner than this (m²) count as empty.
const AREA_EPS: f64 = 1e-9;

/// A yawed 3D box in the rectified camera frame. `center` is the
/// bottom-center (camera y points down, so the box spans `[y − h, y]`).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OrientedBox {
    pub center: [f64; 3],
    /// `(h, w, l)`.
    pub dims: [f64; 3],
    /// Rotation about the camera y axis.
    pub yaw: f64,
}

impl OrientedBox {
    pub fn new(center: [f64; 3], dims: [f64; 3], yaw: f64) -> Self {
        OrientedBox { center, dims, yaw }
    }

    pub fn from_label(rec: &LabelRecord) -> Self {
        OrientedBox::new(rec.location, rec.dims, rec.yaw)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.dims.iter().all(|&d| d > 0.0 && d.is_finite()) {
            return Err(Error::usage(format!("degenerate box dimensions {:?}", self.dims)));
        }
        if !self.center.iter().all(|c| c.is_finite()) || !self.yaw.is_finite() {
            return Err(Error::usage("non-finite box pose"));
        }
        Ok(())
    }

    /// Yaw wrapped into `(−π, π]`.
    pub fn normalized_yaw(&self) -> f64 {
        let mut y = self.yaw.rem_euclid(2.0 * PI);
        if y > PI {
            y -= 2.0 * PI;
        }
        y
    }

    pub fn bev_area(&self) -> f64 {
        self.dims[1] * self.dims[2]
    }

    pub fn volume(&self) -> f64 {
        self.dims[0] * self.dims[1] * self.dims[2]
    }
}

/// Footprint corners on the `(x, z)` ground plane, counter-clockwise.
pub fn bev_corners(b: &OrientedBox) -> [[f64; 2]; 4] {
    let (s, c) = b.yaw.sin_cos();
    let (hl, hw) = (b.dims[2] / 2.0, b.dims[1] / 2.0);
    let local = [[hl, hw], [-hl, hw], [-hl, -hw], [hl, -hw]];
    let mut out = local.map(|[x, z]| [b.center[0] + c * x + s * z, b.center[2] - s * x + c * z]);
    if signed_area(&out) < 0.0 {
        out.reverse();
    }
    out
}

fn signed_area(poly: &[[f64; 2]]) -> f64 {
    let n = poly.len();
    (0..n)
        .map(|i| {
            let (a, b) = (poly[i], poly[(i + 1) % n]);
            a[0] * b[1] - b[0] * a[1]
        })
        .sum::<f64>()
        / 2.0
}

pub fn polygon_area(poly: &[[f64; 2]]) -> f64 {
    signed_area(poly).abs()
}

/// Clips `subject` against the convex, counter-clockwise `clip` polygon
/// (Sutherland–Hodgman).
pub fn convex_clip(subject: &[[f64; 2]], clip: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let mut out = subject.to_vec();
    for i in 0..clip.len() {
        if out.is_empty() {
            break;
        }
        let (a, b) = (clip[i], clip[(i + 1) % clip.len()]);
        let side = |p: &[f64; 2]| (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]);
        let input = std::mem::take(&mut out);
        for j in 0..input.len() {
            let (p, q) = (input[j], input[(j + 1) % input.len()]);
            let (sp, sq) = (side(&p), side(&q));
            if sp >= 0.0 {
                out.push(p);
            }
            if (sp >= 0.0) != (sq >= 0.0) {
                let t = sp / (sp - sq);
                out.push([p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])]);
            }
        }
    }
    out
}

pub fn bev_intersection_area(a: &OrientedBox, b: &OrientedBox) -> f64 {
    let area = polygon_area(&convex_clip(&bev_corners(a), &bev_corners(b)));
    if area < AREA_EPS {
        0.0
    } else {
        area
    }
}

fn ratio(inter: f64, a: f64, b: f64) -> f64 {
    if inter <= 0.0 {
        return 0.0;
    }
    (inter / (a + b - inter)).clamp(0.0, 1.0)
}

pub fn bev_iou(a: &OrientedBox, b: &OrientedBox) -> Result<f64> {
    a.validate()?;
    b.validate()?;
    if a == b {
        return Ok(1.0);
    }
    Ok(ratio(bev_intersection_area(a, b), a.bev_area(), b.bev_area()))
}

pub fn iou_3d(a: &OrientedBox, b: &OrientedBox) -> Result<f64> {
    a.validate()?;
    b.validate()?;
    if a == b {
        return Ok(1.0);
    }
    let top = (a.center[1] - a.dims[0]).max(b.center[1] - b.dims[0]);
    let bottom = a.center[1].min(b.center[1]);
    let overlap_h = (bottom - top).max(0.0);
    if overlap_h == 0.0 {
        return Ok(0.0);
    }
    let inter = bev_intersection_area(a, b) * overlap_h;
    Ok(ratio(inter, a.volume(), b.volume()))
}

/// Axis-aligned IoU of two `(left, top, right, bottom)` image boxes.
pub fn iou_2d(a: &[f64; 4], b: &[f64; 4]) -> f64 {
    let iw = (a[2].min(b[2]) - a[0].max(b[0])).max(0.0);
    let ih = (a[3].min(b[3]) - a[1].max(b[1])).max(0.0);
    let inter = iw * ih;
    let area = |r: &[f64; 4]| (r[2] - r[0]).max(0.0) * (r[3] - r[1]).max(0.0);
    ratio(inter, area(a), area(b))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn car(x: f64, z: f64, yaw: f64) -> OrientedBox {
        OrientedBox::new([x, 1.6, z], [1.5, 1.6, 3.9], yaw)
    }

    #[test]
    fn identical_boxes() {
        let a = car(1.0, 20.0, 0.3);
        assert_eq!(bev_iou(&a, &a).unwrap(), 1.0);
        assert_eq!(iou_3d(&a, &a).unwrap(), 1.0);
    }

    #[test]
    fn disjoint_boxes() {
        let a = car(0.0, 20.0, 0.0);
        let b = car(10.0, 20.0, 1.0);
        assert_eq!(bev_iou(&a, &b).unwrap(), 0.0);
        assert_eq!(iou_3d(&a, &b).unwrap(), 0.0);
    }

    #[test]
    fn quarter_turn_closed_form() {
        let (w, l) = (1.6, 3.9);
        let a = OrientedBox::new([2.0, 1.0, 15.0], [1.5, w, l], 0.2);
        let b = OrientedBox::new([2.0, 1.0, 15.0], [1.5, w, l], 0.2 + PI / 2.0);
        let m: f64 = w.min(l);
        let expected = m * m / (2.0 * w * l - m * m);
        assert!((bev_iou(&a, &b).unwrap() - expected).abs() < 1e-9);
    }

    #[test]
    fn vertically_disjoint() {
        let a = car(0.0, 20.0, 0.0);
        let mut b = a;
        b.center[1] -= 2.0;
        assert!(bev_iou(&a, &b).unwrap() > 0.99);
        assert_eq!(iou_3d(&a, &b).unwrap(), 0.0);
    }

    #[test]
    fn degenerate_dims_rejected() {
        let a = car(0.0, 20.0, 0.0);
        let b = OrientedBox::new([0.0; 3], [1.0, 0.0, 1.0], 0.0);
        assert!(matches!(bev_iou(&a, &b), Err(Error::Usage(_))));
        assert!(iou_3d(&b, &a).is_err());
    }

    #[test]
    fn yaw_normalization() {
        let b = OrientedBox::new([0.0; 3], [1.0; 3], -PI);
        assert_eq!(b.normalized_yaw(), PI);
        let b = OrientedBox::new([0.0; 3], [1.0; 3], 3.0 * PI / 2.0);
        assert!((b.normalized_yaw() + PI / 2.0).abs() < 1e-12);
    }

    #[test]
    fn image_box_iou() {
        assert_eq!(iou_2d(&[0.0, 0.0, 2.0, 2.0], &[1.0, 0.0, 3.0, 2.0]), 1.0 / 3.0);
        assert_eq!(iou_2d(&[0.0, 0.0, 1.0, 1.0], &[2.0, 2.0, 3.0, 3.0]), 0.0);
    }
}
