//! Readers and writers for the on-disk formats: binary point records,
//! 16-bit depth images, calibration text and label/detection text.
//!
//! All readers are pure functions of their input; byte-level variants
//! (`decode_*`, `parse_*`, `format_*`) are exposed so callers can work on
//! buffers without touching the filesystem.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use image::{ImageBuffer, Luma};
use nalgebra::{Matrix3, Matrix3x4, Matrix4};

use crate::cloud::{Frame, PointCloud};
use crate::error::{Error, Result};
use crate::projection::DepthMap;

/// Size of one `(x, y, z, intensity)` record.
pub const POINT_RECORD_BYTES: usize = 16;

/// Intensity written for points without one; PseudoLiDAR has no reflectance.
pub const DEFAULT_INTENSITY: f32 = 1.0;

/// Default ratio between stored 16-bit depth values and meters.
pub const DEFAULT_DEPTH_DIVISOR: f64 = 256.0;

// ---------------------------------------------------------------------------
// Binary point clouds

pub fn decode_points(bytes: &[u8], frame: Frame) -> Result<PointCloud> {
    let rem = bytes.len() % POINT_RECORD_BYTES;
    if rem != 0 {
        return Err(Error::Format {
            offset: bytes.len() - rem,
            msg: format!(
                "trailing {rem} bytes do not form a {POINT_RECORD_BYTES}-byte record"
            ),
        });
    }
    let n = bytes.len() / POINT_RECORD_BYTES;
    let mut points = Vec::with_capacity(n);
    let mut intensity = Vec::with_capacity(n);
    for (i, rec) in bytes.chunks_exact(POINT_RECORD_BYTES).enumerate() {
        let mut v = [0f32; 4];
        for (k, word) in rec.chunks_exact(4).enumerate() {
            v[k] = f32::from_le_bytes(word.try_into().unwrap());
        }
        if !v.iter().all(|c| c.is_finite()) {
            return Err(Error::Data {
                index: i,
                msg: format!("non-finite value in record {v:?}"),
            });
        }
        points.push([v[0] as f64, v[1] as f64, v[2] as f64]);
        intensity.push(v[3]);
    }
    let mut cloud = PointCloud::new(points, frame);
    cloud.intensity = Some(intensity);
    Ok(cloud)
}

/// Encodes a cloud as little-endian `f32` quadruplets. Points without an
/// intensity channel get [`DEFAULT_INTENSITY`].
pub fn encode_points(cloud: &PointCloud) -> Result<Vec<u8>> {
    cloud.validate()?;
    let mut out = Vec::with_capacity(cloud.len() * POINT_RECORD_BYTES);
    for (i, p) in cloud.points.iter().enumerate() {
        let intensity = cloud
            .intensity
            .as_ref()
            .map_or(DEFAULT_INTENSITY, |v| v[i]);
        for c in p {
            let c = *c as f32;
            if !c.is_finite() {
                return Err(Error::Data {
                    index: i,
                    msg: "coordinate overflows f32".into(),
                });
            }
            out.extend_from_slice(&c.to_le_bytes());
        }
        out.extend_from_slice(&intensity.to_le_bytes());
    }
    Ok(out)
}

pub fn read_point_bin(path: impl AsRef<Path>, frame: Frame) -> Result<PointCloud> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::from(e).at(path))?;
    decode_points(&bytes, frame).map_err(|e| e.at(path))
}

pub fn write_point_bin(cloud: &PointCloud, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_points(cloud).map_err(|e| e.at(path))?;
    fs::write(path, bytes).map_err(|e| Error::from(e).at(path))
}

// ---------------------------------------------------------------------------
// Depth images

/// Reads a single-channel 16-bit depth image. Stored zeros are invalid pixels.
pub fn read_depth_png(path: impl AsRef<Path>, scale_divisor: f64) -> Result<DepthMap> {
    let path = path.as_ref();
    if !(scale_divisor > 0.0) {
        return Err(Error::usage("depth divisor must be positive"));
    }
    let img = image::ImageReader::open(path)
        .map_err(|e| Error::from(e).at(path))?
        .with_guessed_format()
        .map_err(|e| Error::from(e).at(path))?
        .decode()
        .map_err(|e| Error::from(e).at(path))?;
    let image::DynamicImage::ImageLuma16(buf) = img else {
        return Err(Error::Format {
            offset: 0,
            msg: format!(
                "expected single-channel 16-bit image, found {:?}",
                img.color()
            ),
        }
        .at(path));
    };
    Ok(depth_from_raw(
        buf.width() as usize,
        buf.height() as usize,
        buf.as_raw(),
        scale_divisor,
    ))
}

pub fn depth_from_raw(width: usize, height: usize, raw: &[u16], scale_divisor: f64) -> DepthMap {
    let depth = raw.iter().map(|&v| v as f64 / scale_divisor).collect();
    let valid = raw.iter().map(|&v| v != 0).collect();
    DepthMap {
        width,
        height,
        depth,
        valid,
    }
}

/// Inverse of [`depth_from_raw`]. Depths are rounded to the nearest stored
/// step; valid pixels never encode to the zero sentinel.
pub fn depth_to_raw(depth: &DepthMap, scale_divisor: f64) -> Vec<u16> {
    depth
        .depth
        .iter()
        .zip(&depth.valid)
        .map(|(&d, &ok)| {
            if ok {
                (d * scale_divisor).round().clamp(1.0, u16::MAX as f64) as u16
            } else {
                0
            }
        })
        .collect()
}

pub fn write_depth_png(depth: &DepthMap, path: impl AsRef<Path>, scale_divisor: f64) -> Result<()> {
    let path = path.as_ref();
    let raw = depth_to_raw(depth, scale_divisor);
    let buf: ImageBuffer<Luma<u16>, Vec<u16>> =
        ImageBuffer::from_raw(depth.width as u32, depth.height as u32, raw)
            .ok_or_else(|| Error::usage("depth grid size does not match its dimensions"))?;
    buf.save_with_format(path, image::ImageFormat::Png)
        .map_err(|e| Error::from(e).at(path))
}

// ---------------------------------------------------------------------------
// Calibration

const PROJECTION_KEYS: &[&str] = &["P2", "P_rect_02"];
const RECT_KEYS: &[&str] = &["R0_rect", "R_rect", "R_rect_00"];
const SENSOR_KEYS: &[&str] = &["Tr_velo_to_cam", "Tr_velo_cam"];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CalibWarning {
    /// No rectification rotation in the file; identity was used.
    MissingRectRotation,
    /// No sensor-to-camera transform in the file; identity was used.
    MissingSensorToCamera,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CameraCalib {
    /// Projection of the rectified camera, 3x4.
    pub projection: Matrix3x4<f64>,
    pub rect_rotation: Matrix3<f64>,
    /// Rigid transform from the range sensor into the (unrectified) camera.
    pub sensor_to_camera: Matrix3x4<f64>,
    pub warnings: Vec<CalibWarning>,
}

impl CameraCalib {
    /// A calibration with only pinhole intrinsics; the other transforms are
    /// identity.
    pub fn from_intrinsics(fx: f64, fy: f64, cx: f64, cy: f64) -> Self {
        #[rustfmt::skip]
        let projection = Matrix3x4::new(
            fx, 0.0, cx, 0.0,
            0.0, fy, cy, 0.0,
            0.0, 0.0, 1.0, 0.0,
        );
        CameraCalib {
            projection,
            rect_rotation: Matrix3::identity(),
            sensor_to_camera: Matrix3x4::identity(),
            warnings: Vec::new(),
        }
    }

    pub fn fx(&self) -> f64 {
        self.projection[(0, 0)]
    }

    pub fn fy(&self) -> f64 {
        self.projection[(1, 1)]
    }

    pub fn cx(&self) -> f64 {
        self.projection[(0, 2)]
    }

    pub fn cy(&self) -> f64 {
        self.projection[(1, 2)]
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fx() > 0.0 && self.fy() > 0.0) {
            return Err(Error::config(format!(
                "focal lengths must be positive (fx={}, fy={})",
                self.fx(),
                self.fy()
            )));
        }
        let r = &self.rect_rotation;
        let err = (r * r.transpose() - Matrix3::identity()).abs().max();
        if !(err <= 1e-6) {
            return Err(Error::config(format!(
                "rectification rotation is not orthonormal (deviation {err:e})"
            )));
        }
        Ok(())
    }

    /// Homogeneous transform taking sensor-frame points into the rectified
    /// camera frame.
    pub fn sensor_to_rect(&self) -> Matrix4<f64> {
        let mut rect = Matrix4::identity();
        rect.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.rect_rotation);
        let mut rigid = Matrix4::identity();
        rigid.fixed_view_mut::<3, 4>(0, 0).copy_from(&self.sensor_to_camera);
        rect * rigid
    }
}

pub fn parse_calib(text: &str) -> Result<CameraCalib> {
    let mut projection = None;
    let mut rect = None;
    let mut sensor = None;
    for (lineno, line) in text.lines().enumerate() {
        let line_no = lineno + 1;
        let Some((key, rest)) = line.split_once(':') else {
            continue;
        };
        let key = key.trim();
        let slot = if PROJECTION_KEYS.contains(&key) {
            &mut projection
        } else if RECT_KEYS.contains(&key) {
            &mut rect
        } else if SENSOR_KEYS.contains(&key) {
            &mut sensor
        } else {
            continue;
        };
        let values = rest
            .split_whitespace()
            .map(|tok| {
                tok.parse::<f64>().map_err(|_| Error::Parse {
                    line: line_no,
                    msg: format!("malformed number {tok:?} for key {key}"),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        // Later occurrences of a key replace earlier ones.
        *slot = Some((line_no, key.to_string(), values));
    }

    let expect = |entry: &(usize, String, Vec<f64>), n: usize| -> Result<()> {
        let (line, key, values) = entry;
        if values.len() != n {
            return Err(Error::Parse {
                line: *line,
                msg: format!("{key} needs {n} values, found {}", values.len()),
            });
        }
        Ok(())
    };

    let Some(projection) = projection else {
        return Err(Error::Parse {
            line: 0,
            msg: format!("no projection matrix (one of {PROJECTION_KEYS:?})"),
        });
    };
    expect(&projection, 12)?;
    let mut calib = CameraCalib {
        projection: Matrix3x4::from_row_slice(&projection.2),
        rect_rotation: Matrix3::identity(),
        sensor_to_camera: Matrix3x4::identity(),
        warnings: Vec::new(),
    };
    match rect {
        Some(entry) => {
            expect(&entry, 9)?;
            calib.rect_rotation = Matrix3::from_row_slice(&entry.2);
        }
        None => {
            log::warn!("calibration has no rectification rotation; using identity");
            calib.warnings.push(CalibWarning::MissingRectRotation);
        }
    }
    match sensor {
        Some(entry) => {
            expect(&entry, 12)?;
            calib.sensor_to_camera = Matrix3x4::from_row_slice(&entry.2);
        }
        None => {
            log::warn!("calibration has no sensor-to-camera transform; using identity");
            calib.warnings.push(CalibWarning::MissingSensorToCamera);
        }
    }
    calib.validate()?;
    Ok(calib)
}

pub fn read_calib(path: impl AsRef<Path>) -> Result<CameraCalib> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::from(e).at(path))?;
    parse_calib(&text).map_err(|e| e.at(path))
}

pub fn format_calib(calib: &CameraCalib) -> String {
    fn row(out: &mut String, key: &str, values: impl Iterator<Item = f64>) {
        out.push_str(key);
        out.push(':');
        for v in values {
            write!(out, " {v:e}").unwrap();
        }
        out.push('\n');
    }
    let mut out = String::new();
    row(&mut out, "P2", calib.projection.transpose().iter().copied());
    row(&mut out, "R0_rect", calib.rect_rotation.transpose().iter().copied());
    row(
        &mut out,
        "Tr_velo_to_cam",
        calib.sensor_to_camera.transpose().iter().copied(),
    );
    out
}

pub fn write_calib(calib: &CameraCalib, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, format_calib(calib)).map_err(|e| Error::from(e).at(path))
}

// ---------------------------------------------------------------------------
// Labels and detections

pub const DONT_CARE: &str = "DontCare";

#[derive(Clone, Debug, PartialEq)]
pub struct LabelRecord {
    pub class_name: String,
    pub truncation: f64,
    pub occlusion: i32,
    pub alpha: f64,
    /// `(left, top, right, bottom)` in pixels.
    pub bbox2d: [f64; 4],
    /// `(h, w, l)` in meters.
    pub dims: [f64; 3],
    /// Bottom-center of the box in the rectified camera frame.
    pub location: [f64; 3],
    pub yaw: f64,
    pub score: Option<f64>,
}

impl LabelRecord {
    pub fn is_dont_care(&self) -> bool {
        self.class_name == DONT_CARE
    }

    pub fn bbox_height(&self) -> f64 {
        self.bbox2d[3] - self.bbox2d[1]
    }

    pub fn validate(&self) -> Result<()> {
        let [l, t, r, b] = self.bbox2d;
        if !(r > l && b > t) {
            return Err(Error::usage(format!("degenerate 2D box {:?}", self.bbox2d)));
        }
        if !self.is_dont_care() && !self.dims.iter().all(|&d| d > 0.0) {
            return Err(Error::usage(format!("non-positive dimensions {:?}", self.dims)));
        }
        Ok(())
    }
}

pub fn parse_label_line(line: &str, line_no: usize) -> Result<LabelRecord> {
    let fields: Vec<&str> = line.split_whitespace().collect();
    if fields.len() != 15 && fields.len() != 16 {
        return Err(Error::Parse {
            line: line_no,
            msg: format!("expected 15 or 16 fields, found {}", fields.len()),
        });
    }
    let num = |i: usize| -> Result<f64> {
        fields[i].parse::<f64>().map_err(|_| Error::Parse {
            line: line_no,
            msg: format!("field {} is not a number: {:?}", i + 1, fields[i]),
        })
    };
    let occlusion = fields[2].parse::<i32>().map_err(|_| Error::Parse {
        line: line_no,
        msg: format!("occlusion is not an integer: {:?}", fields[2]),
    })?;
    Ok(LabelRecord {
        class_name: fields[0].to_string(),
        truncation: num(1)?,
        occlusion,
        alpha: num(3)?,
        bbox2d: [num(4)?, num(5)?, num(6)?, num(7)?],
        dims: [num(8)?, num(9)?, num(10)?],
        location: [num(11)?, num(12)?, num(13)?],
        yaw: num(14)?,
        score: if fields.len() == 16 { Some(num(15)?) } else { None },
    })
}

pub fn parse_labels(text: &str) -> Result<Vec<LabelRecord>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| parse_label_line(l, i + 1))
        .collect()
}

pub fn format_label(rec: &LabelRecord) -> String {
    let mut s = format!(
        "{} {:.2} {} {:.2} {:.2} {:.2} {:.2} {:.2} {:.2} {:.2} {:.2} {:.2} {:.2} {:.2} {:.2}",
        rec.class_name,
        rec.truncation,
        rec.occlusion,
        rec.alpha,
        rec.bbox2d[0],
        rec.bbox2d[1],
        rec.bbox2d[2],
        rec.bbox2d[3],
        rec.dims[0],
        rec.dims[1],
        rec.dims[2],
        rec.location[0],
        rec.location[1],
        rec.location[2],
        rec.yaw,
    );
    if let Some(score) = rec.score {
        write!(s, " {score:.4}").unwrap();
    }
    s
}

pub fn format_labels(records: &[LabelRecord]) -> String {
    records.iter().map(|r| format_label(r) + "\n").collect()
}

pub fn read_labels(path: impl AsRef<Path>) -> Result<Vec<LabelRecord>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::from(e).at(path))?;
    parse_labels(&text).map_err(|e| e.at(path))
}

pub fn write_labels(records: &[LabelRecord], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, format_labels(records)).map_err(|e| Error::from(e).at(path))
}
