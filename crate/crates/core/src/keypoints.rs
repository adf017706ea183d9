//! Points-of-interest selection.
//!
//! A forward-difference image is searched for scale-normalised
//! Laplacian-of-Gaussian extrema, the resulting pixels are lifted to 3D with
//! the depth map, and keypoints closer than a radius in 3D are suppressed
//! greedily, strongest first.

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kitti_io::CameraCalib;
use crate::projection::{backproject_pixel, DepthMap};

/// Geometric ladder with ratio √2 starting at 1.6 px.
pub const DEFAULT_SIGMAS: [f64; 5] = [1.6, 2.26, 3.2, 4.53, 6.4];
pub const DEFAULT_STEP: usize = 2;
/// Responses below this are never keypoints, whatever the threshold mode.
pub const RESPONSE_FLOOR: f64 = 1e-6;

/// Row-major single-channel image.
#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl Image {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::usage(format!(
                "{} values for a {width}x{height} image",
                data.len()
            )));
        }
        Ok(Image {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        Image {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    #[inline]
    pub fn at(&self, u: usize, v: usize) -> f64 {
        self.data[v * self.width + u]
    }

    /// Depth in meters as intensity; invalid pixels read as zero.
    pub fn from_depth(depth: &DepthMap) -> Self {
        let data = depth
            .depth
            .iter()
            .zip(&depth.valid)
            .map(|(&d, &ok)| if ok { d } else { 0.0 })
            .collect();
        Image {
            width: depth.width,
            height: depth.height,
            data,
        }
    }

    /// Luma from interleaved 8-bit RGB.
    pub fn from_rgb8(width: usize, height: usize, rgb: &[u8]) -> Result<Self> {
        if rgb.len() != 3 * width * height {
            return Err(Error::usage("RGB buffer size does not match dimensions"));
        }
        let data = rgb
            .chunks_exact(3)
            .map(|p| luma(p[0] as f64, p[1] as f64, p[2] as f64))
            .collect();
        Ok(Image {
            width,
            height,
            data,
        })
    }
}

#[inline]
pub fn luma(r: f64, g: f64, b: f64) -> f64 {
    0.299 * r + 0.587 * g + 0.114 * b
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DifferenceAxis {
    #[default]
    Horizontal,
    Vertical,
    /// Horizontal and vertical responses merged by magnitude.
    Both,
}

impl DifferenceAxis {
    /// Shift from difference-image coordinates to the source pixel a
    /// keypoint is attributed to.
    pub fn pixel_offset(self, step: usize) -> (usize, usize) {
        match self {
            DifferenceAxis::Horizontal => (step / 2, 0),
            DifferenceAxis::Vertical => (0, step / 2),
            DifferenceAxis::Both => (step / 2, step / 2),
        }
    }
}

/// `out(u, v) = image(u + step, v) − image(u, v)`, or the vertical analogue.
pub fn forward_difference(image: &Image, step: usize, axis: DifferenceAxis) -> Result<Image> {
    if step == 0 {
        return Err(Error::usage("forward-difference step must be at least 1"));
    }
    match axis {
        DifferenceAxis::Horizontal => {
            if step >= image.width {
                return Err(Error::usage(format!(
                    "step {step} does not fit image width {}",
                    image.width
                )));
            }
            let w = image.width - step;
            let mut data = Vec::with_capacity(w * image.height);
            for row in image.data.chunks_exact(image.width) {
                data.extend((0..w).map(|u| row[u + step] - row[u]));
            }
            Image::new(w, image.height, data)
        }
        DifferenceAxis::Vertical => {
            if step >= image.height {
                return Err(Error::usage(format!(
                    "step {step} does not fit image height {}",
                    image.height
                )));
            }
            let w = image.width;
            let h = image.height - step;
            let data = (0..w * h)
                .map(|i| image.data[i + step * w] - image.data[i])
                .collect();
            Image::new(w, h, data)
        }
        DifferenceAxis::Both => Err(Error::usage(
            "a single difference image is either horizontal or vertical",
        )),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Keypoint {
    pub u: usize,
    pub v: usize,
    pub sigma: f64,
    /// Magnitude of the scale-normalised LoG response.
    pub response: f64,
    pub point3d: Option<[f64; 3]>,
}

/// Ordering used everywhere keypoints are ranked: strongest first, then
/// row-major pixel order, then smaller scale.
pub fn rank_order(a: &Keypoint, b: &Keypoint) -> Ordering {
    b.response
        .total_cmp(&a.response)
        .then(a.v.cmp(&b.v))
        .then(a.u.cmp(&b.u))
        .then(a.sigma.total_cmp(&b.sigma))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Threshold {
    Absolute(f64),
    /// `mean + k·stddev` of all response magnitudes in the scale space.
    Adaptive(f64),
}

impl Default for Threshold {
    fn default() -> Self {
        Threshold::Adaptive(2.0)
    }
}

/// Scale-normalised LoG responses, one layer per sigma.
#[derive(Clone, Debug)]
pub struct ScaleSpace {
    pub width: usize,
    pub height: usize,
    pub sigmas: Vec<f64>,
    pub layers: Vec<Vec<f64>>,
}

fn gaussian_kernels(sigma: f64) -> (Vec<f64>, Vec<f64>) {
    let radius = (4.0 * sigma).ceil() as i64;
    let xs: Vec<f64> = (-radius..=radius).map(|x| x as f64).collect();
    let s2 = sigma * sigma;
    let mut g: Vec<f64> = xs.iter().map(|x| (-x * x / (2.0 * s2)).exp()).collect();
    let sum: f64 = g.iter().sum();
    g.iter_mut().for_each(|v| *v /= sum);
    let mut gxx: Vec<f64> = xs
        .iter()
        .zip(&g)
        .map(|(x, gv)| (x * x - s2) / (s2 * s2) * gv)
        .collect();
    // Exact zero sum (flat input gives no response) and unit second moment
    // (a quadratic x² differentiates to 2).
    let mean = gxx.iter().sum::<f64>() / gxx.len() as f64;
    gxx.iter_mut().for_each(|v| *v -= mean);
    let moment: f64 = xs.iter().zip(&gxx).map(|(x, k)| x * x * k).sum();
    gxx.iter_mut().for_each(|v| *v *= 2.0 / moment);
    (g, gxx)
}

fn convolve_rows(src: &[f64], w: usize, h: usize, kernel: &[f64]) -> Vec<f64> {
    let r = (kernel.len() / 2) as isize;
    let mut out = vec![0.0; w * h];
    out.par_chunks_mut(w).enumerate().for_each(|(v, row_out)| {
        let row = &src[v * w..(v + 1) * w];
        for (u, o) in row_out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (k, kv) in kernel.iter().enumerate() {
                let x = (u as isize + k as isize - r).clamp(0, w as isize - 1) as usize;
                acc += kv * row[x];
            }
            *o = acc;
        }
    });
    out
}

fn convolve_cols(src: &[f64], w: usize, h: usize, kernel: &[f64]) -> Vec<f64> {
    let r = (kernel.len() / 2) as isize;
    let mut out = vec![0.0; w * h];
    out.par_chunks_mut(w).enumerate().for_each(|(v, row_out)| {
        for (k, kv) in kernel.iter().enumerate() {
            let y = (v as isize + k as isize - r).clamp(0, h as isize - 1) as usize;
            let row = &src[y * w..(y + 1) * w];
            for (o, s) in row_out.iter_mut().zip(row) {
                *o += kv * s;
            }
        }
    });
    out
}

/// `σ²·∇²G_σ ∗ image` with replicated borders.
pub fn log_response(image: &Image, sigma: f64) -> Vec<f64> {
    let (w, h) = (image.width, image.height);
    let (g, gxx) = gaussian_kernels(sigma);
    let smooth_x = convolve_rows(&image.data, w, h, &g);
    let curve_x = convolve_rows(&image.data, w, h, &gxx);
    let dyy = convolve_cols(&smooth_x, w, h, &gxx);
    let dxx = convolve_cols(&curve_x, w, h, &g);
    let s2 = sigma * sigma;
    dxx.iter().zip(&dyy).map(|(a, b)| s2 * (a + b)).collect()
}

impl ScaleSpace {
    pub fn build(image: &Image, sigmas: &[f64]) -> Result<Self> {
        if sigmas.is_empty() {
            return Err(Error::usage("at least one sigma is required"));
        }
        if sigmas.iter().any(|s| !(*s > 0.0)) || sigmas.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::usage("sigmas must be positive and strictly ascending"));
        }
        let layers = sigmas.par_iter().map(|&s| log_response(image, s)).collect();
        Ok(ScaleSpace {
            width: image.width,
            height: image.height,
            sigmas: sigmas.to_vec(),
            layers,
        })
    }

    /// Keeps the top-left `width`×`height` window.
    pub fn crop(&self, width: usize, height: usize) -> ScaleSpace {
        let layers = self
            .layers
            .iter()
            .map(|l| {
                (0..height)
                    .flat_map(|v| l[v * self.width..v * self.width + width].iter().copied())
                    .collect()
            })
            .collect();
        ScaleSpace {
            width,
            height,
            sigmas: self.sigmas.clone(),
            layers,
        }
    }

    /// Per-sample response of larger magnitude. Both spaces must share
    /// dimensions and sigmas.
    pub fn merge_max(&self, other: &ScaleSpace) -> Result<ScaleSpace> {
        if self.width != other.width || self.height != other.height || self.sigmas != other.sigmas {
            return Err(Error::usage("scale spaces differ in shape"));
        }
        let layers = self
            .layers
            .iter()
            .zip(&other.layers)
            .map(|(a, b)| {
                a.iter()
                    .zip(b)
                    .map(|(&x, &y)| if y.abs() > x.abs() { y } else { x })
                    .collect()
            })
            .collect();
        Ok(ScaleSpace {
            width: self.width,
            height: self.height,
            sigmas: self.sigmas.clone(),
            layers,
        })
    }

    pub fn resolve_threshold(&self, threshold: Threshold) -> f64 {
        let t = match threshold {
            Threshold::Absolute(t) => t,
            Threshold::Adaptive(k) => {
                let n = self.layers.iter().map(Vec::len).sum::<usize>() as f64;
                let (mut sum, mut sum2) = (0.0, 0.0);
                for v in self.layers.iter().flatten() {
                    let a = v.abs();
                    sum += a;
                    sum2 += a * a;
                }
                let mean = sum / n;
                let var = (sum2 / n - mean * mean).max(0.0);
                mean + k * var.sqrt()
            }
        };
        t.max(RESPONSE_FLOOR)
    }

    /// Local maxima of |response| over the 3×3 neighbourhood in space and the
    /// adjacent scales. Equal neighbours are resolved in favour of the one
    /// that comes first in (scale, row, column) order, so plateaus yield a
    /// single keypoint. The one-pixel image border is never a candidate.
    pub fn extrema(&self, threshold: Threshold) -> Vec<Keypoint> {
        let t = self.resolve_threshold(threshold);
        let (w, h) = (self.width, self.height);
        if w < 3 || h < 3 {
            return Vec::new();
        }
        let n_layers = self.layers.len();
        let mut found: Vec<Keypoint> = (0..n_layers)
            .into_par_iter()
            .flat_map_iter(|k| {
                let lo = k.saturating_sub(1);
                let hi = (k + 1).min(n_layers - 1);
                let layer = &self.layers[k];
                let mut out = Vec::new();
                for v in 1..h - 1 {
                    for u in 1..w - 1 {
                        let m = layer[v * w + u].abs();
                        if m < t {
                            continue;
                        }
                        let mut is_peak = true;
                        'scan: for kk in lo..=hi {
                            let other = &self.layers[kk];
                            for vv in v - 1..=v + 1 {
                                for uu in u - 1..=u + 1 {
                                    if kk == k && vv == v && uu == u {
                                        continue;
                                    }
                                    let n = other[vv * w + uu].abs();
                                    let earlier = (kk, vv, uu) < (k, v, u);
                                    if n > m || (earlier && n == m) {
                                        is_peak = false;
                                        break 'scan;
                                    }
                                }
                            }
                        }
                        if is_peak {
                            out.push(Keypoint {
                                u,
                                v,
                                sigma: self.sigmas[k],
                                response: m,
                                point3d: None,
                            });
                        }
                    }
                }
                out
            })
            .collect();
        found.sort_by(rank_order);
        found
    }
}

/// Scale-space LoG extrema of `image`, strongest first.
pub fn log_extrema(image: &Image, sigmas: &[f64], threshold: Threshold) -> Result<Vec<Keypoint>> {
    if let Threshold::Absolute(t) = threshold {
        if !(t > 0.0) {
            return Err(Error::usage("threshold must be positive"));
        }
    }
    Ok(ScaleSpace::build(image, sigmas)?.extrema(threshold))
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Lifted {
    pub keypoints: Vec<Keypoint>,
    /// Keypoints that landed on invalid depth.
    pub dropped: usize,
}

/// Attaches a 3D point to each keypoint, reading depth at the keypoint pixel
/// shifted by `offset`.
pub fn lift_to_3d(
    keypoints: &[Keypoint],
    depth: &DepthMap,
    calib: &CameraCalib,
    offset: (usize, usize),
) -> Result<Lifted> {
    let mut out = Lifted::default();
    for kp in keypoints {
        let (u, v) = (kp.u + offset.0, kp.v + offset.1);
        if u >= depth.width || v >= depth.height {
            return Err(Error::usage(format!(
                "keypoint ({u}, {v}) outside {}x{} depth map",
                depth.width, depth.height
            )));
        }
        match depth.get(u, v) {
            Some(z) => out.keypoints.push(Keypoint {
                point3d: Some(backproject_pixel(u as f64, v as f64, z, calib)),
                ..kp.clone()
            }),
            None => out.dropped += 1,
        }
    }
    Ok(out)
}

/// Greedy 3D non-maximum suppression: walking keypoints strongest first, a
/// keypoint is kept unless an already kept one lies within `radius`.
pub fn suppress_3d(keypoints: &[Keypoint], radius: f64) -> Result<Vec<Keypoint>> {
    if !(radius > 0.0) {
        return Err(Error::usage("suppression radius must be positive"));
    }
    let mut order: Vec<&Keypoint> = keypoints.iter().collect();
    order.sort_by(|a, b| rank_order(a, b));
    let r2 = radius * radius;
    // Hash grid with cells a hair wider than the radius, so every neighbour
    // within the radius sits in one of the 27 surrounding cells.
    let cell_size = radius * (1.0 + 1e-9);
    let mut grid: std::collections::HashMap<[i64; 3], Vec<usize>> = Default::default();
    let cell = |p: &[f64; 3]| p.map(|c| (c / cell_size).floor() as i64);
    let mut kept: Vec<Keypoint> = Vec::new();
    for kp in order {
        let p = kp
            .point3d
            .ok_or_else(|| Error::usage("suppress_3d needs lifted keypoints"))?;
        let c = cell(&p);
        let mut clear = true;
        'outer: for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    if let Some(ids) = grid.get(&[c[0] + dx, c[1] + dy, c[2] + dz]) {
                        for &j in ids {
                            let q = kept[j].point3d.unwrap();
                            if crate::cloud::dist2(&p, &q) <= r2 {
                                clear = false;
                                break 'outer;
                            }
                        }
                    }
                }
            }
        }
        if clear {
            grid.entry(c).or_default().push(kept.len());
            kept.push(kp.clone());
        }
    }
    Ok(kept)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PoisConfig {
    pub step: usize,
    pub axis: DifferenceAxis,
    pub sigmas: Vec<f64>,
    pub threshold: Threshold,
    /// Radius of the 3D keypoint suppression, meters.
    pub suppress_radius: f64,
}

impl Default for PoisConfig {
    fn default() -> Self {
        PoisConfig {
            step: DEFAULT_STEP,
            axis: DifferenceAxis::Horizontal,
            sigmas: DEFAULT_SIGMAS.to_vec(),
            threshold: Threshold::default(),
            suppress_radius: 0.5,
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct PoisOutput {
    pub detected: usize,
    pub dropped_invalid_depth: usize,
    pub lifted: usize,
    pub kept: Vec<Keypoint>,
}

/// Runs the full selection: difference image, LoG extrema, lifting and
/// suppression.
pub fn select_points_of_interest(
    image: &Image,
    depth: &DepthMap,
    calib: &CameraCalib,
    cfg: &PoisConfig,
) -> Result<PoisOutput> {
    if image.width != depth.width || image.height != depth.height {
        return Err(Error::usage("image and depth map differ in size"));
    }
    let space = match cfg.axis {
        DifferenceAxis::Both => {
            let h = forward_difference(image, cfg.step, DifferenceAxis::Horizontal)?;
            let v = forward_difference(image, cfg.step, DifferenceAxis::Vertical)?;
            let (w, hh) = (h.width, v.height);
            ScaleSpace::build(&h, &cfg.sigmas)?
                .crop(w, hh)
                .merge_max(&ScaleSpace::build(&v, &cfg.sigmas)?.crop(w, hh))?
        }
        axis => ScaleSpace::build(&forward_difference(image, cfg.step, axis)?, &cfg.sigmas)?,
    };
    if let Threshold::Absolute(t) = cfg.threshold {
        if !(t > 0.0) {
            return Err(Error::usage("threshold must be positive"));
        }
    }
    let detected = space.extrema(cfg.threshold);
    let lifted = lift_to_3d(&detected, depth, calib, cfg.axis.pixel_offset(cfg.step))?;
    let kept = suppress_3d(&lifted.keypoints, cfg.suppress_radius)?;
    Ok(PoisOutput {
        detected: detected.len(),
        dropped_invalid_depth: lifted.dropped,
        lifted: lifted.keypoints.len(),
        kept,
    })
}

/// One keypoint per line: `u v sigma response x y z`, pixel coordinates in
/// the source image. Coordinates use shortest round-trip formatting.
pub fn format_keypoints(keypoints: &[Keypoint], offset: (usize, usize)) -> String {
    let mut out = String::new();
    for kp in keypoints {
        let p = kp.point3d.unwrap_or([f64::NAN; 3]);
        out.push_str(&format!(
            "{} {} {} {} {} {} {}\n",
            kp.u + offset.0,
            kp.v + offset.1,
            kp.sigma,
            kp.response,
            p[0],
            p[1],
            p[2]
        ));
    }
    out
}

/// Reads the 3D anchors back from [`format_keypoints`] output.
pub fn parse_keypoint_anchors(text: &str) -> Result<Vec<[f64; 3]>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let f: Vec<&str> = l.split_whitespace().collect();
            if f.len() != 7 {
                return Err(Error::Parse {
                    line: i + 1,
                    msg: format!("expected 7 fields, found {}", f.len()),
                });
            }
            let mut p = [0.0; 3];
            for (k, tok) in f[4..].iter().enumerate() {
                p[k] = tok.parse().map_err(|_| Error::Parse {
                    line: i + 1,
                    msg: format!("malformed coordinate {tok:?}"),
                })?;
            }
            Ok(p)
        })
        .collect()
}
