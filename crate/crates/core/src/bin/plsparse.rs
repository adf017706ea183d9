use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use plsparse::eval3d::{self, EvalConfig};
use plsparse::foreground::{self, SeparationConfig};
use plsparse::keypoints::{self, DifferenceAxis, Image, Threshold};
use plsparse::kitti_io;
use plsparse::pipeline::{self, frame_seed, PipelineConfig, Scheme};
use plsparse::projection::{self, RangeCropConfig};
use plsparse::sampler::{self, RangeMode, StratifyConfig};
use plsparse::{Error, Frame, Tag};

/// Sparsify pseudo-LiDAR point clouds and evaluate 3D detections.
#[derive(Parser)]
#[command(name = "plsparse", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Back-project a depth image into a camera-frame point cloud.
    Project(ProjectArgs),
    /// Detect, lift and suppress points of interest; writes one keypoint per line.
    Keypoints(KeypointArgs),
    /// Tag points near keypoint anchors as foreground and blend in a background sample.
    Separate(SeparateArgs),
    /// Distance-stratified sampling of a point cloud.
    Dss(DssArgs),
    /// Unsupervised chain over a batch of frames.
    SparsifyUnsup(RunArgs),
    /// Region-supervised chain over a batch of frames.
    SparsifySup(RunArgs),
    /// Average precision of detection labels against ground-truth labels.
    Eval(EvalArgs),
    /// Per-frame point counts at every stage.
    Stats(StatsArgs),
}

#[derive(Args)]
struct ProjectArgs {
    /// 16-bit depth PNG.
    #[arg(long)]
    depth: PathBuf,
    /// Calibration text file.
    #[arg(long)]
    calib: PathBuf,
    /// Output point file.
    #[arg(long)]
    out: PathBuf,
    /// Stored depth value per meter.
    #[arg(long, default_value_t = 256.0)]
    divisor: f64,
    /// Keep every valid pixel instead of applying the default range crop.
    #[arg(long)]
    no_crop: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum AxisArg {
    Horizontal,
    Vertical,
    Both,
}

#[derive(Args)]
struct KeypointArgs {
    #[arg(long)]
    depth: PathBuf,
    #[arg(long)]
    calib: PathBuf,
    /// Intensity image; the depth image is used when omitted.
    #[arg(long)]
    image: Option<PathBuf>,
    /// Output text file (`u v sigma response x y z` per line).
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 256.0)]
    divisor: f64,
    /// Forward-difference step in pixels.
    #[arg(long)]
    step: Option<usize>,
    #[arg(long, value_enum)]
    axis: Option<AxisArg>,
    /// Comma-separated, ascending.
    #[arg(long, value_delimiter = ',')]
    sigmas: Option<Vec<f64>>,
    /// Absolute response threshold; the adaptive threshold is used otherwise.
    #[arg(long)]
    threshold: Option<f64>,
    /// Multiplier of the standard deviation in the adaptive threshold.
    #[arg(long, conflicts_with = "threshold")]
    adaptive_k: Option<f64>,
    /// 3D suppression radius in meters.
    #[arg(long)]
    suppress_radius: Option<f64>,
}

#[derive(Args)]
struct SeedArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Derive the seed from `--seed` and this frame id, as batch runs do.
    #[arg(long)]
    frame_id: Option<String>,
}

impl SeedArgs {
    fn resolve(&self) -> u64 {
        match &self.frame_id {
            Some(id) => frame_seed(self.seed, id),
            None => self.seed,
        }
    }
}

#[derive(Args)]
struct SeparateArgs {
    /// Input point file.
    #[arg(long)]
    cloud: PathBuf,
    /// Keypoint text from the `keypoints` verb.
    #[arg(long)]
    keypoints: PathBuf,
    /// Output point file: every foreground point, then the background sample.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    fg_radius: Option<f64>,
    #[arg(long)]
    bg_keep_ratio: Option<f64>,
    #[command(flatten)]
    seed: SeedArgs,
    /// Write one tag per output point (1 foreground, 0 background).
    #[arg(long)]
    tags: Option<PathBuf>,
    /// Encode the tag in the intensity channel (1.0 foreground, 0.0 background).
    #[arg(long)]
    tag_intensity: bool,
    /// Frame of the input cloud.
    #[arg(long, value_enum, default_value = "camera")]
    frame: FrameArg,
}

#[derive(Clone, Copy, ValueEnum)]
enum FrameArg {
    Camera,
    Sensor,
}

impl From<FrameArg> for Frame {
    fn from(f: FrameArg) -> Self {
        match f {
            FrameArg::Camera => Frame::CameraRect,
            FrameArg::Sensor => Frame::Sensor,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum RangeArg {
    Euclidean,
    Depth,
}

#[derive(Args)]
struct DssArgs {
    #[arg(long)]
    cloud: PathBuf,
    /// Output point file, or output directory with `--sweep`.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    bin_width: Option<f64>,
    #[arg(long)]
    max_range: Option<f64>,
    #[arg(long)]
    rate: Option<f64>,
    #[arg(long)]
    min_keep: Option<usize>,
    #[arg(long, value_enum)]
    range_mode: Option<RangeArg>,
    #[command(flatten)]
    seed: SeedArgs,
    /// Comma-separated rates; writes `<stem>_r<rate>.bin` per rate into `--out`.
    #[arg(long, value_delimiter = ',')]
    sweep: Option<Vec<f64>>,
    #[arg(long, value_enum, default_value = "camera")]
    frame: FrameArg,
}

#[derive(Args)]
struct RunArgs {
    /// TOML config; defaults apply to anything it omits.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated frame ids.
    #[arg(long, value_delimiter = ',')]
    frames: Option<Vec<String>>,
    #[arg(long)]
    depth_dir: Option<PathBuf>,
    #[arg(long)]
    calib_dir: Option<PathBuf>,
    #[arg(long)]
    image_dir: Option<PathBuf>,
    /// Label-format 2D regions, one file per frame.
    #[arg(long)]
    regions_dir: Option<PathBuf>,
    /// Single-channel region masks, one PNG per frame.
    #[arg(long)]
    masks_dir: Option<PathBuf>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Write outputs in the range-sensor frame.
    #[arg(long)]
    sensor_frame: bool,
    #[arg(long)]
    suppress_radius: Option<f64>,
    #[arg(long)]
    fg_radius: Option<f64>,
    #[arg(long)]
    bg_keep_ratio: Option<f64>,
    #[arg(long)]
    rate: Option<f64>,
    #[arg(long)]
    bin_width: Option<f64>,
    #[arg(long)]
    max_range: Option<f64>,
    #[arg(long)]
    min_keep: Option<usize>,
    #[arg(long)]
    dilate_px: Option<usize>,
    #[arg(long)]
    score_floor: Option<f64>,
    /// Also write the report as JSON to this path.
    #[arg(long)]
    json: Option<PathBuf>,
}

impl RunArgs {
    fn config(&self) -> plsparse::Result<PipelineConfig> {
        let mut cfg = match &self.config {
            Some(p) => PipelineConfig::load(p)?,
            None => PipelineConfig::default(),
        };
        macro_rules! set {
            ($($flag:ident => $($field:ident).+),* $(,)?) => {
                $(if let Some(v) = &self.$flag { cfg.$($field).+ = v.clone(); })*
            };
        }
        set!(
            workers => workers,
            seed => seed,
            frames => frames,
            depth_dir => io.depth_dir,
            calib_dir => io.calib_dir,
            output_dir => io.output_dir,
            suppress_radius => keypoints.suppress_radius,
            fg_radius => separation.fg_radius,
            bg_keep_ratio => separation.bg_keep_ratio,
            rate => sampler.rate,
            bin_width => sampler.bin_width,
            max_range => sampler.max_range,
            min_keep => sampler.min_keep_per_bin,
            dilate_px => frustum.dilate_px,
            score_floor => frustum.score_floor,
        );
        if self.image_dir.is_some() {
            cfg.io.image_dir = self.image_dir.clone();
        }
        if self.regions_dir.is_some() {
            cfg.io.regions_dir = self.regions_dir.clone();
        }
        if self.masks_dir.is_some() {
            cfg.io.masks_dir = self.masks_dir.clone();
        }
        if self.sensor_frame {
            cfg.io.sensor_frame = true;
        }
        Ok(cfg)
    }
}

#[derive(Args)]
struct EvalArgs {
    /// Detection labels (with scores), one file per frame.
    #[arg(long)]
    det_dir: PathBuf,
    /// Ground-truth labels, one file per frame.
    #[arg(long)]
    gt_dir: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "Car,Pedestrian,Cyclist")]
    classes: Vec<String>,
    /// Per-class IoU threshold overrides, e.g. `Car=0.5`.
    #[arg(long, value_delimiter = ',')]
    iou: Vec<String>,
    /// Also write the report as JSON to this path.
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args)]
struct StatsArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Directory of real range scans (`<frame>.bin`) to compare against.
    #[arg(long)]
    lidar_dir: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli.cmd) {
        Ok(code) => code,
        Err(e) => {
            log::error!("{e}");
            ExitCode::from(1)
        }
    }
}

fn run(cmd: Cmd) -> plsparse::Result<ExitCode> {
    match cmd {
        Cmd::Project(a) => project(a),
        Cmd::Keypoints(a) => keypoints_verb(a),
        Cmd::Separate(a) => separate(a),
        Cmd::Dss(a) => dss(a),
        Cmd::SparsifyUnsup(a) => return sparsify(Scheme::Unsupervised, a),
        Cmd::SparsifySup(a) => return sparsify(Scheme::Supervised, a),
        Cmd::Eval(a) => eval(a),
        Cmd::Stats(a) => stats(a),
    }?;
    Ok(ExitCode::SUCCESS)
}

fn project(a: ProjectArgs) -> plsparse::Result<()> {
    let depth = kitti_io::read_depth_png(&a.depth, a.divisor)?;
    let calib = kitti_io::read_calib(&a.calib)?;
    let crop = if a.no_crop {
        RangeCropConfig::none()
    } else {
        RangeCropConfig::default()
    };
    let mut cloud = projection::backproject(&depth, &calib, &crop)?;
    cloud.quantize_f32();
    kitti_io::write_point_bin(&cloud, &a.out)?;
    log::info!("{} valid pixels -> {} points", depth.valid_count(), cloud.len());
    Ok(())
}

fn keypoints_verb(a: KeypointArgs) -> plsparse::Result<()> {
    let depth = kitti_io::read_depth_png(&a.depth, a.divisor)?;
    let calib = kitti_io::read_calib(&a.calib)?;
    let image = match &a.image {
        Some(p) => pipeline::read_intensity_image(p)?,
        None => Image::from_depth(&depth),
    };
    let mut cfg = keypoints::PoisConfig::default();
    if let Some(s) = a.step {
        cfg.step = s;
    }
    if let Some(axis) = a.axis {
        cfg.axis = match axis {
            AxisArg::Horizontal => DifferenceAxis::Horizontal,
            AxisArg::Vertical => DifferenceAxis::Vertical,
            AxisArg::Both => DifferenceAxis::Both,
        };
    }
    if let Some(s) = a.sigmas {
        cfg.sigmas = s;
    }
    if let Some(t) = a.threshold {
        cfg.threshold = Threshold::Absolute(t);
    }
    if let Some(k) = a.adaptive_k {
        cfg.threshold = Threshold::Adaptive(k);
    }
    if let Some(r) = a.suppress_radius {
        cfg.suppress_radius = r;
    }
    let out = keypoints::select_points_of_interest(&image, &depth, &calib, &cfg)?;
    let text = keypoints::format_keypoints(&out.kept, cfg.axis.pixel_offset(cfg.step));
    std::fs::write(&a.out, text).map_err(|e| Error::from(e).at(&a.out))?;
    log::info!(
        "{} detected, {} on invalid depth, {} kept",
        out.detected,
        out.dropped_invalid_depth,
        out.kept.len()
    );
    Ok(())
}

fn separate(a: SeparateArgs) -> plsparse::Result<()> {
    let cloud = kitti_io::read_point_bin(&a.cloud, a.frame.into())?;
    let text = std::fs::read_to_string(&a.keypoints).map_err(|e| Error::from(e).at(&a.keypoints))?;
    let anchors = keypoints::parse_keypoint_anchors(&text).map_err(|e| e.at(&a.keypoints))?;
    let mut cfg = SeparationConfig {
        seed: a.seed.resolve(),
        ..SeparationConfig::default()
    };
    if let Some(r) = a.fg_radius {
        cfg.fg_radius = r;
    }
    if let Some(r) = a.bg_keep_ratio {
        cfg.bg_keep_ratio = r;
    }
    let (tagged, counts) = foreground::separate(&cloud, &anchors, &cfg)?;
    let mut out = foreground::blend_background(&tagged, &cfg)?;
    let flags: Vec<bool> = (0..out.len()).map(|i| out.tag(i) == Tag::Foreground).collect();
    if let Some(path) = &a.tags {
        let text: String = flags.iter().map(|&f| if f { "1\n" } else { "0\n" }).collect();
        std::fs::write(path, text).map_err(|e| Error::from(e).at(path))?;
    }
    out.intensity = a
        .tag_intensity
        .then(|| flags.iter().map(|&f| if f { 1.0 } else { 0.0 }).collect());
    kitti_io::write_point_bin(&out, &a.out)?;
    log::info!(
        "{} foreground, {} background, {} written",
        counts.foreground,
        counts.background,
        out.len()
    );
    Ok(())
}

fn dss(a: DssArgs) -> plsparse::Result<()> {
    let cloud = kitti_io::read_point_bin(&a.cloud, a.frame.into())?;
    let mut cfg = StratifyConfig {
        seed: a.seed.resolve(),
        ..StratifyConfig::default()
    };
    if let Some(v) = a.bin_width {
        cfg.bin_width = v;
    }
    if let Some(v) = a.max_range {
        cfg.max_range = v;
    }
    if let Some(v) = a.rate {
        cfg.rate = v;
    }
    if let Some(v) = a.min_keep {
        cfg.min_keep_per_bin = v;
    }
    if let Some(m) = a.range_mode {
        cfg.range_mode = match m {
            RangeArg::Euclidean => RangeMode::Euclidean,
            RangeArg::Depth => RangeMode::Depth,
        };
    }
    let Some(rates) = a.sweep else {
        let out = sampler::sample(&cloud, &cfg)?;
        kitti_io::write_point_bin(&out, &a.out)?;
        log::info!("{} -> {} points", cloud.len(), out.len());
        return Ok(());
    };
    std::fs::create_dir_all(&a.out).map_err(|e| Error::from(e).at(&a.out))?;
    let stem = a.cloud.file_stem().map_or("cloud".into(), |s| s.to_string_lossy().into_owned());
    for rate in rates {
        let c = StratifyConfig { rate, ..cfg };
        let out = sampler::sample(&cloud, &c)?;
        let path = a.out.join(format!("{stem}_r{:03}.bin", (rate * 100.0).round() as u32));
        kitti_io::write_point_bin(&out, &path)?;
        println!("{rate}\t{}\t{}", out.len(), path.display());
    }
    Ok(())
}

/// Exit code 2 when some frames of a batch failed.
fn sparsify(scheme: Scheme, a: RunArgs) -> plsparse::Result<ExitCode> {
    let cfg = a.config()?;
    let report = pipeline::run_batch(scheme, &cfg)?;
    print!("{}", report.to_text());
    if let Some(path) = &a.json {
        report.write_json(path)?;
    }
    Ok(if report.failures.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    })
}

fn eval(a: EvalArgs) -> plsparse::Result<()> {
    let mut cfg = EvalConfig::default();
    for spec in &a.iou {
        let (class, t) = spec
            .split_once('=')
            .and_then(|(c, t)| Some((c, t.parse::<f64>().ok()?)))
            .ok_or_else(|| Error::Usage(format!("bad --iou entry {spec:?}, expected CLASS=THRESHOLD")))?;
        cfg.iou_thresholds.insert(class.to_string(), t);
    }
    let report = eval3d::evaluate_dirs(&a.det_dir, &a.gt_dir, &a.classes, &cfg)?;
    print!("{}", report.to_text());
    if let Some(path) = &a.json {
        write_json(path, &report)?;
    }
    Ok(())
}

fn stats(a: StatsArgs) -> plsparse::Result<()> {
    let mut cfg = a.run.config()?;
    if a.lidar_dir.is_some() {
        cfg.io.lidar_dir = a.lidar_dir.clone();
    }
    let rows = pipeline::stats(&cfg)?;
    println!("{}", pipeline::StatsRow::header());
    for r in &rows {
        println!("{}", r.to_line());
    }
    if let Some(path) = &a.run.json {
        write_json(path, &rows)?;
    }
    Ok(())
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> plsparse::Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Config(e.to_string()))?;
    std::fs::write(path, text + "\n").map_err(|e| Error::from(e).at(path))
}
