//! The `layerlens` command line: calibrate, render-ref, analyze,
//! compare-metrics and watch.
//!
//! Exit codes: 0 success, 2 input or configuration error, 3 anomaly alarm.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::calibration::{calibrate, quadrant_windows, Calibration, DEFAULT_MARKER_THRESHOLD};
use crate::config::{ConfigError, JobConfig};
use crate::detect::{AnomalyReport, DescriptorPair};
use crate::gcode::{parse_gcode_with, ParseOptions};
use crate::geometry::{warp_image, CameraFile, CameraModel, PixelRect};
use crate::io::{
    read_gray_png, read_json, read_layer_image, read_mask, read_top_view, sidecar_path, write_atomic, write_json,
    write_layer_image, write_mask, write_rgba_png, Sidecar,
};
use crate::layer_image::{Frame, LayerImage, RegionMask};
use crate::manifest::{export_manifest, ExportParams};
use crate::raster::{layer_mask_in, StackCanvas};
use crate::similarity::Metric;
use crate::viz::{comparison_chart, heatmap, overlay};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_ALARM: i32 = 3;

/// Name of the marker file the watcher drops when an alarm fires.
pub const PAUSE_MARKER: &str = "PAUSE_REQUESTED";
pub const WATCH_LOG: &str = "watch_log.jsonl";

#[derive(Debug, Error)]
#[error("{0}")]
pub struct CliError(pub String);

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError(e.to_string())
    }
}

fn fail<E: std::fmt::Display>(context: &str) -> impl FnOnce(E) -> CliError + '_ {
    move |e| CliError(format!("{context}: {e}"))
}

#[derive(Debug, Parser)]
#[command(name = "layerlens", version, about = "Layer-wise print anomaly detection against G-code references")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Locate the four bed markers and fit the camera-to-top-view homography.
    Calibrate(CalibrateArgs),
    /// Render cumulative reference images and masks for every layer.
    RenderRef(RenderRefArgs),
    /// Compare one captured layer against its reference.
    Analyze(AnalyzeArgs),
    /// Tabulate regular/failed anomaly ratios for a set of image pairs.
    CompareMetrics(CompareArgs),
    /// Poll a directory for layer snapshots and analyze each one.
    Watch(WatchArgs),
}

#[derive(Debug, Args, Clone, Default)]
pub struct CommonArgs {
    /// JSON job configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Metric tokens, repeatable or comma separated.
    #[arg(long = "metric", value_delimiter = ',', global = true)]
    pub metrics: Vec<Metric>,
    /// Failure threshold T_S in (0, 1).
    #[arg(long, global = true)]
    pub threshold: Option<f64>,
    /// Top-view scale in px/mm.
    #[arg(long, global = true)]
    pub scale: Option<f64>,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    /// Camera image showing the four markers.
    #[arg(long)]
    pub image: PathBuf,
    /// Four search windows `x0,y0,x1,y1` separated by `;` (default: image quadrants).
    #[arg(long)]
    pub windows: Option<String>,
    /// Marker intensity threshold.
    #[arg(long, default_value_t = DEFAULT_MARKER_THRESHOLD)]
    pub marker_threshold: u8,
    /// Optional camera model JSON (`K`, `R`, `t`, `image_dims`).
    #[arg(long)]
    pub camera: Option<PathBuf>,
    /// Output calibration file (default: `<output_dir>/calibration.json`).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Args)]
pub struct RenderRefArgs {
    /// G-code file (default: `gcode_path` from the config).
    #[arg(long)]
    pub gcode: Option<PathBuf>,
    /// Output directory (default: `<output_dir>/refs`).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write a scene manifest for photorealistic rendering.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Captured layer image.
    #[arg(long)]
    pub image: PathBuf,
    /// Zero-based layer index.
    #[arg(long)]
    pub layer: usize,
    /// Reference directory (default: `<output_dir>/refs`).
    #[arg(long)]
    pub refs: Option<PathBuf>,
    /// The image is already a top view in the reference frame.
    #[arg(long)]
    pub top_view: bool,
    /// Report directory (default: `<output_dir>/reports`).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// JSON file listing `{name, regular, failed, reference, mask?}` cases.
    #[arg(long)]
    pub pairs: PathBuf,
    /// Output directory (default: `<output_dir>`).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Args)]
pub struct WatchArgs {
    /// Directory receiving `layer_<index>.png` snapshots.
    #[arg(long)]
    pub dir: PathBuf,
    /// Reference directory (default: `<output_dir>/refs`).
    #[arg(long)]
    pub refs: Option<PathBuf>,
    /// Snapshots are already top views in the reference frame.
    #[arg(long)]
    pub top_view: bool,
    /// Poll interval override in milliseconds.
    #[arg(long)]
    pub poll_ms: Option<u64>,
    /// Stop after this many layers have been analyzed.
    #[arg(long)]
    pub max_layers: Option<usize>,
    /// Stop after this long without a new snapshot.
    #[arg(long)]
    pub idle_timeout_ms: Option<u64>,
    #[command(flatten)]
    pub common: CommonArgs,
}

/// Parses arguments and runs the command, returning the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_INPUT
        }
    }
}

pub fn execute(cli: Cli) -> Result<i32, CliError> {
    match cli.command {
        Command::Calibrate(a) => cmd_calibrate(&a),
        Command::RenderRef(a) => cmd_render_ref(&a),
        Command::Analyze(a) => cmd_analyze(&a),
        Command::CompareMetrics(a) => cmd_compare_metrics(&a),
        Command::Watch(a) => cmd_watch(&a),
    }
}

/// Config file, then the output-directory environment override, then flags.
pub fn load_config(common: &CommonArgs) -> Result<JobConfig, CliError> {
    let mut cfg = match &common.config {
        Some(p) => JobConfig::load(p)?,
        None => JobConfig::default(),
    };
    cfg.apply_env();
    if !common.metrics.is_empty() {
        cfg.metrics = common.metrics.clone();
    }
    if let Some(t) = common.threshold {
        cfg.threshold = t;
    }
    if let Some(s) = common.scale {
        cfg.scale_px_per_mm = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn parse_windows(s: &str) -> Result<[PixelRect; 4], CliError> {
    let rects: Vec<PixelRect> = s
        .split(';')
        .map(|w| {
            let v: Vec<usize> = w
                .split(',')
                .map(|n| n.trim().parse::<usize>())
                .collect::<Result<_, _>>()
                .map_err(fail("window"))?;
            match v[..] {
                [x0, y0, x1, y1] => Ok(PixelRect::new(x0, y0, x1, y1)),
                _ => Err(CliError(format!("window `{w}` needs 4 numbers"))),
            }
        })
        .collect::<Result<_, _>>()?;
    rects
        .try_into()
        .map_err(|v: Vec<PixelRect>| CliError(format!("expected 4 windows, got {}", v.len())))
}

fn load_raw_image(path: &Path) -> Result<LayerImage, CliError> {
    let (w, h, px) = read_gray_png(path).map_err(fail("image"))?;
    let frame = Frame::new(w, h, 1.0, [0.0, 0.0]).map_err(fail("image"))?;
    LayerImage::from_pixels(frame, px).map_err(fail("image"))
}

pub fn cmd_calibrate(a: &CalibrateArgs) -> Result<i32, CliError> {
    let cfg = load_config(&a.common)?;
    let img = load_raw_image(&a.image)?;
    let windows = match &a.windows {
        Some(s) => parse_windows(s)?,
        None => quadrant_windows(img.width(), img.height()),
    };
    let mut cal = calibrate(&img, &windows, a.marker_threshold, &cfg.plane, cfg.scale_px_per_mm).map_err(fail("calibration"))?;
    if let Some(p) = &a.camera {
        let file: CameraFile = read_json(p).map_err(fail("camera"))?;
        let cam = CameraModel::from_file(&file).map_err(fail("camera"))?;
        cal = cal.with_camera(&cam);
    }
    let out = a.out.clone().unwrap_or_else(|| cfg.output_dir.join("calibration.json"));
    write_json(&out, &cal).map_err(fail("write"))?;
    println!("rms corner residual: {:.3e} px", cal.rms_residual_px);
    println!("wrote {}", out.display());
    Ok(EXIT_OK)
}

pub fn ref_path(dir: &Path, layer: usize) -> PathBuf {
    dir.join(format!("ref_{layer}.png"))
}

pub fn mask_path(dir: &Path, layer: usize) -> PathBuf {
    dir.join(format!("mask_{layer}.png"))
}

fn load_calibration(cfg: &JobConfig) -> Result<Option<Calibration>, CliError> {
    cfg.calibration_path
        .as_ref()
        .map(|p| read_json::<Calibration>(p).map_err(fail("calibration")))
        .transpose()
}

pub fn cmd_render_ref(a: &RenderRefArgs) -> Result<i32, CliError> {
    let cfg = load_config(&a.common)?;
    let gcode = a
        .gcode
        .clone()
        .or_else(|| cfg.gcode_path.clone())
        .ok_or_else(|| CliError("no G-code given (--gcode or gcode_path)".into()))?;
    let text = fs::read_to_string(&gcode).map_err(fail(&gcode.display().to_string()))?;
    let opts = ParseOptions {
        extrusion_width: cfg.extrusion_width_mm,
    };
    let program = parse_gcode_with(&text, &opts).map_err(fail(&gcode.display().to_string()))?;
    let frame = cfg.plane.top_view_frame(cfg.scale_px_per_mm).map_err(fail("frame"))?;
    let out = a.out.clone().unwrap_or_else(|| cfg.output_dir.join("refs"));
    let mut stack = StackCanvas::new(frame, cfg.background);
    let mut union = vec![false; frame.len()];
    for layer in &program.layers {
        stack.add(layer).map_err(fail("render"))?;
        let mask = layer_mask_in(layer, frame, cfg.closing_radius_mm).map_err(fail("mask"))?;
        for (u, &m) in union.iter_mut().zip(mask.bits()) {
            *u |= m;
        }
        let png = ref_path(&out, layer.index);
        write_layer_image(&png, &stack.image()).map_err(fail("write"))?;
        let mask = RegionMask::new(frame, union.clone()).map_err(fail("mask"))?;
        write_mask(&mask_path(&out, layer.index), &mask).map_err(fail("write"))?;
        write_json(&sidecar_path(&png), &Sidecar::new(layer.index, layer.z, &frame)).map_err(fail("write"))?;
    }
    if let Some(path) = &a.manifest {
        let cal = load_calibration(&cfg)?;
        let manifest = export_manifest(&program, cal.as_ref(), &ExportParams::default()).map_err(fail("manifest"))?;
        write_json(path, &manifest).map_err(fail("write"))?;
    }
    println!("rendered {} layers into {}", program.layers.len(), out.display());
    Ok(EXIT_OK)
}

/// Everything needed to analyze snapshots of one job.
struct Analyzer {
    cfg: JobConfig,
    refs: PathBuf,
    calibration: Option<Calibration>,
    top_view: bool,
    out: PathBuf,
}

#[derive(Debug, Clone, Serialize)]
struct LayerOutcome {
    layer: usize,
    ratios: BTreeMap<Metric, f64>,
    regions: BTreeMap<Metric, usize>,
    alarm: bool,
}

impl Analyzer {
    fn new(cfg: JobConfig, refs: Option<PathBuf>, top_view: bool, out: Option<PathBuf>) -> Result<Self, CliError> {
        let calibration = load_calibration(&cfg)?;
        Ok(Self {
            refs: refs.unwrap_or_else(|| cfg.output_dir.join("refs")),
            out: out.unwrap_or_else(|| cfg.output_dir.join("reports")),
            top_view: top_view || calibration.is_none(),
            calibration,
            cfg,
        })
    }

    fn reference(&self, layer: usize) -> Result<(LayerImage, RegionMask, Sidecar), CliError> {
        let png = ref_path(&self.refs, layer);
        if !png.exists() {
            return Err(CliError(format!("no reference for layer {layer} ({})", png.display())));
        }
        let (img, side) = read_top_view(&png).map_err(fail("reference"))?;
        let mask = read_mask(&mask_path(&self.refs, layer), img.frame).map_err(fail("mask"))?;
        Ok((img, mask, side))
    }

    fn top_view_of(&self, image: &Path, frame: Frame, z: f64) -> Result<LayerImage, CliError> {
        if self.top_view {
            return read_layer_image(image, frame).map_err(fail("image"));
        }
        let cal = self.calibration.as_ref().expect("calibration present unless top view");
        let view = cal.top_view_frame().map_err(fail("calibration"))?;
        if !view.same_grid(&frame) {
            return Err(CliError("reference frame differs from the calibrated top view".into()));
        }
        let raw = load_raw_image(image)?;
        let h = cal.layer_homography(z).map_err(fail("unwarp"))?;
        warp_image(&raw, &h, frame).map_err(fail("unwarp"))
    }

    fn analyze(&self, image: &Path, layer: usize) -> Result<LayerOutcome, CliError> {
        let (reference, mask, side) = self.reference(layer)?;
        let captured = self.top_view_of(image, reference.frame, side.z)?;
        let pair = DescriptorPair::new(&captured, &reference, &mask, &self.cfg.hog).map_err(fail("analysis"))?;
        let mut outcome = LayerOutcome {
            layer,
            ratios: BTreeMap::new(),
            regions: BTreeMap::new(),
            alarm: false,
        };
        write_layer_image(&self.out.join(format!("topview_{layer}.png")), &captured).map_err(fail("write"))?;
        for &m in &self.cfg.metrics {
            let report = pair
                .report(m, self.cfg.threshold_for(m), self.cfg.min_region_blocks, layer)
                .map_err(fail("analysis"))?;
            self.write_report(&captured, &report)?;
            outcome.alarm |= report.anomaly_ratio_pct > self.cfg.alarm_ratio_pct;
            outcome.ratios.insert(m, report.anomaly_ratio_pct);
            outcome.regions.insert(m, report.regions.len());
        }
        Ok(outcome)
    }

    fn write_report(&self, captured: &LayerImage, report: &AnomalyReport) -> Result<(), CliError> {
        let stem = format!("{}_{}", report.layer_index, report.metric);
        let heat_name = format!("heatmap_{stem}.png");
        let (w, h) = (captured.width(), captured.height());
        let heat = heatmap(&report.map, w, h, &self.cfg.hog);
        write_rgba_png(&self.out.join(&heat_name), w, h, &heat.data).map_err(fail("write"))?;
        let over = overlay(captured, report, &self.cfg.hog);
        write_rgba_png(&self.out.join(format!("overlay_{stem}.png")), w, h, &over.data).map_err(fail("write"))?;
        write_json(&self.out.join(format!("report_{stem}.json")), &report.to_json(Some(heat_name))).map_err(fail("write"))
    }
}

fn print_outcome(o: &LayerOutcome) {
    for (m, pct) in &o.ratios {
        println!("layer {} {m}: a% = {pct:.2}, regions = {}", o.layer, o.regions[m]);
    }
}

pub fn cmd_analyze(a: &AnalyzeArgs) -> Result<i32, CliError> {
    let cfg = load_config(&a.common)?;
    let analyzer = Analyzer::new(cfg, a.refs.clone(), a.top_view, a.out.clone())?;
    let outcome = analyzer.analyze(&a.image, a.layer)?;
    print_outcome(&outcome);
    Ok(if outcome.alarm { EXIT_ALARM } else { EXIT_OK })
}

/// One entry of a compare-metrics pairs file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonCase {
    pub name: String,
    pub regular: PathBuf,
    pub failed: PathBuf,
    pub reference: PathBuf,
    #[serde(default)]
    pub mask: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairsFile {
    pub cases: Vec<ComparisonCase>,
}

pub const COMPARE_HEADER: &str = "case,metric,regular_pct,failed_pct,power";

fn compare_case(case: &ComparisonCase, cfg: &JobConfig) -> Result<Vec<(Metric, f64, f64)>, CliError> {
    let reference = if sidecar_path(&case.reference).exists() {
        read_top_view(&case.reference).map_err(fail("reference"))?.0
    } else {
        let (w, h, px) = read_gray_png(&case.reference).map_err(fail("reference"))?;
        let frame = Frame::new(w, h, cfg.scale_px_per_mm, [0.0, 0.0]).map_err(fail("reference"))?;
        LayerImage::from_pixels(frame, px).map_err(fail("reference"))?
    };
    let frame = reference.frame;
    let mask = match &case.mask {
        Some(p) => read_mask(p, frame).map_err(fail("mask"))?,
        None => RegionMask::full(frame, true),
    };
    let regular = read_layer_image(&case.regular, frame).map_err(fail("regular"))?;
    let failed = read_layer_image(&case.failed, frame).map_err(fail("failed"))?;
    let reg = DescriptorPair::new(&regular, &reference, &mask, &cfg.hog).map_err(fail("regular"))?;
    let bad = DescriptorPair::new(&failed, &reference, &mask, &cfg.hog).map_err(fail("failed"))?;
    cfg.metrics
        .iter()
        .map(|&m| {
            let t = cfg.threshold_for(m);
            let r = reg.report(m, t, cfg.min_region_blocks, 0).map_err(fail("regular"))?;
            let f = bad.report(m, t, cfg.min_region_blocks, 0).map_err(fail("failed"))?;
            Ok((m, r.anomaly_ratio_pct, f.anomaly_ratio_pct))
        })
        .collect()
}

pub fn cmd_compare_metrics(a: &CompareArgs) -> Result<i32, CliError> {
    let cfg = load_config(&a.common)?;
    let pairs: PairsFile = read_json(&a.pairs).map_err(fail("pairs"))?;
    let out = a.out.clone().unwrap_or_else(|| cfg.output_dir.clone());
    let mut csv = String::from(COMPARE_HEADER);
    csv.push('\n');
    let mut results: Vec<Option<Vec<(Metric, f64, f64)>>> = Vec::new();
    let mut errors = Vec::new();
    for case in &pairs.cases {
        match compare_case(case, &cfg) {
            Ok(rows) => {
                for (m, r, f) in &rows {
                    let _ = writeln!(csv, "{},{m},{r:.4},{f:.4},{:.4}", case.name, f - r);
                }
                results.push(Some(rows));
            }
            Err(e) => {
                eprintln!("case {}: {e}", case.name);
                errors.push(serde_json::json!({"case": case.name, "error": e.to_string()}));
                results.push(None);
            }
        }
    }
    write_atomic(&out.join("compare_metrics.csv"), csv.as_bytes()).map_err(fail("write"))?;
    let chart = comparison_chart(cfg.metrics.len(), results.len(), &|m, c| {
        results[c].as_ref().map(|rows| (rows[m].1, rows[m].2))
    });
    write_rgba_png(&out.join("compare_metrics.png"), chart.width, chart.height, &chart.data).map_err(fail("write"))?;
    if !errors.is_empty() {
        write_json(&out.join("compare_metrics_errors.json"), &errors).map_err(fail("write"))?;
    }
    print!("{csv}");
    Ok(EXIT_OK)
}

/// Layer index of a `layer_<index>.png` file name.
pub fn snapshot_index(name: &str) -> Option<usize> {
    let digits = name.strip_prefix("layer_")?.strip_suffix(".png")?;
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    digits.parse().ok()
}

const READ_ATTEMPTS: u32 = 3;

struct Watcher {
    analyzer: Analyzer,
    log: PathBuf,
    done: BTreeSet<usize>,
    seen_names: BTreeSet<String>,
    attempts: BTreeMap<String, u32>,
    analyzed: usize,
    alarms: usize,
}

fn now_ms() -> u128 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis())
}

impl Watcher {
    fn log(&self, mut entry: serde_json::Value) -> Result<(), CliError> {
        entry["time_ms"] = serde_json::json!(now_ms() as u64);
        let mut f = fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(&self.log)
            .map_err(fail("log"))?;
        writeln!(f, "{entry}").map_err(fail("log"))
    }

    /// One pass over the directory. Returns whether anything new was seen.
    fn poll(&mut self, dir: &Path) -> Result<bool, CliError> {
        let mut fresh: Vec<(usize, String)> = Vec::new();
        for entry in fs::read_dir(dir).map_err(fail("watch"))? {
            let name = entry.map_err(fail("watch"))?.file_name().to_string_lossy().into_owned();
            let Some(index) = snapshot_index(&name) else { continue };
            if self.seen_names.contains(&name) {
                continue;
            }
            fresh.push((index, name));
        }
        fresh.sort();
        let any = !fresh.is_empty();
        for (index, name) in fresh {
            if self.done.contains(&index) {
                self.seen_names.insert(name.clone());
                self.log(serde_json::json!({"event": "duplicate", "layer": index, "file": name}))?;
                continue;
            }
            match self.analyzer.analyze(&dir.join(&name), index) {
                Ok(outcome) => {
                    self.seen_names.insert(name.clone());
                    self.done.insert(index);
                    self.analyzed += 1;
                    print_outcome(&outcome);
                    self.log(serde_json::json!({
                        "event": "analyzed",
                        "layer": index,
                        "file": name,
                        "anomaly_ratio_pct": outcome.ratios,
                        "regions": outcome.regions,
                        "alarm": outcome.alarm,
                    }))?;
                    if outcome.alarm {
                        self.alarms += 1;
                        let marker = self.analyzer.cfg.output_dir.join(PAUSE_MARKER);
                        write_json(&marker, &outcome).map_err(fail("marker"))?;
                        self.log(serde_json::json!({"event": "pause_requested", "layer": index}))?;
                    }
                }
                Err(e) => {
                    let n = self.attempts.entry(name.clone()).or_insert(0);
                    *n += 1;
                    if *n >= READ_ATTEMPTS {
                        self.seen_names.insert(name.clone());
                        self.done.insert(index);
                        self.log(serde_json::json!({"event": "error", "layer": index, "file": name, "error": e.to_string()}))?;
                    }
                }
            }
        }
        Ok(any)
    }
}

pub fn cmd_watch(a: &WatchArgs) -> Result<i32, CliError> {
    let cfg = load_config(&a.common)?;
    if !a.dir.is_dir() {
        return Err(CliError(format!("{} is not a directory", a.dir.display())));
    }
    let poll = Duration::from_millis(a.poll_ms.unwrap_or(cfg.poll_interval_ms));
    let out_dir = cfg.output_dir.clone();
    fs::create_dir_all(&out_dir).map_err(fail("output"))?;
    let mut w = Watcher {
        log: out_dir.join(WATCH_LOG),
        analyzer: Analyzer::new(cfg, a.refs.clone(), a.top_view, None)?,
        done: BTreeSet::new(),
        seen_names: BTreeSet::new(),
        attempts: BTreeMap::new(),
        analyzed: 0,
        alarms: 0,
    };
    let mut last_activity = Instant::now();
    loop {
        if w.poll(&a.dir)? {
            last_activity = Instant::now();
        }
        if a.max_layers.is_some_and(|n| w.analyzed >= n) {
            break;
        }
        if a.idle_timeout_ms.is_some_and(|t| last_activity.elapsed() >= Duration::from_millis(t)) {
            break;
        }
        std::thread::sleep(poll);
    }
    Ok(if w.alarms > 0 { EXIT_ALARM } else { EXIT_OK })
}
