//! Renderer-agnostic scene description for photorealistic reference frames.
//!
//! The manifest carries everything an external path tracer needs to rebuild
//! the job: camera pose, marker positions, per-layer toolpath polylines,
//! light-ring schedule and material parameters. Frames rendered from it are
//! expected back as `ref_<index>.png`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::calibration::Calibration;
use crate::gcode::{ExtrusionSegment, GCodeProgram, LayerToolpath};
use crate::geometry::{CameraFile, CameraModel, GeometryError};

pub const MANIFEST_VERSION: u32 = 1;
/// Douglas-Peucker tolerance applied to exported polylines, mm.
pub const SIMPLIFY_TOLERANCE_MM: f64 = 0.01;

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("calibration with a camera model is required")]
    MissingCalibration,
    #[error("program has no layers")]
    EmptyProgram,
    #[error("invalid manifest: {0}")]
    Invalid(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestCamera {
    #[serde(flatten)]
    pub calibration: CameraFile,
    pub vertical_fov_deg: f64,
    /// Camera center in world mm.
    pub position: [f64; 3],
    /// Viewing direction (unit, world).
    pub forward: [f64; 3],
    /// Image-up direction (unit, world).
    pub up: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LightRing {
    pub radius_mm: f64,
    /// Ring height for each layer, mm.
    pub z_schedule: Vec<f64>,
    pub emission_power: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Material {
    /// Linear RGB in `[0, 1]`.
    pub base_color: [f64; 3],
    pub roughness: f64,
    pub transmission: f64,
    pub translucency_weight: f64,
}

impl Default for Material {
    fn default() -> Self {
        Self {
            base_color: [0.8, 0.8, 0.78],
            roughness: 0.55,
            transmission: 0.05,
            translucency_weight: 0.3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenderSettings {
    pub resolution: [usize; 2],
    pub samples: u32,
    pub seed: u64,
}

impl Default for RenderSettings {
    fn default() -> Self {
        Self {
            resolution: [1920, 1080],
            samples: 128,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polyline {
    pub width: f64,
    pub points: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestLayer {
    pub index: usize,
    pub z: f64,
    pub polylines: Vec<Polyline>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneManifest {
    pub version: u32,
    pub camera: ManifestCamera,
    /// Bed markers in world mm, TL, TR, BR, BL.
    pub markers: [[f64; 3]; 4],
    pub layer_height: f64,
    pub light_ring: LightRing,
    pub material: Material,
    pub render: RenderSettings,
    pub layers: Vec<ManifestLayer>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExportParams {
    pub light_ring_radius_mm: f64,
    /// Ring height above each layer's top surface.
    pub light_ring_offset_mm: f64,
    pub emission_power: f64,
    pub material: Material,
    pub render: RenderSettings,
}

impl Default for ExportParams {
    fn default() -> Self {
        Self {
            light_ring_radius_mm: 70.0,
            light_ring_offset_mm: 0.0,
            emission_power: 40.0,
            material: Material::default(),
            render: RenderSettings::default(),
        }
    }
}

fn row(m: &[f64; 9], r: usize) -> [f64; 3] {
    [m[3 * r], m[3 * r + 1], m[3 * r + 2]]
}

fn manifest_camera(cam: &CameraModel) -> ManifestCamera {
    let file = cam.to_file();
    let c = -(cam.r.transpose() * cam.t);
    let (fy, h) = (cam.k[(1, 1)], cam.image_dims.1 as f64);
    let down = row(&file.r, 1);
    ManifestCamera {
        vertical_fov_deg: 2.0 * (h / (2.0 * fy)).atan().to_degrees(),
        position: [c.x, c.y, c.z],
        forward: row(&file.r, 2),
        up: down.map(|v| -v),
        calibration: file,
    }
}

/// Joins consecutive touching segments of equal width into polylines.
fn chain(segments: &[ExtrusionSegment]) -> Vec<Polyline> {
    let mut out: Vec<Polyline> = Vec::new();
    for s in segments.iter().filter(|s| s.extruding) {
        match out.last_mut() {
            Some(pl) if pl.width == s.width && pl.points.last() == Some(&s.start) => pl.points.push(s.end),
            _ => out.push(Polyline {
                width: s.width,
                points: vec![s.start, s.end],
            }),
        }
    }
    for pl in &mut out {
        pl.points = simplify(&pl.points, SIMPLIFY_TOLERANCE_MM);
    }
    out
}

fn perpendicular_distance(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let len = dx.hypot(dy);
    if len == 0.0 {
        return (p[0] - a[0]).hypot(p[1] - a[1]);
    }
    ((p[0] - a[0]) * dy - (p[1] - a[1]) * dx).abs() / len
}

/// Douglas-Peucker simplification keeping both endpoints.
pub fn simplify(points: &[[f64; 2]], tolerance: f64) -> Vec<[f64; 2]> {
    if points.len() < 3 {
        return points.to_vec();
    }
    let mut keep = vec![false; points.len()];
    keep[0] = true;
    keep[points.len() - 1] = true;
    let mut stack = vec![(0, points.len() - 1)];
    while let Some((i, j)) = stack.pop() {
        let (mut worst, mut at) = (0.0, i);
        for k in i + 1..j {
            let d = perpendicular_distance(points[k], points[i], points[j]);
            if d > worst {
                worst = d;
                at = k;
            }
        }
        if worst > tolerance {
            keep[at] = true;
            stack.push((i, at));
            stack.push((at, j));
        }
    }
    points.iter().zip(keep).filter(|(_, k)| *k).map(|(p, _)| *p).collect()
}

/// Builds the manifest for `program` as seen by the calibrated camera.
pub fn export_manifest(
    program: &GCodeProgram,
    calibration: Option<&Calibration>,
    params: &ExportParams,
) -> Result<SceneManifest, ManifestError> {
    let cal = calibration.ok_or(ManifestError::MissingCalibration)?;
    let cam_file = cal.camera.as_ref().ok_or(ManifestError::MissingCalibration)?;
    if program.layers.is_empty() {
        return Err(ManifestError::EmptyProgram);
    }
    let cam = CameraModel::from_file(cam_file)?;
    let layers: Vec<ManifestLayer> = program
        .layers
        .iter()
        .map(|l| ManifestLayer {
            index: l.index,
            z: l.z,
            polylines: chain(&l.segments),
        })
        .collect();
    let manifest = SceneManifest {
        version: MANIFEST_VERSION,
        camera: manifest_camera(&cam),
        markers: cal.markers_mm.map(|p| [p[0], p[1], 0.0]),
        layer_height: program.layer_height,
        light_ring: LightRing {
            radius_mm: params.light_ring_radius_mm,
            z_schedule: layers.iter().map(|l| l.z + params.light_ring_offset_mm).collect(),
            emission_power: params.emission_power,
        },
        material: params.material.clone(),
        render: params.render.clone(),
        layers,
    };
    manifest.validate()?;
    Ok(manifest)
}

impl SceneManifest {
    /// Structural checks that need no renderer.
    pub fn validate(&self) -> Result<(), ManifestError> {
        let bad = |m: String| Err(ManifestError::Invalid(m));
        if self.version != MANIFEST_VERSION {
            return bad(format!("unsupported version {}", self.version));
        }
        CameraModel::from_file(&self.camera.calibration)?;
        if self.layers.is_empty() {
            return bad("no layers".into());
        }
        if !(self.layer_height > 0.0) {
            return bad("layer_height must be positive".into());
        }
        let zs = &self.light_ring.z_schedule;
        if zs.len() != self.layers.len() {
            return bad(format!("{} ring heights for {} layers", zs.len(), self.layers.len()));
        }
        for w in zs.windows(2) {
            let step = w[1] - w[0];
            if !(step > 0.0) || (step - self.layer_height).abs() > 1e-3 {
                return bad(format!("ring schedule step {step} does not match layer height {}", self.layer_height));
            }
        }
        for (i, layer) in self.layers.iter().enumerate() {
            if layer.index != i {
                return bad(format!("layer {i} has index {}", layer.index));
            }
            for pl in &layer.polylines {
                if !(pl.width > 0.0) || pl.points.len() < 2 {
                    return bad(format!("layer {i} has a degenerate polyline"));
                }
                if pl.points.iter().flatten().any(|v| !v.is_finite()) {
                    return bad(format!("layer {i} has non-finite points"));
                }
            }
        }
        let [w, h] = self.render.resolution;
        if w == 0 || h == 0 || self.render.samples == 0 {
            return bad("render resolution and samples must be positive".into());
        }
        Ok(())
    }

    /// Validates and checks the layer count against the parsed program.
    pub fn validate_against(&self, program: &GCodeProgram) -> Result<(), ManifestError> {
        self.validate()?;
        if self.layers.len() != program.layers.len() {
            return Err(ManifestError::Invalid(format!(
                "{} manifest layers for {} program layers",
                self.layers.len(),
                program.layers.len()
            )));
        }
        Ok(())
    }

    /// Manifest polylines as toolpaths, for rasterizing without a renderer.
    pub fn toolpaths(&self) -> Vec<LayerToolpath> {
        self.layers
            .iter()
            .map(|l| {
                let segments = l
                    .polylines
                    .iter()
                    .flat_map(|pl| {
                        pl.points.windows(2).map(move |w| ExtrusionSegment {
                            start: w[0],
                            end: w[1],
                            width: pl.width,
                            feedrate: 0.0,
                            extruding: true,
                            line_no: 0,
                        })
                    })
                    .collect();
                LayerToolpath::new(l.index, l.z, segments)
            })
            .collect()
    }
}
