//! Deterministic synthetic reference images and printed-region masks drawn
//! straight from toolpaths.
//!
//! Every extruding segment becomes a capsule (round caps and joins) whose
//! intensity follows a cosine cross-bead profile, bright on the centerline
//! and darker toward the bead edges, so that filled regions still carry
//! bead-boundary gradients. Edges are blended by analytic pixel coverage.

use std::f64::consts::FRAC_PI_2;

use thiserror::Error;

use crate::gcode::{Bounds, LayerToolpath};
use crate::layer_image::{Frame, ImageError, LayerImage, RegionMask};

pub const DEFAULT_BACKGROUND: u8 = 30;
pub const BEAD_CENTER_INTENSITY: f64 = 230.0;
pub const BEAD_EDGE_INTENSITY: f64 = 140.0;
pub const DEFAULT_CLOSING_RADIUS_MM: f64 = 0.5;
/// Blank border around auto-fitted frames.
pub const AUTO_FRAME_MARGIN_MM: f64 = 1.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RasterError {
    #[error("layer {0} has no extruding segments")]
    EmptyLayer(usize),
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error(transparent)]
    Image(#[from] ImageError),
}

/// Per-pixel nearest-stroke distances for one layer.
struct StrokeField {
    dist: Vec<f64>,
    radius: Vec<f64>,
}

impl StrokeField {
    fn coverage(&self, i: usize) -> f64 {
        (self.radius[i] - self.dist[i] + 0.5).clamp(0.0, 1.0)
    }

    fn intensity(&self, i: usize) -> f64 {
        let r = self.radius[i];
        let t = (self.dist[i] / r).min(1.0);
        BEAD_EDGE_INTENSITY + (BEAD_CENTER_INTENSITY - BEAD_EDGE_INTENSITY) * (FRAC_PI_2 * t).cos()
    }
}

fn seg_distance(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let len2 = dx * dx + dy * dy;
    let t = if len2 > 0.0 {
        (((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (p[0] - a[0] - t * dx).hypot(p[1] - a[1] - t * dy)
}

fn stroke_field(layer: &LayerToolpath, frame: &Frame) -> Result<StrokeField, RasterError> {
    if layer.extruding().next().is_none() {
        return Err(RasterError::EmptyLayer(layer.index));
    }
    let n = frame.len();
    let mut dist = vec![f64::INFINITY; n];
    let mut radius = vec![0.0; n];
    for seg in layer.extruding() {
        let a = frame.world_to_pixel(seg.start);
        let b = frame.world_to_pixel(seg.end);
        let r = seg.width * frame.scale / 2.0;
        let reach = r + 1.0;
        let c0 = (a[0].min(b[0]) - reach).floor().max(0.0) as usize;
        let r0 = (a[1].min(b[1]) - reach).floor().max(0.0) as usize;
        let c1 = ((a[0].max(b[0]) + reach).ceil().max(0.0) as usize).min(frame.width);
        let r1 = ((a[1].max(b[1]) + reach).ceil().max(0.0) as usize).min(frame.height);
        for row in r0..r1 {
            for col in c0..c1 {
                let d = seg_distance([col as f64 + 0.5, row as f64 + 0.5], a, b);
                let i = row * frame.width + col;
                if d < dist[i] {
                    dist[i] = d;
                    radius[i] = r;
                }
            }
        }
    }
    Ok(StrokeField { dist, radius })
}

/// Frame covering the layer's strokes plus a margin, snapped to whole pixels.
pub fn auto_frame(layers: &[&LayerToolpath], scale: f64) -> Result<Frame, RasterError> {
    if !(scale > 0.0) {
        return Err(RasterError::Parameter(format!("scale must be positive, got {scale}")));
    }
    let mut bounds = Bounds::empty();
    let mut half_width: f64 = 0.0;
    for layer in layers {
        for s in layer.extruding() {
            bounds.include(s.start);
            bounds.include(s.end);
            half_width = half_width.max(s.width / 2.0);
        }
    }
    if !bounds.min[0].is_finite() {
        return Err(RasterError::EmptyLayer(layers.first().map_or(0, |l| l.index)));
    }
    let pad = half_width + AUTO_FRAME_MARGIN_MM;
    let x0 = ((bounds.min[0] - pad) * scale).floor();
    let x1 = ((bounds.max[0] + pad) * scale).ceil();
    let y0 = ((bounds.min[1] - pad) * scale).floor();
    let y1 = ((bounds.max[1] + pad) * scale).ceil();
    Ok(Frame::new(
        (x1 - x0) as usize,
        (y1 - y0) as usize,
        scale,
        [x0 / scale, y1 / scale],
    )?)
}

/// Rasterizes one layer into an auto-fitted frame.
pub fn rasterize_layer(layer: &LayerToolpath, scale: f64, background: u8) -> Result<LayerImage, RasterError> {
    let frame = auto_frame(&[layer], scale)?;
    rasterize_layer_in(layer, frame, background)
}

/// Rasterizes one layer into the given frame.
pub fn rasterize_layer_in(layer: &LayerToolpath, frame: Frame, background: u8) -> Result<LayerImage, RasterError> {
    rasterize_stack_in(std::slice::from_ref(layer), frame, background)
}

/// Paints layers bottom to top, each occluding what lies beneath it.
pub fn rasterize_stack_in(layers: &[LayerToolpath], frame: Frame, background: u8) -> Result<LayerImage, RasterError> {
    if layers.is_empty() {
        return Err(RasterError::EmptyLayer(0));
    }
    let mut stack = StackCanvas::new(frame, background);
    for layer in layers {
        stack.add(layer)?;
    }
    Ok(stack.image())
}

/// Incremental bottom-to-top renderer: the image after `add`ing layers
/// `0..=i` equals `rasterize_stack_in(&layers[..=i], ..)`.
#[derive(Debug, Clone)]
pub struct StackCanvas {
    frame: Frame,
    canvas: Vec<f64>,
}

impl StackCanvas {
    pub fn new(frame: Frame, background: u8) -> Self {
        Self {
            frame,
            canvas: vec![f64::from(background); frame.len()],
        }
    }

    pub fn add(&mut self, layer: &LayerToolpath) -> Result<(), RasterError> {
        let field = stroke_field(layer, &self.frame)?;
        for (i, px) in self.canvas.iter_mut().enumerate() {
            let cov = field.coverage(i);
            if cov > 0.0 {
                *px = *px * (1.0 - cov) + field.intensity(i) * cov;
            }
        }
        Ok(())
    }

    pub fn image(&self) -> LayerImage {
        let pixels = self.canvas.iter().map(|v| v.round().clamp(0.0, 255.0) as u8).collect();
        LayerImage::from_pixels(self.frame, pixels).expect("canvas sized to frame")
    }
}

/// Paints one layer's strokes over an existing image in place.
pub fn paint_layer(img: &mut LayerImage, layer: &LayerToolpath) -> Result<(), RasterError> {
    let field = stroke_field(layer, &img.frame)?;
    for (i, px) in img.pixels_mut().iter_mut().enumerate() {
        let cov = field.coverage(i);
        if cov > 0.0 {
            let v = f64::from(*px) * (1.0 - cov) + field.intensity(i) * cov;
            *px = v.round().clamp(0.0, 255.0) as u8;
        }
    }
    Ok(())
}

/// Printed-region mask in an auto-fitted frame.
pub fn layer_mask(layer: &LayerToolpath, scale: f64, closing_radius_mm: f64) -> Result<RegionMask, RasterError> {
    let frame = auto_frame(&[layer], scale)?;
    layer_mask_in(layer, frame, closing_radius_mm)
}

/// Pixels touched by any stroke, morphologically closed with a disc of
/// `closing_radius_mm` to bridge inter-bead gaps.
pub fn layer_mask_in(layer: &LayerToolpath, frame: Frame, closing_radius_mm: f64) -> Result<RegionMask, RasterError> {
    if !(closing_radius_mm >= 0.0) {
        return Err(RasterError::Parameter(format!(
            "closing radius must be non-negative, got {closing_radius_mm}"
        )));
    }
    let field = stroke_field(layer, &frame)?;
    let bits: Vec<bool> = (0..frame.len()).map(|i| field.coverage(i) > 0.0).collect();
    let closed = close(&bits, frame.width, frame.height, closing_radius_mm * frame.scale);
    Ok(RegionMask::new(frame, closed)?)
}

fn disc_offsets(radius: f64) -> Vec<(isize, isize)> {
    let r = radius.floor() as isize;
    let mut out = Vec::new();
    for dy in -r..=r {
        for dx in -r..=r {
            if ((dx * dx + dy * dy) as f64) <= radius * radius {
                out.push((dx, dy));
            }
        }
    }
    out
}

/// Dilation followed by erosion. Outside the frame counts as set during the
/// erosion so the closing never removes pixels.
fn close(bits: &[bool], w: usize, h: usize, radius_px: f64) -> Vec<bool> {
    if radius_px < 1.0 {
        return bits.to_vec();
    }
    let offsets = disc_offsets(radius_px);
    let sample = |buf: &[bool], c: isize, r: isize, outside: bool| {
        if c < 0 || r < 0 || c >= w as isize || r >= h as isize {
            outside
        } else {
            buf[r as usize * w + c as usize]
        }
    };
    let mut dilated = vec![false; bits.len()];
    for r in 0..h as isize {
        for c in 0..w as isize {
            dilated[r as usize * w + c as usize] =
                offsets.iter().any(|&(dx, dy)| sample(bits, c + dx, r + dy, false));
        }
    }
    let mut out = vec![false; bits.len()];
    for r in 0..h as isize {
        for c in 0..w as isize {
            out[r as usize * w + c as usize] =
                offsets.iter().all(|&(dx, dy)| sample(&dilated, c + dx, r + dy, true));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gcode::ExtrusionSegment;
    use crate::geometry::{estimate_homography, warp_image};

    fn seg(a: [f64; 2], b: [f64; 2]) -> ExtrusionSegment {
        ExtrusionSegment {
            start: a,
            end: b,
            width: 0.4,
            feedrate: 1200.0,
            extruding: true,
            line_no: 0,
        }
    }

    fn layer(segs: Vec<ExtrusionSegment>) -> LayerToolpath {
        LayerToolpath::new(0, 0.2, segs)
    }

    /// Perimeter plus 0.4 mm-spaced rectilinear infill of a square.
    fn filled_square(side: f64) -> LayerToolpath {
        let mut segs = vec![
            seg([0.0, 0.0], [side, 0.0]),
            seg([side, 0.0], [side, side]),
            seg([side, side], [0.0, side]),
            seg([0.0, side], [0.0, 0.0]),
        ];
        let mut y = 0.4;
        while y < side - 0.2 {
            segs.push(seg([0.4, y], [side - 0.4, y]));
            y += 0.4;
        }
        layer(segs)
    }

    #[test]
    fn stroke_width_and_symmetry() {
        let scale = 6.67;
        // centerline y = 0 sits on the center of row 10
        let frame = Frame::new(80, 21, scale, [-1.0, 10.5 / scale]).unwrap();
        let l = layer(vec![seg([0.0, 0.0], [8.0, 0.0])]);
        let img = rasterize_layer_in(&l, frame, 0).unwrap();
        let col = 30;
        let profile: Vec<f64> = (0..21).map(|r| f64::from(img.get(col, r))).collect();
        for k in 1..10 {
            assert_eq!(profile[10 - k], profile[10 + k], "row offset {k}");
        }
        // coverage-weighted width, using the center as unit intensity
        let center = BEAD_CENTER_INTENSITY;
        let lit = profile.iter().filter(|&&v| v > 0.0).count();
        assert_eq!(lit, 3);
        let field = stroke_field(&l, &frame).unwrap();
        let width: f64 = (0..21).map(|r| field.coverage(r * 80 + col)).sum();
        assert!((width - 0.4 * scale).abs() < 1e-9, "width {width}");
        assert_eq!(profile[10], center);
    }

    #[test]
    fn empty_layer_errors() {
        let l = layer(vec![]);
        assert_eq!(rasterize_layer(&l, 6.67, 30), Err(RasterError::EmptyLayer(0)));
        assert!(layer_mask(&l, 6.67, 0.5).is_err());
    }

    #[test]
    fn deterministic() {
        let l = filled_square(10.0);
        let a = rasterize_layer(&l, 6.67, 30).unwrap();
        let b = rasterize_layer(&l, 6.67, 30).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn translation_equivariance_on_integral_offsets() {
        let scale = 8.0;
        let frame = Frame::new(120, 120, scale, [-2.0, 13.0]).unwrap();
        let l = layer(vec![seg([0.0, 0.0], [5.25, 3.5]), seg([5.25, 3.5], [1.0, 6.0])]);
        let (dx, dy) = (0.5, -0.75);
        let a = rasterize_layer_in(&l, frame, 30).unwrap();
        let b = rasterize_layer_in(&l.translated(dx, dy), frame, 30).unwrap();
        let (sc, sr) = ((dx * scale) as isize, (-dy * scale) as isize);
        for r in 0..120isize {
            for c in 0..120isize {
                let (c2, r2) = (c + sc, r + sr);
                if (0..120).contains(&c2) && (0..120).contains(&r2) {
                    assert_eq!(a.get(c as usize, r as usize), b.get(c2 as usize, r2 as usize));
                }
            }
        }
    }

    #[test]
    fn rotation_roundtrip() {
        let scale = 6.67;
        let l = filled_square(12.0);
        let frame = Frame::centered_square([6.0, 6.0], 12.0, scale).unwrap();
        let original = rasterize_layer_in(&l, frame, 30).unwrap();
        let (s, c) = std::f64::consts::FRAC_PI_4.sin_cos();
        let rot = |p: [f64; 2]| {
            let (x, y) = (p[0] - 6.0, p[1] - 6.0);
            [6.0 + c * x - s * y, 6.0 + s * x + c * y]
        };
        let rotated_layer = LayerToolpath::new(
            0,
            0.2,
            l.segments
                .iter()
                .map(|g| ExtrusionSegment {
                    start: rot(g.start),
                    end: rot(g.end),
                    ..*g
                })
                .collect(),
        );
        let rotated = rasterize_layer_in(&rotated_layer, frame, 30).unwrap();
        let world = [[0.0, 0.0], [12.0, 0.0], [12.0, 12.0], [0.0, 12.0]];
        let src = world.map(|p| frame.world_to_pixel(rot(p)));
        let dst = world.map(|p| frame.world_to_pixel(p));
        let h = estimate_homography(&src, &dst).unwrap();
        let back = warp_image(&rotated, &h, frame).unwrap();
        let (mut sum, mut n) = (0.0, 0usize);
        for r in 0..frame.height {
            for col in 0..frame.width {
                if back.is_valid(col, r) {
                    sum += (f64::from(back.get(col, r)) - f64::from(original.get(col, r))).abs();
                    n += 1;
                }
            }
        }
        let mae = sum / n as f64;
        assert!(mae < 8.0, "mae {mae}");
    }

    #[test]
    fn solid_square_mask_area() {
        let side = 30.0;
        let l = filled_square(side);
        let mask = layer_mask(&l, 6.67, 0.5).unwrap();
        let rel = (mask.area_mm2() - side * side).abs() / (side * side);
        assert!(rel < 0.05, "relative area error {rel}");
        assert_eq!(mask.component_count(), 1);
    }

    #[test]
    fn zero_closing_equals_thresholded_stroke() {
        let l = layer(vec![seg([0.0, 0.0], [6.0, 1.0])]);
        let img = rasterize_layer(&l, 6.67, 30).unwrap();
        let mask = layer_mask(&l, 6.67, 0.0).unwrap();
        let thresholded: Vec<bool> = img.pixels().iter().map(|&p| p > 30).collect();
        // sub-half coverage pixels round back to the background value
        let field = stroke_field(&l, &img.frame).unwrap();
        for (i, (&m, &t)) in mask.bits().iter().zip(&thresholded).enumerate() {
            if t {
                assert!(m);
            }
            if m && !t {
                assert!(field.coverage(i) * (field.intensity(i) - 30.0) < 0.5);
            }
        }
    }

    #[test]
    fn close_parallel_beads_merge() {
        // bead edges 0.6 mm apart
        let l = layer(vec![seg([0.0, 0.0], [8.0, 0.0]), seg([0.0, 1.0], [8.0, 1.0])]);
        assert_eq!(layer_mask(&l, 6.67, 0.0).unwrap().component_count(), 2);
        assert_eq!(layer_mask(&l, 6.67, 0.2).unwrap().component_count(), 2);
        assert_eq!(layer_mask(&l, 6.67, 0.5).unwrap().component_count(), 1);
    }

    #[test]
    fn mask_contains_lit_pixels() {
        let l = filled_square(6.0);
        let img = rasterize_layer(&l, 6.67, 30).unwrap();
        for radius in [0.0, 0.3, 0.5] {
            let mask = layer_mask(&l, 6.67, radius).unwrap();
            for (p, m) in img.pixels().iter().zip(mask.bits()) {
                if *p > 30 {
                    assert!(*m);
                }
            }
        }
    }

    #[test]
    fn stack_top_layer_occludes() {
        let frame = Frame::centered_square([0.0, 0.0], 3.0, 6.67).unwrap();
        let bottom = layer(vec![seg([-2.0, 0.0], [2.0, 0.0])]);
        let top = LayerToolpath::new(1, 0.4, vec![seg([0.0, -2.0], [0.0, 2.0])]);
        let img = rasterize_stack_in(&[bottom, top.clone()], frame, 30).unwrap();
        let only_top = rasterize_layer_in(&top, frame, 30).unwrap();
        let [c, r] = frame.world_to_pixel([0.0, 0.0]);
        assert_eq!(img.get(c as usize, r as usize), only_top.get(c as usize, r as usize));
    }
}
