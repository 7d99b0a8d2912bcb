//! Synthetic print failures applied to top-view layer images.
//!
//! Each generator returns the damaged image together with the world-space
//! footprint of the damage, so experiments can check both detection and
//! localization without real failed prints.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::gcode::{ExtrusionSegment, LayerToolpath};
use crate::layer_image::LayerImage;
use crate::raster::{paint_layer, RasterError, DEFAULT_BACKGROUND};

/// A failure category with its parameters. Positions and sizes are in mm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Defect {
    /// Material missing from a square patch.
    ErasePatch { center: [f64; 2], size: f64 },
    /// A featureless lump of excess material.
    Blob { center: [f64; 2], radius: f64 },
    /// A square area where the layer failed to form, covered by loose
    /// spaghetti strands.
    Strands { center: [f64; 2], size: f64, count: usize, seed: u64 },
    /// The whole view displaced.
    Translate { dx: f64, dy: f64 },
    /// A straight unfilled gap through a wall or fill.
    ThinWallGap { start: [f64; 2], end: [f64; 2], width: f64 },
    /// Everything above `split_y` displaced sideways by `dx`.
    LayerShift { split_y: f64, dx: f64 },
}

impl Defect {
    pub fn name(&self) -> &'static str {
        match self {
            Defect::ErasePatch { .. } => "erase_patch",
            Defect::Blob { .. } => "blob",
            Defect::Strands { .. } => "strands",
            Defect::Translate { .. } => "translate",
            Defect::ThinWallGap { .. } => "thin_wall_gap",
            Defect::LayerShift { .. } => "layer_shift",
        }
    }

    /// One instance of each category scaled to a square part of side
    /// `size` centered on `center`.
    pub fn standard_set(center: [f64; 2], size: f64) -> Vec<Defect> {
        let [cx, cy] = center;
        vec![
            Defect::ErasePatch {
                center: [cx - size / 5.0, cy + size / 5.0],
                size: size / 3.0,
            },
            Defect::Blob {
                center: [cx + size / 5.0, cy - size / 5.0],
                radius: size / 6.0,
            },
            Defect::Strands {
                center: [cx + size / 5.0, cy + size / 5.0],
                size: size / 2.5,
                count: 8,
                seed: 7,
            },
            Defect::Translate {
                dx: size / 8.0,
                dy: -size / 16.0,
            },
            Defect::ThinWallGap {
                start: [cx - size * 0.45, cy - size / 4.0],
                end: [cx + size * 0.45, cy - size / 4.0],
                width: size / 8.0,
            },
            Defect::LayerShift {
                split_y: cy,
                dx: size / 8.0,
            },
        ]
    }

    /// Damages `img`; the footprint is the damaged area `[x0, y0, x1, y1]`
    /// in world mm.
    pub fn apply(&self, img: &LayerImage) -> Result<Perturbed, RasterError> {
        let mut out = img.clone();
        let f = img.frame;
        let footprint = match *self {
            Defect::ErasePatch { center, size } => {
                let h = size / 2.0;
                let rect = [center[0] - h, center[1] - h, center[0] + h, center[1] + h];
                fill_rect(&mut out, rect, DEFAULT_BACKGROUND);
                rect
            }
            Defect::Blob { center, radius } => {
                for row in 0..f.height {
                    for col in 0..f.width {
                        let p = f.pixel_to_world([col as f64 + 0.5, row as f64 + 0.5]);
                        let d = (p[0] - center[0]).hypot(p[1] - center[1]);
                        let cov = ((radius - d) * f.scale + 0.5).clamp(0.0, 1.0);
                        if cov > 0.0 {
                            let v = f64::from(out.get(col, row)) * (1.0 - cov) + 200.0 * cov;
                            out.set(col, row, v.round() as u8);
                        }
                    }
                }
                [center[0] - radius, center[1] - radius, center[0] + radius, center[1] + radius]
            }
            Defect::Strands { center, size, count, seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let h = size / 2.0;
                fill_rect(&mut out, [center[0] - h, center[1] - h, center[0] + h, center[1] + h], DEFAULT_BACKGROUND);
                let mut segments = Vec::new();
                for _ in 0..count {
                    let mut p = [
                        center[0] + rng.gen_range(-h..h),
                        center[1] + rng.gen_range(-h..h),
                    ];
                    for _ in 0..6 {
                        let q = [
                            (p[0] + rng.gen_range(-h..h)).clamp(center[0] - h, center[0] + h),
                            (p[1] + rng.gen_range(-h..h)).clamp(center[1] - h, center[1] + h),
                        ];
                        segments.push(ExtrusionSegment {
                            start: p,
                            end: q,
                            width: 0.5,
                            feedrate: 0.0,
                            extruding: true,
                            line_no: 0,
                        });
                        p = q;
                    }
                }
                paint_layer(&mut out, &LayerToolpath::new(0, 0.0, segments))?;
                [center[0] - h - 0.25, center[1] - h - 0.25, center[0] + h + 0.25, center[1] + h + 0.25]
            }
            Defect::Translate { dx, dy } => {
                shift_where(&mut out, img, dx, dy, |_| true);
                let tl = f.pixel_to_world([0.0, 0.0]);
                let br = f.pixel_to_world([f.width as f64, f.height as f64]);
                [tl[0], br[1], br[0], tl[1]]
            }
            Defect::ThinWallGap { start, end, width } => {
                let seg = ExtrusionSegment {
                    start,
                    end,
                    width,
                    feedrate: 0.0,
                    extruding: true,
                    line_no: 0,
                };
                for row in 0..f.height {
                    for col in 0..f.width {
                        let p = f.pixel_to_world([col as f64 + 0.5, row as f64 + 0.5]);
                        if point_segment_distance(p, seg.start, seg.end) <= width / 2.0 {
                            out.set(col, row, DEFAULT_BACKGROUND);
                        }
                    }
                }
                let h = width / 2.0;
                [
                    start[0].min(end[0]) - h,
                    start[1].min(end[1]) - h,
                    start[0].max(end[0]) + h,
                    start[1].max(end[1]) + h,
                ]
            }
            Defect::LayerShift { split_y, dx } => {
                shift_where(&mut out, img, dx, 0.0, |p| p[1] >= split_y);
                let tl = f.pixel_to_world([0.0, 0.0]);
                let br = f.pixel_to_world([f.width as f64, f.height as f64]);
                [tl[0], split_y, br[0], tl[1]]
            }
        };
        Ok(Perturbed {
            image: out,
            footprint_mm: footprint,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Perturbed {
    pub image: LayerImage,
    pub footprint_mm: [f64; 4],
}

fn point_segment_distance(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let len2 = dx * dx + dy * dy;
    let t = if len2 > 0.0 {
        (((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (p[0] - a[0] - t * dx).hypot(p[1] - a[1] - t * dy)
}

fn fill_rect(img: &mut LayerImage, rect: [f64; 4], value: u8) {
    let f = img.frame;
    for row in 0..f.height {
        for col in 0..f.width {
            let p = f.pixel_to_world([col as f64 + 0.5, row as f64 + 0.5]);
            if p[0] >= rect[0] && p[0] <= rect[2] && p[1] >= rect[1] && p[1] <= rect[3] {
                img.set(col, row, value);
            }
        }
    }
}

/// Nearest-pixel translation by whole pixels of the pixels selected by `pick`
/// (tested at the destination); uncovered pixels get the background level.
fn shift_where(out: &mut LayerImage, src: &LayerImage, dx: f64, dy: f64, pick: impl Fn([f64; 2]) -> bool) {
    let f = src.frame;
    let sc = (dx * f.scale).round() as isize;
    let sr = (-dy * f.scale).round() as isize;
    for row in 0..f.height {
        for col in 0..f.width {
            let p = f.pixel_to_world([col as f64 + 0.5, row as f64 + 0.5]);
            if !pick(p) {
                continue;
            }
            let (c, r) = (col as isize - sc, row as isize - sr);
            let v = if c >= 0 && r >= 0 && (c as usize) < f.width && (r as usize) < f.height {
                src.get(c as usize, r as usize)
            } else {
                DEFAULT_BACKGROUND
            };
            out.set(col, row, v);
        }
    }
}

/// A healthy capture of the reference: global gain plus Gaussian sensor
/// noise, deterministic in `seed`.
pub fn regular_variant(img: &LayerImage, gain: f64, noise_sigma: f64, seed: u64) -> LayerImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, noise_sigma.max(0.0)).expect("finite sigma");
    let mut out = img.clone();
    for p in out.pixels_mut() {
        let v = f64::from(*p) * gain + noise.sample(&mut rng);
        *p = v.round().clamp(0.0, 255.0) as u8;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layer_image::Frame;

    fn canvas() -> LayerImage {
        let f = Frame::new(40, 40, 2.0, [0.0, 20.0]).unwrap();
        let px = (0..1600).map(|i| ((i * 37) % 200 + 40) as u8).collect();
        LayerImage::from_pixels(f, px).unwrap()
    }

    fn changed(a: &LayerImage, b: &LayerImage) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for r in 0..a.height() {
            for c in 0..a.width() {
                if a.get(c, r) != b.get(c, r) {
                    out.push((c, r));
                }
            }
        }
        out
    }

    #[test]
    fn local_defects_stay_inside_footprint() {
        let img = canvas();
        for d in Defect::standard_set([10.0, 10.0], 16.0) {
            if matches!(d, Defect::Translate { .. }) {
                continue;
            }
            let out = d.apply(&img).unwrap();
            let diff = changed(&img, &out.image);
            assert!(!diff.is_empty(), "{}", d.name());
            let fp = out.footprint_mm;
            for (c, r) in diff {
                let p = img.frame.pixel_to_world([c as f64 + 0.5, r as f64 + 0.5]);
                assert!(p[0] >= fp[0] - 0.5 && p[0] <= fp[2] + 0.5 && p[1] >= fp[1] - 0.5 && p[1] <= fp[3] + 0.5, "{}", d.name());
            }
        }
    }

    #[test]
    fn translate_moves_content() {
        let img = canvas();
        let out = Defect::Translate { dx: 1.0, dy: 0.0 }.apply(&img).unwrap().image;
        assert_eq!(out.get(12, 5), img.get(10, 5));
        assert_eq!(out.get(0, 5), DEFAULT_BACKGROUND);
    }

    #[test]
    fn regular_variant_is_deterministic() {
        let img = canvas();
        assert_eq!(regular_variant(&img, 1.1, 2.0, 3), regular_variant(&img, 1.1, 2.0, 3));
        assert_eq!(regular_variant(&img, 1.0, 0.0, 3), img);
    }

    #[test]
    fn defect_json_tagged() {
        let d = Defect::Blob { center: [1.0, 2.0], radius: 3.0 };
        let j = serde_json::to_string(&d).unwrap();
        assert!(j.contains("\"kind\":\"blob\""));
        assert_eq!(serde_json::from_str::<Defect>(&j).unwrap(), d);
    }
}
