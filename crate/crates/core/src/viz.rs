//! RGBA renderings of similarity maps, detections and metric comparisons.
//!
//! Heatmaps use a fixed 256-entry table indexed by `round(255 * s)`:
//! red at 0, yellow at the midpoint, green at 1 (see [`heat_color`]).

use crate::detect::AnomalyReport;
use crate::hog::HogConfig;
use crate::layer_image::LayerImage;
use crate::similarity::SimilarityMap;

/// An RGBA8 raster, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Rgba {
    pub width: usize,
    pub height: usize,
    pub data: Vec<u8>,
}

impl Rgba {
    pub fn new(width: usize, height: usize, fill: [u8; 4]) -> Self {
        Self {
            width,
            height,
            data: fill.repeat(width * height),
        }
    }

    pub fn get(&self, x: usize, y: usize) -> [u8; 4] {
        let i = 4 * (y * self.width + x);
        [self.data[i], self.data[i + 1], self.data[i + 2], self.data[i + 3]]
    }

    pub fn put(&mut self, x: usize, y: usize, c: [u8; 4]) {
        let i = 4 * (y * self.width + x);
        self.data[i..i + 4].copy_from_slice(&c);
    }

    fn blend(&mut self, x: usize, y: usize, c: [u8; 3], alpha: f64) {
        let i = 4 * (y * self.width + x);
        for k in 0..3 {
            let v = f64::from(self.data[i + k]) * (1.0 - alpha) + f64::from(c[k]) * alpha;
            self.data[i + k] = v.round() as u8;
        }
    }

    fn fill_rect(&mut self, x0: usize, y0: usize, x1: usize, y1: usize, c: [u8; 4]) {
        for y in y0..y1.min(self.height) {
            for x in x0..x1.min(self.width) {
                self.put(x, y, c);
            }
        }
    }
}

/// Table entry `i` of the heatmap palette.
pub fn heat_color(i: u8) -> [u8; 3] {
    let i = u16::from(i);
    if i < 128 {
        [255, (2 * i) as u8, 0]
    } else {
        [(255 - 2 * (i - 128)) as u8, 255, 0]
    }
}

/// Palette lookup for a similarity in `[0, 1]`.
pub fn similarity_color(s: f64) -> [u8; 3] {
    heat_color((s.clamp(0.0, 1.0) * 255.0).round() as u8)
}

/// Pixel tile `(x0, y0, x1, y1)` standing for block `(row, col)`: one cell
/// wide, centered on the block center, so tiles never overlap.
fn block_tile(cfg: &HogConfig, row: usize, col: usize) -> (usize, usize, usize, usize) {
    let cp = cfg.cell_px;
    let stride = cfg.block_stride_cells * cp;
    let half_block = cfg.block_px() / 2;
    let (cx, cy) = (col * stride + half_block, row * stride + half_block);
    (cx - cp / 2, cy - cp / 2, cx + cp - cp / 2, cy + cp - cp / 2)
}

/// Image-sized heatmap; invalid blocks and uncovered pixels are transparent.
pub fn heatmap(map: &SimilarityMap, width: usize, height: usize, cfg: &HogConfig) -> Rgba {
    let mut out = Rgba::new(width, height, [0, 0, 0, 0]);
    for r in 0..map.rows {
        for c in 0..map.cols {
            if let Some(s) = map.get(r, c) {
                let [red, g, b] = similarity_color(s);
                let (x0, y0, x1, y1) = block_tile(cfg, r, c);
                out.fill_rect(x0, y0, x1, y1, [red, g, b, 255]);
            }
        }
    }
    out
}

/// The captured view with anomalous blocks tinted red and each region's
/// bounding box outlined in yellow.
pub fn overlay(img: &LayerImage, report: &AnomalyReport, cfg: &HogConfig) -> Rgba {
    let (w, h) = (img.width(), img.height());
    let mut out = Rgba::new(w, h, [0, 0, 0, 255]);
    for y in 0..h {
        for x in 0..w {
            let v = img.get(x, y);
            out.put(x, y, [v, v, v, 255]);
        }
    }
    for region in &report.regions {
        for &(r, c) in &region.blocks {
            let (x0, y0, x1, y1) = block_tile(cfg, r, c);
            for y in y0..y1.min(h) {
                for x in x0..x1.min(w) {
                    out.blend(x, y, [255, 0, 0], 0.45);
                }
            }
        }
        let Some(bb) = region.bbox_mm else { continue };
        let a = img.frame.world_to_pixel([bb[0], bb[3]]);
        let b = img.frame.world_to_pixel([bb[2], bb[1]]);
        let clampx = |v: f64| (v.max(0.0) as usize).min(w.saturating_sub(1));
        let clampy = |v: f64| (v.max(0.0) as usize).min(h.saturating_sub(1));
        let (x0, y0, x1, y1) = (clampx(a[0]), clampy(a[1]), clampx(b[0] - 1.0), clampy(b[1] - 1.0));
        let yellow = [255, 230, 0, 255];
        for x in x0..=x1 {
            out.put(x, y0, yellow);
            out.put(x, y1, yellow);
        }
        for y in y0..=y1 {
            out.put(x0, y, yellow);
            out.put(x1, y, yellow);
        }
    }
    out
}

/// Case colors for comparison charts, cycled when there are more cases.
pub const CASE_COLORS: [[u8; 3]; 6] = [
    [31, 119, 180],
    [255, 127, 14],
    [44, 160, 44],
    [214, 39, 40],
    [148, 103, 189],
    [140, 86, 75],
];

/// One floating bar per (metric, case) spanning from the regular to the
/// failed anomaly ratio on a 0 to 100 % vertical axis; metrics are grouped left
/// to right in the order given.
pub fn comparison_chart(metrics: usize, cases: usize, ratios: &dyn Fn(usize, usize) -> Option<(f64, f64)>) -> Rgba {
    let (bar, gap, pad, plot_h) = (8usize, 12usize, 20usize, 300usize);
    let group = cases.max(1) * bar + gap;
    let width = 2 * pad + metrics.max(1) * group;
    let height = plot_h + 2 * pad;
    let mut out = Rgba::new(width, height, [255, 255, 255, 255]);
    let y_of = |pct: f64| pad + plot_h - ((pct.clamp(0.0, 100.0) / 100.0) * plot_h as f64).round() as usize;
    for tick in (0..=100).step_by(10) {
        let y = y_of(tick as f64);
        for x in pad..width - pad {
            out.put(x, y, [225, 225, 225, 255]);
        }
    }
    for m in 0..metrics {
        for c in 0..cases {
            let Some((regular, failed)) = ratios(m, c) else { continue };
            let [r, g, b] = CASE_COLORS[c % CASE_COLORS.len()];
            let x0 = pad + m * group + gap / 2 + c * bar;
            let (lo, hi) = (regular.min(failed), regular.max(failed));
            let (top, bottom) = (y_of(hi), y_of(lo));
            out.fill_rect(x0, top, x0 + bar - 1, bottom + 1, [r, g, b, 255]);
            if failed < regular {
                // hatch bars whose failed ratio is below the regular one
                for y in (top..=bottom).step_by(3) {
                    for x in x0..x0 + bar - 1 {
                        out.put(x, y, [255, 255, 255, 255]);
                    }
                }
            }
        }
    }
    for x in pad..width - pad {
        out.put(x, y_of(0.0), [0, 0, 0, 255]);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::similarity::Metric;

    #[test]
    fn palette_endpoints() {
        assert_eq!(heat_color(0), [255, 0, 0]);
        assert_eq!(heat_color(255), [1, 255, 0]);
        assert_eq!(similarity_color(0.5), heat_color(128));
        for i in 0..=255u8 {
            let [r, g, _] = heat_color(i);
            assert!(r >= 1 && (i < 128 || g == 255));
        }
    }

    #[test]
    fn heatmap_tiles_and_transparency() {
        let cfg = HogConfig::default();
        let map = SimilarityMap::new(1, 2, vec![1.0, 0.0], vec![true, false], Metric::Cosine);
        let img = heatmap(&map, 24, 16, &cfg);
        assert_eq!(img.get(8, 8), [1, 255, 0, 255]);
        assert_eq!(img.get(11, 11), [1, 255, 0, 255]);
        assert_eq!(img.get(16, 8)[3], 0);
        assert_eq!(img.get(0, 0)[3], 0);
    }

    #[test]
    fn chart_draws_bars() {
        let chart = comparison_chart(2, 1, &|m, _| Some(if m == 0 { (0.0, 50.0) } else { (10.0, 20.0) }));
        let blue = [31, 119, 180, 255];
        let count = chart.data.chunks(4).filter(|p| *p == blue).count();
        assert!(count > 0);
        assert_eq!(chart.height, 340);
    }
}
