//! Histogram-of-oriented-gradients descriptor fields.
//!
//! Pipeline: centered-difference gradients, unsigned orientation in
//! `[0°, 180°)`, per-cell histograms with linear interpolation between bin
//! centers, then overlapping `block_cells × block_cells` blocks, each
//! L2-normalized into one feature vector of the `N × M × k` field.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::layer_image::{Frame, LayerImage};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HogError {
    #[error("invalid HOG config: {0}")]
    InvalidConfig(String),
    #[error("image {width}x{height} is too small (need at least {min}x{min})")]
    TooSmall { width: usize, height: usize, min: usize },
    #[error("buffer length {got} does not match {width}x{height}")]
    BufferLength { got: usize, width: usize, height: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HogConfig {
    pub cell_px: usize,
    pub bins: usize,
    pub block_cells: usize,
    pub block_stride_cells: usize,
    pub norm_epsilon: f64,
}

impl Default for HogConfig {
    fn default() -> Self {
        Self {
            cell_px: 8,
            bins: 9,
            block_cells: 2,
            block_stride_cells: 1,
            norm_epsilon: 1e-6,
        }
    }
}

impl HogConfig {
    pub fn validate(&self) -> Result<(), HogError> {
        if self.cell_px < 2 || self.bins < 2 || self.block_cells < 1 || self.block_stride_cells < 1 {
            return Err(HogError::InvalidConfig(format!("{self:?}")));
        }
        if !(self.norm_epsilon > 0.0) {
            return Err(HogError::InvalidConfig("norm_epsilon must be positive".into()));
        }
        Ok(())
    }

    /// Descriptor length per block.
    pub fn block_len(&self) -> usize {
        self.block_cells * self.block_cells * self.bins
    }

    pub fn bin_width_deg(&self) -> f64 {
        180.0 / self.bins as f64
    }

    /// Side of one block in pixels.
    pub fn block_px(&self) -> usize {
        self.block_cells * self.cell_px
    }

    /// Physical side of one block at `scale` px/mm.
    pub fn block_size_mm(&self, scale: f64) -> f64 {
        self.block_px() as f64 / scale
    }
}

/// Per-pixel gradient magnitude and unsigned orientation (degrees).
#[derive(Debug, Clone, PartialEq)]
pub struct GradientField {
    pub width: usize,
    pub height: usize,
    pub magnitude: Vec<f64>,
    pub orientation: Vec<f64>,
}

/// Folds an angle in degrees into `[0, 180)`.
pub fn fold_orientation(deg: f64) -> f64 {
    let mut a = deg.rem_euclid(180.0);
    if a >= 180.0 {
        a -= 180.0;
    }
    a
}

pub fn gradients(img: &LayerImage) -> Result<GradientField, HogError> {
    gradients_from_values(&img.to_f64(), img.width(), img.height())
}

/// Centered differences `(I[x+1] - I[x-1]) / 2` with replicated borders.
pub fn gradients_from_values(values: &[f64], width: usize, height: usize) -> Result<GradientField, HogError> {
    if values.len() != width * height {
        return Err(HogError::BufferLength {
            got: values.len(),
            width,
            height,
        });
    }
    if width < 3 || height < 3 {
        return Err(HogError::TooSmall { width, height, min: 3 });
    }
    let at = |c: usize, r: usize| values[r * width + c];
    let mut magnitude = vec![0.0; values.len()];
    let mut orientation = vec![0.0; values.len()];
    for r in 0..height {
        let (ru, rd) = (r.saturating_sub(1), (r + 1).min(height - 1));
        for c in 0..width {
            let (cl, cr) = (c.saturating_sub(1), (c + 1).min(width - 1));
            let gx = (at(cr, r) - at(cl, r)) / 2.0;
            let gy = (at(c, rd) - at(c, ru)) / 2.0;
            let i = r * width + c;
            magnitude[i] = gx.hypot(gy);
            orientation[i] = fold_orientation(gy.atan2(gx).to_degrees());
        }
    }
    Ok(GradientField {
        width,
        height,
        magnitude,
        orientation,
    })
}

/// Grid of per-cell orientation histograms.
#[derive(Debug, Clone, PartialEq)]
pub struct CellGrid {
    pub rows: usize,
    pub cols: usize,
    pub bins: usize,
    pub hist: Vec<f64>,
}

impl CellGrid {
    pub fn cell(&self, row: usize, col: usize) -> &[f64] {
        let i = (row * self.cols + col) * self.bins;
        &self.hist[i..i + self.bins]
    }
}

/// Splits a unit vote at `orientation` between the two nearest bin centers.
pub fn bin_weights(orientation: f64, bins: usize) -> [(usize, f64); 2] {
    let pos = orientation / (180.0 / bins as f64) - 0.5;
    let k0 = pos.floor();
    let frac = pos - k0;
    let k0 = k0 as i64;
    let n = bins as i64;
    [
        (k0.rem_euclid(n) as usize, 1.0 - frac),
        ((k0 + 1).rem_euclid(n) as usize, frac),
    ]
}

pub fn cell_histograms(grad: &GradientField, cfg: &HogConfig) -> Result<CellGrid, HogError> {
    cfg.validate()?;
    if grad.width < cfg.cell_px || grad.height < cfg.cell_px {
        return Err(HogError::TooSmall {
            width: grad.width,
            height: grad.height,
            min: cfg.cell_px,
        });
    }
    let rows = grad.height / cfg.cell_px;
    let cols = grad.width / cfg.cell_px;
    let mut hist = vec![0.0; rows * cols * cfg.bins];
    for r in 0..rows * cfg.cell_px {
        let cr = r / cfg.cell_px;
        for c in 0..cols * cfg.cell_px {
            let i = r * grad.width + c;
            let mag = grad.magnitude[i];
            if mag == 0.0 {
                continue;
            }
            let base = (cr * cols + c / cfg.cell_px) * cfg.bins;
            for (bin, w) in bin_weights(grad.orientation[i], cfg.bins) {
                hist[base + bin] += mag * w;
            }
        }
    }
    Ok(CellGrid {
        rows,
        cols,
        bins: cfg.bins,
        hist,
    })
}

/// The `N × M × k` descriptor tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct HogField {
    pub rows: usize,
    pub cols: usize,
    pub config: HogConfig,
    blocks: Vec<f64>,
    /// Pixel support intact and nonzero gradient energy.
    block_valid: Vec<bool>,
    /// Every pixel under the block is valid (mask and warp coverage).
    block_support: Vec<bool>,
    /// Placement of the source image, when known.
    pub frame: Option<Frame>,
}

impl HogField {
    pub fn grid_dims(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn k(&self) -> usize {
        self.config.block_len()
    }

    pub fn block(&self, row: usize, col: usize) -> &[f64] {
        let k = self.k();
        let i = (row * self.cols + col) * k;
        &self.blocks[i..i + k]
    }

    pub fn blocks(&self) -> &[f64] {
        &self.blocks
    }

    pub fn is_valid(&self, row: usize, col: usize) -> bool {
        self.block_valid[row * self.cols + col]
    }

    pub fn has_support(&self, row: usize, col: usize) -> bool {
        self.block_support[row * self.cols + col]
    }

    pub fn valid_count(&self) -> usize {
        self.block_valid.iter().filter(|&&v| v).count()
    }

    /// Pixel rectangle `(x0, y0, x1, y1)` covered by a block, end exclusive.
    pub fn block_pixel_rect(&self, row: usize, col: usize) -> (usize, usize, usize, usize) {
        block_pixel_rect(&self.config, row, col)
    }

    /// JSON debug dump: grid dims, config and row-major block vectors.
    pub fn to_debug_json(&self) -> serde_json::Value {
        let k = self.k();
        let blocks: Vec<&[f64]> = self.blocks.chunks(k).collect();
        serde_json::json!({
            "grid_dims": [self.rows, self.cols],
            "config": self.config,
            "block_valid": self.block_valid,
            "blocks": blocks,
        })
    }

    fn set_support(&mut self, support: Vec<bool>) {
        for (v, s) in self.block_valid.iter_mut().zip(&support) {
            *v &= *s;
        }
        self.block_support = support;
    }
}

pub fn block_pixel_rect(cfg: &HogConfig, row: usize, col: usize) -> (usize, usize, usize, usize) {
    let step = cfg.block_stride_cells * cfg.cell_px;
    let size = cfg.block_px();
    let (x0, y0) = (col * step, row * step);
    (x0, y0, x0 + size, y0 + size)
}

pub fn block_descriptors(cells: &CellGrid, cfg: &HogConfig) -> Result<HogField, HogError> {
    cfg.validate()?;
    if cells.bins != cfg.bins {
        return Err(HogError::InvalidConfig(format!(
            "cell grid has {} bins, config {}",
            cells.bins, cfg.bins
        )));
    }
    let bc = cfg.block_cells;
    if cells.rows < bc || cells.cols < bc {
        return Err(HogError::TooSmall {
            width: cells.cols,
            height: cells.rows,
            min: bc,
        });
    }
    let stride = cfg.block_stride_cells;
    let rows = (cells.rows - bc) / stride + 1;
    let cols = (cells.cols - bc) / stride + 1;
    let k = cfg.block_len();
    let mut blocks = vec![0.0; rows * cols * k];
    let mut block_valid = vec![false; rows * cols];
    for br in 0..rows {
        for bcol in 0..cols {
            let out = &mut blocks[(br * cols + bcol) * k..][..k];
            let mut o = 0;
            for cr in 0..bc {
                for cc in 0..bc {
                    let cell = cells.cell(br * stride + cr, bcol * stride + cc);
                    out[o..o + cfg.bins].copy_from_slice(cell);
                    o += cfg.bins;
                }
            }
            let energy: f64 = out.iter().map(|v| v * v).sum();
            if energy > 0.0 {
                let norm = (energy + cfg.norm_epsilon * cfg.norm_epsilon).sqrt();
                out.iter_mut().for_each(|v| *v /= norm);
                block_valid[br * cols + bcol] = true;
            }
        }
    }
    Ok(HogField {
        rows,
        cols,
        config: *cfg,
        blocks,
        block_valid,
        block_support: vec![true; rows * cols],
        frame: None,
    })
}

/// Full descriptor field of a layer image.
pub fn compute_hog(img: &LayerImage, cfg: &HogConfig) -> Result<HogField, HogError> {
    let mut field = compute_hog_values(&img.to_f64(), img.width(), img.height(), img.validity(), cfg)?;
    field.frame = Some(img.frame);
    Ok(field)
}

/// Descriptor field of a raw floating-point intensity buffer.
pub fn compute_hog_values(
    values: &[f64],
    width: usize,
    height: usize,
    valid: Option<&[bool]>,
    cfg: &HogConfig,
) -> Result<HogField, HogError> {
    cfg.validate()?;
    let grad = gradients_from_values(values, width, height)?;
    let cells = cell_histograms(&grad, cfg)?;
    let mut field = block_descriptors(&cells, cfg)?;
    if let Some(valid) = valid {
        if valid.len() != width * height {
            return Err(HogError::BufferLength {
                got: valid.len(),
                width,
                height,
            });
        }
        let support = block_support(valid, width, field.rows, field.cols, cfg);
        field.set_support(support);
    }
    Ok(field)
}

/// A block is supported when every pixel under it is valid. Uses a summed
/// count table of invalid pixels.
fn block_support(valid: &[bool], width: usize, rows: usize, cols: usize, cfg: &HogConfig) -> Vec<bool> {
    let height = valid.len() / width;
    let mut sat = vec![0u32; (width + 1) * (height + 1)];
    for r in 0..height {
        let mut run = 0u32;
        for c in 0..width {
            run += u32::from(!valid[r * width + c]);
            sat[(r + 1) * (width + 1) + c + 1] = sat[r * (width + 1) + c + 1] + run;
        }
    }
    let count = |x0: usize, y0: usize, x1: usize, y1: usize| {
        let w1 = width + 1;
        sat[y1 * w1 + x1] + sat[y0 * w1 + x0] - sat[y0 * w1 + x1] - sat[y1 * w1 + x0]
    };
    let mut out = Vec::with_capacity(rows * cols);
    for br in 0..rows {
        for bc in 0..cols {
            let (x0, y0, x1, y1) = block_pixel_rect(cfg, br, bc);
            out.push(count(x0, y0, x1, y1) == 0);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn from_fn(w: usize, h: usize, f: impl Fn(usize, usize) -> f64) -> Vec<f64> {
        (0..w * h).map(|i| f(i % w, i / w)).collect()
    }

    #[test]
    fn constant_image_has_no_gradient() {
        let g = gradients_from_values(&vec![77.0; 100], 10, 10).unwrap();
        assert!(g.magnitude.iter().all(|&m| m == 0.0));
    }

    #[test]
    fn ramps() {
        let g = gradients_from_values(&from_fn(10, 10, |x, _| x as f64), 10, 10).unwrap();
        for r in 0..10 {
            for c in 1..9 {
                assert_eq!(g.magnitude[r * 10 + c], 1.0);
                assert_eq!(g.orientation[r * 10 + c], 0.0);
            }
        }
        let g = gradients_from_values(&from_fn(10, 10, |_, y| y as f64), 10, 10).unwrap();
        for r in 1..9 {
            for c in 0..10 {
                assert_eq!(g.magnitude[r * 10 + c], 1.0);
                assert_eq!(g.orientation[r * 10 + c], 90.0);
            }
        }
    }

    #[test]
    fn too_small_image() {
        assert!(matches!(
            gradients_from_values(&[0.0; 4], 2, 2),
            Err(HogError::TooSmall { .. })
        ));
    }

    fn single_vote(orientation: f64) -> Vec<f64> {
        let mut g = GradientField {
            width: 8,
            height: 8,
            magnitude: vec![0.0; 64],
            orientation: vec![0.0; 64],
        };
        g.magnitude[9] = 1.0;
        g.orientation[9] = orientation;
        cell_histograms(&g, &HogConfig::default()).unwrap().hist
    }

    #[test]
    fn vote_on_bin_center() {
        let h = single_vote(30.0);
        assert_eq!(h[1], 1.0);
        assert_eq!(h.iter().sum::<f64>(), 1.0);
    }

    #[test]
    fn vote_between_centers() {
        let h = single_vote(20.0);
        assert_eq!(h[0], 0.5);
        assert_eq!(h[1], 0.5);
    }

    #[test]
    fn vote_wraps_around() {
        let h = single_vote(5.0);
        assert!((h[0] - 0.75).abs() < 1e-12);
        assert!((h[8] - 0.25).abs() < 1e-12);
        let h = single_vote(175.0);
        assert!((h[8] - 0.75).abs() < 1e-12);
        assert!((h[0] - 0.25).abs() < 1e-12);
    }

    #[test]
    fn zero_magnitude_cell() {
        let g = GradientField {
            width: 8,
            height: 8,
            magnitude: vec![0.0; 64],
            orientation: vec![45.0; 64],
        };
        let h = cell_histograms(&g, &HogConfig::default()).unwrap();
        assert!(h.hist.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn block_grid_shape() {
        let cells = CellGrid {
            rows: 3,
            cols: 3,
            bins: 9,
            hist: vec![1.0; 81],
        };
        let f = block_descriptors(&cells, &HogConfig::default()).unwrap();
        assert_eq!(f.grid_dims(), (2, 2));
        assert_eq!(f.k(), 36);
        for r in 0..2 {
            for c in 0..2 {
                assert!(f.block(r, c).iter().all(|&v| (v - 1.0 / 6.0).abs() < 1e-9));
                assert!(f.is_valid(r, c));
            }
        }
    }

    #[test]
    fn zero_cells_give_invalid_zero_blocks() {
        let cells = CellGrid {
            rows: 3,
            cols: 3,
            bins: 9,
            hist: vec![0.0; 81],
        };
        let f = block_descriptors(&cells, &HogConfig::default()).unwrap();
        assert_eq!(f.valid_count(), 0);
        assert!(f.blocks().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn grid_smaller_than_block() {
        let cells = CellGrid {
            rows: 1,
            cols: 3,
            bins: 9,
            hist: vec![1.0; 27],
        };
        assert!(block_descriptors(&cells, &HogConfig::default()).is_err());
    }

    fn dominant_bins(field: &HogField) -> Vec<usize> {
        let bins = field.config.bins;
        let mut out = Vec::new();
        for r in 0..field.rows {
            for c in 0..field.cols {
                if !field.is_valid(r, c) {
                    continue;
                }
                let mut acc = vec![0.0; bins];
                for (i, v) in field.block(r, c).iter().enumerate() {
                    acc[i % bins] += v;
                }
                out.push(argmax_first(&acc));
            }
        }
        out
    }

    /// Brute-force per-pixel vote totals over the whole image.
    fn brute_dominant(values: &[f64], w: usize, h: usize) -> usize {
        let mut acc = [0.0; 9];
        for r in 0..h {
            for c in 0..w {
                let v = |cc: usize, rr: usize| values[rr * w + cc];
                let gx = (v((c + 1).min(w - 1), r) - v(c.saturating_sub(1), r)) / 2.0;
                let gy = (v(c, (r + 1).min(h - 1)) - v(c, r.saturating_sub(1))) / 2.0;
                let m = gx.hypot(gy);
                if m > 0.0 {
                    for (b, wt) in bin_weights(fold_orientation(gy.atan2(gx).to_degrees()), 9) {
                        acc[b] += m * wt;
                    }
                }
            }
        }
        argmax_first(&acc)
    }

    /// Lowest index among equal maxima: a 0° edge splits evenly between the
    /// bins centered at 10° and 170°, and counts for the 0° bin.
    fn argmax_first(v: &[f64]) -> usize {
        let mut best = 0;
        for i in 1..v.len() {
            if v[i] > v[best] {
                best = i;
            }
        }
        best
    }

    #[test]
    fn stripes_vote_for_their_gradient_direction() {
        let (w, h) = (40, 40);
        let stripe = |t: usize| if t % 8 < 4 { 200.0 } else { 40.0 };
        let vertical = from_fn(w, h, |x, _| stripe(x));
        let f = compute_hog_values(&vertical, w, h, None, &HogConfig::default()).unwrap();
        let expect = brute_dominant(&vertical, w, h);
        assert_eq!(expect, 0);
        assert!(dominant_bins(&f).iter().all(|&b| b == expect));

        let horizontal = from_fn(w, h, |_, y| stripe(y));
        let f = compute_hog_values(&horizontal, w, h, None, &HogConfig::default()).unwrap();
        let expect = brute_dominant(&horizontal, w, h);
        assert_eq!(expect, 4); // 90° sits on bin 4's center
        assert!(dominant_bins(&f).iter().all(|&b| b == expect));
    }

    #[test]
    fn constant_image_has_no_valid_blocks() {
        let f = compute_hog_values(&vec![50.0; 32 * 32], 32, 32, None, &HogConfig::default()).unwrap();
        assert_eq!(f.valid_count(), 0);
    }

    #[test]
    fn invalid_pixel_clears_covering_blocks() {
        let (w, h) = (32, 32);
        let img = from_fn(w, h, |x, y| ((x * 7 + y * 13) % 50) as f64);
        let mut valid = vec![true; w * h];
        valid[10 * w + 10] = false; // cell (1, 1)
        let f = compute_hog_values(&img, w, h, Some(&valid), &HogConfig::default()).unwrap();
        let unsupported: Vec<(usize, usize)> = (0..f.rows)
            .flat_map(|r| (0..f.cols).map(move |c| (r, c)))
            .filter(|&(r, c)| !f.has_support(r, c))
            .collect();
        assert_eq!(unsupported, vec![(0, 0), (0, 1), (1, 0), (1, 1)]);
        for (r, c) in unsupported {
            assert!(!f.is_valid(r, c));
        }
    }

    #[test]
    fn debug_json_shape() {
        let f = compute_hog_values(&from_fn(24, 24, |x, y| (x * y) as f64), 24, 24, None, &HogConfig::default()).unwrap();
        let j = f.to_debug_json();
        assert_eq!(j["grid_dims"], serde_json::json!([2, 2]));
        assert_eq!(j["blocks"].as_array().unwrap().len(), 4);
        assert_eq!(j["blocks"][0].as_array().unwrap().len(), 36);
    }
}
