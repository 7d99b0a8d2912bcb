//! Grayscale rasters anchored to a metric world frame.
//!
//! Pixel `(col, row)` covers the square whose top-left corner sits at
//! continuous pixel coordinates `(col, row)`; its center is at
//! `(col + 0.5, row + 0.5)`. World X grows to the right and world Y grows
//! upward, so image rows run toward decreasing Y.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ImageError {
    #[error("frame mismatch: {0}")]
    FrameMismatch(String),
    #[error("invalid frame: {0}")]
    InvalidFrame(String),
    #[error("buffer length {got} does not match {width}x{height}")]
    BufferLength {
        got: usize,
        width: usize,
        height: usize,
    },
}

/// Placement of a pixel grid in world millimetres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub width: usize,
    pub height: usize,
    /// Pixels per millimetre.
    pub scale: f64,
    /// World coordinate (mm) of the top-left corner of pixel (0, 0).
    pub origin: [f64; 2],
}

impl Frame {
    pub fn new(width: usize, height: usize, scale: f64, origin: [f64; 2]) -> Result<Self, ImageError> {
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(ImageError::InvalidFrame(format!("scale must be positive, got {scale}")));
        }
        if width == 0 || height == 0 {
            return Err(ImageError::InvalidFrame("empty frame".into()));
        }
        Ok(Self {
            width,
            height,
            scale,
            origin,
        })
    }

    /// Square frame of side `2 * half_extent` mm centered on `center`.
    pub fn centered_square(center: [f64; 2], half_extent: f64, scale: f64) -> Result<Self, ImageError> {
        let side = (2.0 * half_extent * scale).round() as usize;
        Self::new(side, side, scale, [center[0] - half_extent, center[1] + half_extent])
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// World mm → continuous pixel coordinates.
    pub fn world_to_pixel(&self, p: [f64; 2]) -> [f64; 2] {
        [
            (p[0] - self.origin[0]) * self.scale,
            (self.origin[1] - p[1]) * self.scale,
        ]
    }

    /// Continuous pixel coordinates → world mm.
    pub fn pixel_to_world(&self, p: [f64; 2]) -> [f64; 2] {
        [
            self.origin[0] + p[0] / self.scale,
            self.origin[1] - p[1] / self.scale,
        ]
    }

    pub fn same_grid(&self, other: &Frame) -> bool {
        self.width == other.width
            && self.height == other.height
            && (self.scale - other.scale).abs() <= 1e-12 * self.scale
            && (self.origin[0] - other.origin[0]).abs() <= 1e-9
            && (self.origin[1] - other.origin[1]).abs() <= 1e-9
    }

    fn check_same(&self, other: &Frame) -> Result<(), ImageError> {
        if self.same_grid(other) {
            Ok(())
        } else {
            Err(ImageError::FrameMismatch(format!(
                "{}x{} @ {} px/mm {:?} vs {}x{} @ {} px/mm {:?}",
                self.width,
                self.height,
                self.scale,
                self.origin,
                other.width,
                other.height,
                other.scale,
                other.origin
            )))
        }
    }
}

/// An 8-bit grayscale layer image with optional per-pixel validity.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerImage {
    pub frame: Frame,
    pixels: Vec<u8>,
    valid: Option<Vec<bool>>,
}

impl LayerImage {
    pub fn filled(frame: Frame, value: u8) -> Self {
        Self {
            frame,
            pixels: vec![value; frame.len()],
            valid: None,
        }
    }

    pub fn from_pixels(frame: Frame, pixels: Vec<u8>) -> Result<Self, ImageError> {
        if pixels.len() != frame.len() {
            return Err(ImageError::BufferLength {
                got: pixels.len(),
                width: frame.width,
                height: frame.height,
            });
        }
        Ok(Self {
            frame,
            pixels,
            valid: None,
        })
    }

    pub fn with_validity(mut self, valid: Vec<bool>) -> Result<Self, ImageError> {
        if valid.len() != self.frame.len() {
            return Err(ImageError::BufferLength {
                got: valid.len(),
                width: self.frame.width,
                height: self.frame.height,
            });
        }
        self.valid = Some(valid);
        Ok(self)
    }

    pub fn width(&self) -> usize {
        self.frame.width
    }

    pub fn height(&self) -> usize {
        self.frame.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn pixels_mut(&mut self) -> &mut [u8] {
        &mut self.pixels
    }

    pub fn validity(&self) -> Option<&[bool]> {
        self.valid.as_deref()
    }

    pub fn clear_validity(&mut self) {
        self.valid = None;
    }

    #[inline]
    pub fn get(&self, col: usize, row: usize) -> u8 {
        self.pixels[row * self.frame.width + col]
    }

    #[inline]
    pub fn set(&mut self, col: usize, row: usize, v: u8) {
        let w = self.frame.width;
        self.pixels[row * w + col] = v;
    }

    #[inline]
    pub fn is_valid(&self, col: usize, row: usize) -> bool {
        self.valid
            .as_ref()
            .map_or(true, |v| v[row * self.frame.width + col])
    }

    pub fn valid_count(&self) -> usize {
        self.valid
            .as_ref()
            .map_or(self.frame.len(), |v| v.iter().filter(|&&b| b).count())
    }

    /// Pixel values as `f64`, row-major.
    pub fn to_f64(&self) -> Vec<f64> {
        self.pixels.iter().map(|&p| f64::from(p)).collect()
    }

    /// Multiplies intensities by `gain`, saturating at 255.
    pub fn scaled(&self, gain: f64) -> Self {
        let mut out = self.clone();
        for p in &mut out.pixels {
            *p = (f64::from(*p) * gain).round().clamp(0.0, 255.0) as u8;
        }
        out
    }
}

/// Binary printed-region mask sharing a [`Frame`] with its layer image.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionMask {
    pub frame: Frame,
    bits: Vec<bool>,
}

impl RegionMask {
    pub fn new(frame: Frame, bits: Vec<bool>) -> Result<Self, ImageError> {
        if bits.len() != frame.len() {
            return Err(ImageError::BufferLength {
                got: bits.len(),
                width: frame.width,
                height: frame.height,
            });
        }
        Ok(Self { frame, bits })
    }

    pub fn full(frame: Frame, value: bool) -> Self {
        Self {
            frame,
            bits: vec![value; frame.len()],
        }
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    #[inline]
    pub fn get(&self, col: usize, row: usize) -> bool {
        self.bits[row * self.frame.width + col]
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn area_mm2(&self) -> f64 {
        self.count() as f64 / (self.frame.scale * self.frame.scale)
    }

    /// Number of 8-connected components.
    pub fn component_count(&self) -> usize {
        let (w, h) = (self.frame.width, self.frame.height);
        let mut seen = vec![false; self.bits.len()];
        let mut count = 0;
        let mut stack = Vec::new();
        for start in 0..self.bits.len() {
            if !self.bits[start] || seen[start] {
                continue;
            }
            count += 1;
            seen[start] = true;
            stack.push(start);
            while let Some(i) = stack.pop() {
                let (c, r) = ((i % w) as isize, (i / w) as isize);
                for dr in -1..=1 {
                    for dc in -1..=1 {
                        let (nc, nr) = (c + dc, r + dr);
                        if nc < 0 || nr < 0 || nc >= w as isize || nr >= h as isize {
                            continue;
                        }
                        let j = nr as usize * w + nc as usize;
                        if self.bits[j] && !seen[j] {
                            seen[j] = true;
                            stack.push(j);
                        }
                    }
                }
            }
        }
        count
    }
}

/// Marks pixels outside the mask invalid; intensities are left untouched.
pub fn apply_mask(img: &LayerImage, mask: &RegionMask) -> Result<LayerImage, ImageError> {
    img.frame.check_same(&mask.frame)?;
    let valid = match img.validity() {
        Some(v) => v.iter().zip(&mask.bits).map(|(&a, &b)| a && b).collect(),
        None => mask.bits.clone(),
    };
    img.clone().with_validity(valid)
}
