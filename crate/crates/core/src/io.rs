//! PNG and JSON file helpers. Every write goes to a temporary file in the
//! destination directory and is renamed into place, so readers polling the
//! directory never observe partial files.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{de::DeserializeOwned, Deserialize, Serialize};
use thiserror::Error;

use crate::layer_image::{Frame, ImageError, LayerImage, RegionMask};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Png {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("{path}: {source}")]
    Frame {
        path: PathBuf,
        #[source]
        source: ImageError,
    },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> IoError + '_ {
    move |source| IoError::Io {
        path: path.to_owned(),
        source,
    }
}

/// Writes `bytes` to `path` through a sibling temporary file and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), IoError> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = dir.join(format!(".{name}.{}.tmp", std::process::id()));
    fs::write(&tmp, bytes).map_err(io_err(&tmp))?;
    fs::rename(&tmp, path).map_err(io_err(path))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), IoError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|source| IoError::Json {
        path: path.to_owned(),
        source,
    })?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, IoError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|source| IoError::Json {
        path: path.to_owned(),
        source,
    })
}

fn encode_png(path: &Path, w: usize, h: usize, data: &[u8], color: image::ExtendedColorType) -> Result<(), IoError> {
    use image::ImageEncoder;
    let mut buf = Vec::new();
    image::codecs::png::PngEncoder::new(&mut buf)
        .write_image(data, w as u32, h as u32, color)
        .map_err(|source| IoError::Png {
            path: path.to_owned(),
            source,
        })?;
    write_atomic(path, &buf)
}

/// 8-bit grayscale PNG.
pub fn write_gray_png(path: &Path, w: usize, h: usize, pixels: &[u8]) -> Result<(), IoError> {
    encode_png(path, w, h, pixels, image::ExtendedColorType::L8)
}

/// 8-bit RGBA PNG.
pub fn write_rgba_png(path: &Path, w: usize, h: usize, pixels: &[u8]) -> Result<(), IoError> {
    encode_png(path, w, h, pixels, image::ExtendedColorType::Rgba8)
}

/// Reads any PNG as 8-bit luma: `(width, height, pixels)`.
pub fn read_gray_png(path: &Path) -> Result<(usize, usize, Vec<u8>), IoError> {
    let img = image::open(path).map_err(|source| IoError::Png {
        path: path.to_owned(),
        source,
    })?;
    let g = img.into_luma8();
    let (w, h) = g.dimensions();
    Ok((w as usize, h as usize, g.into_raw()))
}

/// Placement record stored next to a top-view PNG.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub layer: usize,
    pub z: f64,
    pub scale: f64,
    pub origin: [f64; 2],
    pub width: usize,
    pub height: usize,
}

impl Sidecar {
    pub fn new(layer: usize, z: f64, frame: &Frame) -> Self {
        Self {
            layer,
            z,
            scale: frame.scale,
            origin: frame.origin,
            width: frame.width,
            height: frame.height,
        }
    }

    pub fn frame(&self) -> Result<Frame, ImageError> {
        Frame::new(self.width, self.height, self.scale, self.origin)
    }
}

/// `foo.png` → `foo.json`.
pub fn sidecar_path(png: &Path) -> PathBuf {
    png.with_extension("json")
}

/// Loads a grayscale PNG into `frame`, whose dimensions must match.
pub fn read_layer_image(path: &Path, frame: Frame) -> Result<LayerImage, IoError> {
    let (w, h, px) = read_gray_png(path)?;
    if (w, h) != (frame.width, frame.height) {
        return Err(IoError::Frame {
            path: path.to_owned(),
            source: ImageError::FrameMismatch(format!("{w}x{h} image, expected {}x{}", frame.width, frame.height)),
        });
    }
    LayerImage::from_pixels(frame, px).map_err(|source| IoError::Frame {
        path: path.to_owned(),
        source,
    })
}

/// Loads a top-view PNG using the frame recorded in its sidecar.
pub fn read_top_view(path: &Path) -> Result<(LayerImage, Sidecar), IoError> {
    let side: Sidecar = read_json(&sidecar_path(path))?;
    let frame = side.frame().map_err(|source| IoError::Frame {
        path: path.to_owned(),
        source,
    })?;
    Ok((read_layer_image(path, frame)?, side))
}

/// Mask PNG: nonzero pixels are inside.
pub fn read_mask(path: &Path, frame: Frame) -> Result<RegionMask, IoError> {
    let img = read_layer_image(path, frame)?;
    RegionMask::new(frame, img.pixels().iter().map(|&p| p > 0).collect()).map_err(|source| IoError::Frame {
        path: path.to_owned(),
        source,
    })
}

pub fn write_mask(path: &Path, mask: &RegionMask) -> Result<(), IoError> {
    let px: Vec<u8> = mask.bits().iter().map(|&b| if b { 255 } else { 0 }).collect();
    write_gray_png(path, mask.frame.width, mask.frame.height, &px)
}

pub fn write_layer_image(path: &Path, img: &LayerImage) -> Result<(), IoError> {
    write_gray_png(path, img.width(), img.height(), img.pixels())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn png_roundtrip_and_sidecar() {
        let dir = tempfile::tempdir().unwrap();
        let frame = Frame::new(5, 3, 2.0, [-1.0, 1.0]).unwrap();
        let img = LayerImage::from_pixels(frame, (0..15).map(|i| i * 17).collect()).unwrap();
        let png = dir.path().join("ref_0.png");
        write_layer_image(&png, &img).unwrap();
        write_json(&sidecar_path(&png), &Sidecar::new(0, 0.2, &frame)).unwrap();
        let (back, side) = read_top_view(&png).unwrap();
        assert_eq!(back, img);
        assert_eq!(side.z, 0.2);
        let leftovers: Vec<_> = fs::read_dir(dir.path())
            .unwrap()
            .filter(|e| e.as_ref().unwrap().file_name().to_string_lossy().ends_with(".tmp"))
            .collect();
        assert!(leftovers.is_empty());
    }

    #[test]
    fn mask_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let frame = Frame::new(4, 2, 1.0, [0.0, 0.0]).unwrap();
        let mask = RegionMask::new(frame, vec![true, false, true, true, false, false, true, false]).unwrap();
        let p = dir.path().join("m.png");
        write_mask(&p, &mask).unwrap();
        assert_eq!(read_mask(&p, frame).unwrap(), mask);
        let other = Frame::new(2, 4, 1.0, [0.0, 0.0]).unwrap();
        assert!(matches!(read_mask(&p, other), Err(IoError::Frame { .. })));
    }

    #[test]
    fn identical_writes_are_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let (a, b) = (dir.path().join("a.png"), dir.path().join("b.png"));
        write_gray_png(&a, 3, 3, &[9; 9]).unwrap();
        write_gray_png(&b, 3, 3, &[9; 9]).unwrap();
        assert_eq!(fs::read(a).unwrap(), fs::read(b).unwrap());
    }
}
