//! Layer-wise anomaly detection for fused-filament 3D printing.
//!
//! A printed layer photographed from a fixed camera is rectified into a
//! top view, compared against a rendering of the same layer from its G-code,
//! and scored block by block with HOG descriptors and a similarity measure.

pub mod calibration;
pub mod cli;
pub mod config;
pub mod detect;
pub mod gcode;
pub mod geometry;
pub mod hog;
pub mod io;
pub mod layer_image;
pub mod manifest;
pub mod perturb;
pub mod raster;
pub mod sample;
pub mod similarity;
pub mod viz;

pub use gcode::{inject_snapshot_block, parse_gcode, GCodeProgram, LayerToolpath, SnapshotParams};
pub use geometry::{estimate_homography, warp_image, CameraModel, Homography};
pub use hog::{compute_hog, HogConfig, HogField};
pub use layer_image::{apply_mask, Frame, LayerImage, RegionMask};
pub use raster::{layer_mask, rasterize_layer};
pub use similarity::{similarity, similarity_map, Metric, SimilarityMap};
