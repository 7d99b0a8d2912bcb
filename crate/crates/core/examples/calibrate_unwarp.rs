//! Calibrate a synthetic camera from the four bed markers, then rectify a
//! layer snapshot into the metric top view, with and without plane lifting.
//!
//! ```text
//! cargo run --example calibrate_unwarp -- [out_dir]
//! ```

use std::path::PathBuf;

use layerlens::calibration::{calibrate, camera_view, marker_image, quadrant_windows};
use layerlens::geometry::ActivePlane;
use layerlens::io::write_layer_image;
use layerlens::raster::{rasterize_layer_in, DEFAULT_BACKGROUND};
use layerlens::sample::SquarePart;
use layerlens::{parse_gcode, warp_image, CameraModel};

fn mean_abs_diff(a: &[u8], b: &[u8]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| (f64::from(x) - f64::from(y)).abs()).sum::<f64>() / a.len() as f64
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args().nth(1).map(PathBuf::from);
    let cam = CameraModel::look_at([10.0, -170.0, 260.0], [0.0, 0.0, 0.0], [0.0, 0.0, 1.0], 1500.0, (1280, 960))?;
    let plane = ActivePlane::default();
    let scale = 4.0;

    let bed = marker_image(&cam, &plane, 20)?;
    let cal = calibrate(&bed, &quadrant_windows(1280, 960), 60, &plane, scale)?.with_camera(&cam);
    println!("markers (px): {:?}", cal.markers_px.map(|p| [p[0].round(), p[1].round()]));
    println!("rms corner residual: {:.2e} px", cal.rms_residual_px);

    let part = SquarePart {
        layers: 20,
        ..SquarePart::default()
    };
    let program = parse_gcode(&part.gcode())?;
    let layer = program.layers.last().expect("sample has layers");
    let frame = cal.top_view_frame()?;
    let truth = rasterize_layer_in(layer, frame, DEFAULT_BACKGROUND)?;
    let shot = camera_view(&cam, &truth, &plane, layer.z, DEFAULT_BACKGROUND)?;

    let lifted = warp_image(&shot, &cal.layer_homography(layer.z)?, frame)?;
    let flat = warp_image(&shot, &cal.base_homography()?, frame)?;
    println!("layer {} at z={:.1} mm", layer.index, layer.z);
    println!("  mean |top view - truth| with plane lifting: {:.2}", mean_abs_diff(lifted.pixels(), truth.pixels()));
    println!("  mean |top view - truth| bed plane only:     {:.2}", mean_abs_diff(flat.pixels(), truth.pixels()));

    if let Some(dir) = out {
        write_layer_image(&dir.join("camera_bed.png"), &bed)?;
        write_layer_image(&dir.join("camera_layer.png"), &shot)?;
        write_layer_image(&dir.join("topview_lifted.png"), &lifted)?;
        write_layer_image(&dir.join("topview_flat.png"), &flat)?;
        layerlens::io::write_json(&dir.join("calibration.json"), &cal)?;
        println!("wrote images and calibration.json to {}", dir.display());
    }
    Ok(())
}
