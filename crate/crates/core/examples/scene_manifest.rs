//! Export the scene manifest consumed by the photorealistic reference
//! renderer, then validate it and check that its toolpaths still rasterize
//! like the G-code they came from.
//!
//! ```text
//! cargo run --example scene_manifest -- [manifest.json]
//! ```

use layerlens::calibration::{calibrate, marker_image, quadrant_windows};
use layerlens::geometry::ActivePlane;
use layerlens::manifest::{export_manifest, ExportParams};
use layerlens::raster::{auto_frame, rasterize_layer_in, DEFAULT_BACKGROUND};
use layerlens::sample::SquarePart;
use layerlens::{parse_gcode, CameraModel};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cam = CameraModel::look_at([0.0, -160.0, 240.0], [0.0, 0.0, 0.0], [0.0, 0.0, 1.0], 1400.0, (1280, 960))?;
    let plane = ActivePlane::default();
    let bed = marker_image(&cam, &plane, 20)?;
    let cal = calibrate(&bed, &quadrant_windows(1280, 960), 60, &plane, 6.67)?.with_camera(&cam);

    let program = parse_gcode(&SquarePart::default().gcode())?;
    let manifest = export_manifest(&program, Some(&cal), &ExportParams::default())?;
    manifest.validate_against(&program)?;
    let polylines: usize = manifest.layers.iter().map(|l| l.polylines.len()).sum();
    let points: usize = manifest.layers.iter().flat_map(|l| &l.polylines).map(|p| p.points.len()).sum();
    println!(
        "manifest v{}: {} layers, {polylines} polylines, {points} points, ring heights {:?}",
        manifest.version,
        manifest.layers.len(),
        manifest.light_ring.z_schedule
    );

    let replayed = manifest.toolpaths();
    let frame = auto_frame(&program.layers.iter().collect::<Vec<_>>(), 6.67)?;
    for (orig, back) in program.layers.iter().zip(&replayed) {
        let a = rasterize_layer_in(orig, frame, DEFAULT_BACKGROUND)?;
        let b = rasterize_layer_in(back, frame, DEFAULT_BACKGROUND)?;
        let mad = a.pixels().iter().zip(b.pixels()).map(|(&x, &y)| (f64::from(x) - f64::from(y)).abs()).sum::<f64>()
            / a.pixels().len() as f64;
        println!("layer {} mean abs raster difference after round trip: {mad:.3}", orig.index);
    }

    match std::env::args().nth(1) {
        Some(path) => {
            layerlens::io::write_json(std::path::Path::new(&path), &manifest)?;
            println!("wrote {path}");
        }
        None => println!("{}", serde_json::to_string_pretty(&manifest.camera)?),
    }
    Ok(())
}
