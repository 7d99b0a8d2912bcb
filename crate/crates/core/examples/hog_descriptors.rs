//! HOG descriptors of a rendered layer and their photometric and geometric
//! behavior.
//!
//! ```text
//! cargo run --example hog_descriptors
//! ```

use layerlens::geometry::Homography;
use layerlens::hog::compute_hog_values;
use layerlens::raster::{auto_frame, rasterize_layer_in, DEFAULT_BACKGROUND};
use layerlens::sample::SquarePart;
use layerlens::{compute_hog, parse_gcode, similarity, warp_image, HogConfig, Metric};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let program = parse_gcode(&SquarePart::default().gcode())?;
    let layer = &program.layers[0];
    let frame = auto_frame(&[layer], 6.67)?;
    let img = rasterize_layer_in(layer, frame, DEFAULT_BACKGROUND)?;
    let cfg = HogConfig::default();
    let field = compute_hog(&img, &cfg)?;
    let (rows, cols) = field.grid_dims();
    println!("{}x{} px -> {rows}x{cols} blocks of {} values", frame.width, frame.height, field.k());
    println!("blocks with gradient energy: {}", field.valid_count());

    let (r, c) = (rows / 2, cols / 2);
    let block = field.block(r, c);
    println!("center block ({r},{c}) first cell: {:.3?}", &block[..cfg.bins]);

    let gained: Vec<f64> = img.to_f64().iter().map(|v| 1.2 * v).collect();
    let brighter = compute_hog_values(&gained, frame.width, frame.height, None, &cfg)?;
    let worst = field
        .blocks()
        .iter()
        .zip(brighter.blocks())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    println!("max descriptor change under 1.2x gain (unclipped): {worst:.2e}");

    let center = [frame.width as f64 / 2.0, frame.height as f64 / 2.0];
    let rotated = warp_image(&img, &Homography::rotation_about(center, 20f64.to_radians()), frame)?;
    let rfield = compute_hog(&rotated, &cfg)?;
    let s = similarity(block, rfield.block(r, c), Metric::Cosine)?;
    println!("center block cosine similarity after a 20 degree rotation: {s:.3}");
    Ok(())
}
