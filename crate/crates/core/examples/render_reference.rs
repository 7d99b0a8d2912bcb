//! Render the reference image and printed-region mask for every layer of a
//! G-code program, cumulatively as the part grows.
//!
//! ```text
//! cargo run --example render_reference -- [input.gcode] [out_dir]
//! ```

use std::path::PathBuf;

use layerlens::geometry::ActivePlane;
use layerlens::io::{write_layer_image, write_mask};
use layerlens::raster::{layer_mask_in, StackCanvas, DEFAULT_BACKGROUND, DEFAULT_CLOSING_RADIUS_MM};
use layerlens::sample::SquarePart;
use layerlens::parse_gcode;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let text = match args.first() {
        Some(path) => std::fs::read_to_string(path)?,
        None => SquarePart {
            hole: 12.0,
            ..SquarePart::default()
        }
        .gcode(),
    };
    let out = args.get(1).map(PathBuf::from);
    let program = parse_gcode(&text)?;
    let frame = ActivePlane::default().top_view_frame(6.67)?;
    println!("top view {}x{} px at {} px/mm", frame.width, frame.height, frame.scale);

    let mut stack = StackCanvas::new(frame, DEFAULT_BACKGROUND);
    for layer in &program.layers {
        stack.add(layer)?;
        let img = stack.image();
        let mask = layer_mask_in(layer, frame, DEFAULT_CLOSING_RADIUS_MM)?;
        let bright = img.pixels().iter().filter(|&&v| v > 100).count();
        println!(
            "layer {:>3}: mask {:>8.1} mm^2 in {} component(s), {} bright px",
            layer.index,
            mask.area_mm2(),
            mask.component_count(),
            bright
        );
        if let Some(dir) = &out {
            write_layer_image(&dir.join(format!("ref_{}.png", layer.index)), &img)?;
            write_mask(&dir.join(format!("mask_{}.png", layer.index)), &mask)?;
        }
    }
    Ok(())
}
