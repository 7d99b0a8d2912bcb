//! End-to-end detection on synthetic failures: render a reference layer,
//! damage it with each defect generator, and report the anomalous-area ratio,
//! discriminative power and localization for a set of metrics.
//!
//! ```text
//! cargo run --release --example detect_defects -- [out_dir] [noise_sigma]
//! ```
//! With `noise_sigma > 0` the regular and failed captures also get a 5 %
//! gain change and Gaussian sensor noise.

use std::path::PathBuf;

use layerlens::detect::{discriminative_power, DescriptorPair, DEFAULT_THRESHOLD};
use layerlens::io::{write_layer_image, write_rgba_png};
use layerlens::perturb::{regular_variant, Defect};
use layerlens::raster::{auto_frame, layer_mask_in, rasterize_layer_in, DEFAULT_BACKGROUND, DEFAULT_CLOSING_RADIUS_MM};
use layerlens::sample::SquarePart;
use layerlens::viz::{heatmap, overlay};
use layerlens::{parse_gcode, HogConfig, LayerImage, Metric};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args().nth(1).filter(|s| !s.is_empty()).map(PathBuf::from);
    let sigma: f64 = std::env::args().nth(2).map_or(Ok(0.0), |s| s.parse())?;
    let part = SquarePart {
        layers: 1,
        hole: 10.0,
        ..SquarePart::default()
    };
    let program = parse_gcode(&part.gcode())?;
    let layer = &program.layers[0];
    let frame = auto_frame(&[layer], 6.67)?;
    let reference = rasterize_layer_in(layer, frame, DEFAULT_BACKGROUND)?;
    let mask = layer_mask_in(layer, frame, DEFAULT_CLOSING_RADIUS_MM)?;
    let hog = HogConfig::default();
    let capture = |img: &LayerImage, seed| {
        if sigma > 0.0 {
            regular_variant(img, 1.05, sigma, seed)
        } else {
            img.clone()
        }
    };

    let regular = DescriptorPair::new(&capture(&reference, 1), &reference, &mask, &hog)?;
    let metrics = Metric::SELECTED;
    print!("{:<14}", "defect");
    for m in metrics {
        print!(" {:>13}", m.as_str());
    }
    println!();
    for defect in Defect::standard_set(part.center, part.size) {
        let damaged = defect.apply(&reference)?;
        let failed_img = capture(&damaged.image, 2);
        let failed = DescriptorPair::new(&failed_img, &reference, &mask, &hog)?;
        print!("{:<14}", defect.name());
        for m in metrics {
            let r = regular.report(m, DEFAULT_THRESHOLD, 1, 0)?;
            let f = failed.report(m, DEFAULT_THRESHOLD, 1, 0)?;
            let power = discriminative_power(&r, &f)?;
            let located = f.regions.first().is_some_and(|g| g.intersects(damaged.footprint_mm));
            print!(" {:>12.1}{}", power, if located { ' ' } else { '?' });
            if let (Some(dir), Metric::Cosine) = (&out, m) {
                let (w, h) = (frame.width, frame.height);
                write_layer_image(&dir.join(format!("{}.png", defect.name())), &failed_img)?;
                write_rgba_png(&dir.join(format!("{}_heatmap.png", defect.name())), w, h, &heatmap(&f.map, w, h, &hog).data)?;
                write_rgba_png(&dir.join(format!("{}_overlay.png", defect.name())), w, h, &overlay(&failed_img, &f, &hog).data)?;
            }
        }
        println!();
    }
    println!("values are discriminative power in percentage points; '?' marks a largest region missing the damage");
    Ok(())
}
