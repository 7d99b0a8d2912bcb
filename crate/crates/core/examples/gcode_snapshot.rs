//! Parse a G-code program into layers and inject the per-layer snapshot block.
//!
//! ```text
//! cargo run --example gcode_snapshot -- [input.gcode] [output.gcode]
//! ```
//! Without arguments, or with `-` as input, a small sample part is used.

use layerlens::gcode::parse_snapshot_sentinel;
use layerlens::sample::SquarePart;
use layerlens::{inject_snapshot_block, parse_gcode, SnapshotParams};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let text = match args.first().map(String::as_str) {
        Some("-") | None => SquarePart::default().gcode(),
        Some(path) => std::fs::read_to_string(path)?,
    };
    let program = parse_gcode(&text)?;
    println!("{} layers, layer height {:.3} mm", program.layers.len(), program.layer_height);
    for layer in &program.layers {
        let length: f64 = layer.extruding().map(|s| s.length()).sum();
        println!("  layer {:>3} z={:.3} segments={} extruded path {:.1} mm", layer.index, layer.z, layer.segments.len(), length);
    }

    let injected = inject_snapshot_block(&program, &SnapshotParams::default())?;
    let sentinels: Vec<usize> = injected.lines().filter_map(parse_snapshot_sentinel).collect();
    println!("snapshot sentinels: {sentinels:?}");

    let reparsed = parse_gcode(&injected)?;
    let same = reparsed.layers.len() == program.layers.len()
        && reparsed.layers.iter().zip(&program.layers).all(|(a, b)| {
            a.extruding()
                .map(|s| (s.start, s.end))
                .eq(b.extruding().map(|s| (s.start, s.end)))
        });
    println!("extrusion geometry unchanged after injection: {same}");

    if let Some(out) = args.get(1) {
        std::fs::write(out, &injected)?;
        println!("wrote {out}");
    } else {
        let lines: Vec<&str> = injected.lines().collect();
        if let Some(at) = lines.iter().position(|l| parse_snapshot_sentinel(l).is_some()) {
            println!("first snapshot block:");
            for line in &lines[at.saturating_sub(8)..(at + 10).min(lines.len())] {
                println!("  {line}");
            }
        }
    }
    Ok(())
}
