//! Small generated print jobs for demos and tests.

use std::fmt::Write;

/// Shape of a generated square part.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SquarePart {
    pub center: [f64; 2],
    pub size: f64,
    pub layers: usize,
    pub layer_height: f64,
    pub width: f64,
    pub perimeters: usize,
    /// Side of a square hole in the middle; 0 for a solid part.
    pub hole: f64,
}

impl Default for SquarePart {
    fn default() -> Self {
        Self {
            center: [0.0, 0.0],
            size: 40.0,
            layers: 3,
            layer_height: 0.2,
            width: 0.4,
            perimeters: 2,
            hole: 0.0,
        }
    }
}

impl SquarePart {
    /// Absolute-coordinate G-code: perimeters, then diagonal infill that
    /// alternates between +45 and -45 degrees from layer to layer.
    pub fn gcode(&self) -> String {
        let mut out = String::from("; square part\nG90\nM82\nG92 E0\nG1 F1800\n");
        let mut e = 0.0;
        let mut pos = [0.0f64, 0.0f64];
        let ecoef = self.width * self.layer_height / 2.4;
        let travel = |out: &mut String, pos: &mut [f64; 2], p: [f64; 2]| {
            let _ = writeln!(out, "G0 X{:.3} Y{:.3}", p[0], p[1]);
            *pos = p;
        };
        let extrude = |out: &mut String, pos: &mut [f64; 2], e: &mut f64, p: [f64; 2]| {
            *e += (p[0] - pos[0]).hypot(p[1] - pos[1]) * ecoef;
            let _ = writeln!(out, "G1 X{:.3} Y{:.3} E{:.5}", p[0], p[1], e);
            *pos = p;
        };
        let [cx, cy] = self.center;
        for layer in 0..self.layers {
            let z = self.layer_height * (layer + 1) as f64;
            let _ = writeln!(out, "; layer {layer}\nG0 Z{z:.3}");
            let mut loops = Vec::new();
            for k in 0..self.perimeters {
                loops.push(self.size / 2.0 - self.width * (k as f64 + 0.5));
            }
            if self.hole > 0.0 {
                for k in 0..self.perimeters {
                    loops.push(self.hole / 2.0 + self.width * (k as f64 + 0.5));
                }
            }
            for h in loops {
                let corners = [[cx - h, cy - h], [cx + h, cy - h], [cx + h, cy + h], [cx - h, cy + h]];
                travel(&mut out, &mut pos, corners[0]);
                for c in corners.iter().skip(1).chain(std::iter::once(&corners[0])) {
                    extrude(&mut out, &mut pos, &mut e, *c);
                }
            }
            let outer = self.size / 2.0 - self.width * self.perimeters as f64;
            let inner = if self.hole > 0.0 {
                self.hole / 2.0 + self.width * self.perimeters as f64
            } else {
                0.0
            };
            let sign = if layer % 2 == 0 { 1.0 } else { -1.0 };
            let spacing = self.width * std::f64::consts::SQRT_2;
            let n = (4.0 * outer / spacing).floor() as i64;
            for i in 1..n {
                // lines x - sign*y = c in the part's local frame
                let c = -2.0 * outer + i as f64 * spacing;
                let mut pts = Vec::new();
                for (x0, x1) in spans(c, outer, inner) {
                    pts.push(([x0, (x0 - c) * sign], [x1, (x1 - c) * sign]));
                }
                for (a, b) in pts {
                    let (a, b) = if i % 2 == 0 { (a, b) } else { (b, a) };
                    travel(&mut out, &mut pos, [cx + a[0], cy + a[1]]);
                    extrude(&mut out, &mut pos, &mut e, [cx + b[0], cy + b[1]]);
                }
            }
        }
        out.push_str("; end\n");
        out
    }
}

/// X intervals of the line `y = ±(x - c)` inside `|x|,|y| <= outer`
/// and outside `|x|,|y| < inner`.
fn spans(c: f64, outer: f64, inner: f64) -> Vec<(f64, f64)> {
    let clip = |lim: f64| {
        let lo = (-lim).max(c - lim);
        let hi = lim.min(c + lim);
        (lo, hi)
    };
    let (lo, hi) = clip(outer);
    if hi - lo <= 1e-9 {
        return vec![];
    }
    if inner <= 0.0 {
        return vec![(lo, hi)];
    }
    let (ilo, ihi) = clip(inner);
    if ihi - ilo <= 1e-9 {
        return vec![(lo, hi)];
    }
    let mut out = Vec::new();
    if ilo - lo > 1e-9 {
        out.push((lo, ilo));
    }
    if hi - ihi > 1e-9 {
        out.push((ihi, hi));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gcode::parse_gcode;

    #[test]
    fn parses_into_requested_layers() {
        let part = SquarePart::default();
        let prog = parse_gcode(&part.gcode()).unwrap();
        assert_eq!(prog.layers.len(), 3);
        assert!((prog.layer_height - 0.2).abs() < 1e-9);
        let b = prog.layers[0].bbox;
        assert!((b.max[0] - 19.8).abs() < 1e-6 && (b.min[1] + 19.8).abs() < 1e-6);
    }

    #[test]
    fn infill_avoids_hole() {
        let part = SquarePart {
            hole: 10.0,
            ..SquarePart::default()
        };
        let prog = parse_gcode(&part.gcode()).unwrap();
        for s in prog.layers[0].extruding() {
            let mid = [(s.start[0] + s.end[0]) / 2.0, (s.start[1] + s.end[1]) / 2.0];
            assert!(mid[0].abs().max(mid[1].abs()) >= 5.0 - 1e-6);
        }
    }
}
