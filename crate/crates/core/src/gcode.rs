//! RepRap-flavor G-code parsing into per-layer extrusion toolpaths, and
//! injection of the interlayer snapshot block.
//!
//! Supported opcodes: `G0`/`G1` linear moves, `G4` dwell, `G90`/`G91`
//! positioning modes, `G92` position reset, `M82`/`M83` extruder modes,
//! `M400`, `M42` and tool selection `T<n>`. Any other opcode is kept as an
//! opaque line. Arcs (`G2`/`G3`) are rejected.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Nozzle diameter of the reference printer, used as the default bead width.
pub const DEFAULT_EXTRUSION_WIDTH_MM: f64 = 0.4;

/// Fallback layer height when it cannot be inferred from the program.
pub const DEFAULT_LAYER_HEIGHT_MM: f64 = 0.2;

/// Comment prefix of the snapshot sentinel line emitted into every block.
pub const SNAPSHOT_SENTINEL: &str = "; LAYER_SNAPSHOT";

const Z_EPS: f64 = 1e-6;
const XY_EPS: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GcodeError {
    #[error("line {line}: malformed numeric literal in `{word}`")]
    MalformedNumber { line: usize, word: String },
    #[error("line {line}: unexpected character `{ch}`")]
    UnexpectedChar { line: usize, ch: char },
    #[error("line {line}: arc move `{code}` is not supported")]
    UnsupportedArc { line: usize, code: String },
    #[error("program contains no extruding moves")]
    EmptyProgram,
    #[error("invalid parameter: {0}")]
    Parameter(String),
}

/// One parsed line carrying an opcode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GCodeCommand {
    /// Normalized opcode, e.g. `G1`, `M400`, `T1`.
    pub code: String,
    /// Parameter words of the line. Empty for opaque opcodes.
    pub params: BTreeMap<char, f64>,
    /// 1-based source line number.
    pub line_no: usize,
    pub comment: Option<String>,
}

impl GCodeCommand {
    pub fn param(&self, letter: char) -> Option<f64> {
        self.params.get(&letter).copied()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtrusionSegment {
    pub start: [f64; 2],
    pub end: [f64; 2],
    /// Bead width in mm.
    pub width: f64,
    /// mm/min
    pub feedrate: f64,
    pub extruding: bool,
    /// Source line of the move that produced this segment.
    pub line_no: usize,
}

impl ExtrusionSegment {
    pub fn length(&self) -> f64 {
        (self.end[0] - self.start[0]).hypot(self.end[1] - self.start[1])
    }

    pub fn translated(&self, dx: f64, dy: f64) -> Self {
        Self {
            start: [self.start[0] + dx, self.start[1] + dy],
            end: [self.end[0] + dx, self.end[1] + dy],
            ..*self
        }
    }
}

/// Axis-aligned bounds in mm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub min: [f64; 2],
    pub max: [f64; 2],
}

impl Bounds {
    pub fn empty() -> Self {
        Self {
            min: [f64::INFINITY; 2],
            max: [f64::NEG_INFINITY; 2],
        }
    }

    pub fn include(&mut self, p: [f64; 2]) {
        for i in 0..2 {
            self.min[i] = self.min[i].min(p[i]);
            self.max[i] = self.max[i].max(p[i]);
        }
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        (0..2).all(|i| p[i] >= self.min[i] && p[i] <= self.max[i])
    }

    pub fn union(&self, other: &Bounds) -> Bounds {
        Bounds {
            min: [self.min[0].min(other.min[0]), self.min[1].min(other.min[1])],
            max: [self.max[0].max(other.max[0]), self.max[1].max(other.max[1])],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerToolpath {
    pub index: usize,
    /// Layer top height in mm.
    pub z: f64,
    pub segments: Vec<ExtrusionSegment>,
    /// Bounds of the extruding segment centerlines.
    pub bbox: Bounds,
}

impl LayerToolpath {
    /// Builds a layer from segments, computing the bounds.
    pub fn new(index: usize, z: f64, segments: Vec<ExtrusionSegment>) -> Self {
        let mut bbox = Bounds::empty();
        for s in segments.iter().filter(|s| s.extruding) {
            bbox.include(s.start);
            bbox.include(s.end);
        }
        Self {
            index,
            z,
            segments,
            bbox,
        }
    }

    pub fn extruding(&self) -> impl Iterator<Item = &ExtrusionSegment> {
        self.segments.iter().filter(|s| s.extruding)
    }

    pub fn translated(&self, dx: f64, dy: f64) -> Self {
        let segs = self.segments.iter().map(|s| s.translated(dx, dy)).collect();
        Self::new(self.index, self.z, segs)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParseOptions {
    pub extrusion_width: f64,
}

impl Default for ParseOptions {
    fn default() -> Self {
        Self {
            extrusion_width: DEFAULT_EXTRUSION_WIDTH_MM,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GCodeProgram {
    pub commands: Vec<GCodeCommand>,
    pub layers: Vec<LayerToolpath>,
    pub layer_height: f64,
    source: Vec<String>,
}

impl GCodeProgram {
    /// Original source lines, in order.
    pub fn source_lines(&self) -> &[String] {
        &self.source
    }
}

/// Parses G-code with default options.
pub fn parse_gcode(text: &str) -> Result<GCodeProgram, GcodeError> {
    parse_gcode_with(text, &ParseOptions::default())
}

pub fn parse_gcode_with(text: &str, opts: &ParseOptions) -> Result<GCodeProgram, GcodeError> {
    if !(opts.extrusion_width > 0.0) {
        return Err(GcodeError::Parameter(format!(
            "extrusion width must be positive, got {}",
            opts.extrusion_width
        )));
    }
    let source: Vec<String> = text.lines().map(str::to_owned).collect();
    let mut commands = Vec::new();
    for (i, line) in source.iter().enumerate() {
        if let Some(cmd) = parse_line(line, i + 1)? {
            commands.push(cmd);
        }
    }

    let mut machine = Machine::default();
    let mut builder = LayerBuilder::default();
    for cmd in &commands {
        if let Some(motion) = machine.apply(cmd) {
            builder.push(&motion, opts.extrusion_width, cmd.line_no);
        }
    }
    let layers = builder.finish();
    if layers.is_empty() {
        return Err(GcodeError::EmptyProgram);
    }
    let layer_height = infer_layer_height(&layers);
    Ok(GCodeProgram {
        commands,
        layers,
        layer_height,
        source,
    })
}

fn infer_layer_height(layers: &[LayerToolpath]) -> f64 {
    if layers.len() >= 2 {
        let mut diffs: Vec<f64> = layers.windows(2).map(|w| w[1].z - w[0].z).collect();
        diffs.sort_by(f64::total_cmp);
        diffs[diffs.len() / 2]
    } else if layers[0].z > Z_EPS {
        layers[0].z
    } else {
        DEFAULT_LAYER_HEIGHT_MM
    }
}

fn is_known(code: &str) -> bool {
    matches!(
        code,
        "G0" | "G1" | "G2" | "G3" | "G4" | "G90" | "G91" | "G92" | "M82" | "M83" | "M400" | "M42"
    ) || (code.starts_with('T') && code[1..].parse::<u32>().is_ok())
}

fn parse_line(line: &str, line_no: usize) -> Result<Option<GCodeCommand>, GcodeError> {
    let (body, comment) = match line.find(';') {
        Some(i) => (&line[..i], Some(line[i + 1..].trim().to_owned())),
        None => (line, None),
    };
    let body = strip_paren_comments(body);
    let mut words = Words::new(&body, line_no);

    let mut opcode = None;
    while let Some(word) = words.next_raw() {
        let (letter, num) = word;
        if letter == 'N' {
            continue;
        }
        opcode = Some(normalize_opcode(letter, num));
        break;
    }
    let Some(code) = opcode else {
        return Ok(None);
    };

    if code == "G2" || code == "G3" {
        return Err(GcodeError::UnsupportedArc { line: line_no, code });
    }

    let mut params = BTreeMap::new();
    if is_known(&code) {
        while let Some(word) = words.next_word()? {
            params.insert(word.0, word.1);
        }
    }
    Ok(Some(GCodeCommand {
        code,
        params,
        line_no,
        comment: comment.filter(|c| !c.is_empty()),
    }))
}

fn strip_paren_comments(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut depth = 0usize;
    for ch in s.chars() {
        match ch {
            '(' => depth += 1,
            ')' if depth > 0 => depth -= 1,
            _ if depth == 0 => out.push(ch),
            _ => {}
        }
    }
    out
}

fn normalize_opcode(letter: char, num: &str) -> String {
    match num.parse::<u32>() {
        Ok(n) => format!("{letter}{n}"),
        Err(_) => format!("{letter}{num}"),
    }
}

struct Words<'a> {
    chars: std::iter::Peekable<std::str::CharIndices<'a>>,
    src: &'a str,
    line_no: usize,
}

impl<'a> Words<'a> {
    fn new(src: &'a str, line_no: usize) -> Self {
        Self {
            chars: src.char_indices().peekable(),
            src,
            line_no,
        }
    }

    fn skip_ws(&mut self) {
        while matches!(self.chars.peek(), Some((_, c)) if c.is_whitespace()) {
            self.chars.next();
        }
    }

    /// Letter plus the raw numeric text following it, without validation.
    fn next_raw(&mut self) -> Option<(char, &'a str)> {
        self.skip_ws();
        let (_, letter) = self.chars.next()?;
        self.skip_ws();
        let start = self.chars.peek().map_or(self.src.len(), |(i, _)| *i);
        let mut end = start;
        while let Some(&(i, c)) = self.chars.peek() {
            if c.is_ascii_digit() || c == '.' || c == '-' || c == '+' {
                end = i + c.len_utf8();
                self.chars.next();
            } else {
                break;
            }
        }
        Some((letter.to_ascii_uppercase(), &self.src[start..end]))
    }

    fn next_word(&mut self) -> Result<Option<(char, f64)>, GcodeError> {
        self.skip_ws();
        match self.chars.peek() {
            None => return Ok(None),
            Some(&(_, '*')) => return Ok(None),
            Some(&(_, c)) if !c.is_ascii_alphabetic() => {
                return Err(GcodeError::UnexpectedChar {
                    line: self.line_no,
                    ch: c,
                })
            }
            _ => {}
        }
        let (letter, num) = self.next_raw().expect("peeked");
        match num.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(Some((letter, v))),
            _ => Err(GcodeError::MalformedNumber {
                line: self.line_no,
                word: format!("{letter}{num}"),
            }),
        }
    }
}

/// A move resolved against the machine state.
#[derive(Debug, Clone, Copy)]
struct Motion {
    from: [f64; 3],
    to: [f64; 3],
    e_delta: f64,
    tool: u32,
    feedrate: f64,
}

/// Logical positioning state of the printer.
#[derive(Debug, Clone)]
struct Machine {
    pos: [f64; 3],
    e: BTreeMap<u32, f64>,
    axes_relative: bool,
    e_mode_relative: bool,
    feedrate: f64,
    tool: u32,
}

impl Default for Machine {
    fn default() -> Self {
        Self {
            pos: [0.0; 3],
            e: BTreeMap::new(),
            axes_relative: false,
            e_mode_relative: false,
            feedrate: 0.0,
            tool: 0,
        }
    }
}

impl Machine {
    fn e_relative(&self) -> bool {
        self.axes_relative || self.e_mode_relative
    }

    fn e_value(&self) -> f64 {
        self.e.get(&self.tool).copied().unwrap_or(0.0)
    }

    fn apply(&mut self, cmd: &GCodeCommand) -> Option<Motion> {
        match cmd.code.as_str() {
            "G0" | "G1" => {
                let from = self.pos;
                for (axis, letter) in ['X', 'Y', 'Z'].into_iter().enumerate() {
                    if let Some(v) = cmd.param(letter) {
                        self.pos[axis] = if self.axes_relative {
                            self.pos[axis] + v
                        } else {
                            v
                        };
                    }
                }
                let mut e_delta = 0.0;
                if let Some(v) = cmd.param('E') {
                    let e = self.e.entry(self.tool).or_insert(0.0);
                    let next = if self.axes_relative || self.e_mode_relative {
                        *e + v
                    } else {
                        v
                    };
                    e_delta = next - *e;
                    *e = next;
                }
                if let Some(f) = cmd.param('F') {
                    self.feedrate = f;
                }
                Some(Motion {
                    from,
                    to: self.pos,
                    e_delta,
                    tool: self.tool,
                    feedrate: self.feedrate,
                })
            }
            "G90" => {
                self.axes_relative = false;
                None
            }
            "G91" => {
                self.axes_relative = true;
                None
            }
            "M82" => {
                self.e_mode_relative = false;
                None
            }
            "M83" => {
                self.e_mode_relative = true;
                None
            }
            "G92" => {
                let has_any = cmd.params.keys().any(|k| matches!(k, 'X' | 'Y' | 'Z' | 'E'));
                for (axis, letter) in ['X', 'Y', 'Z'].into_iter().enumerate() {
                    if let Some(v) = cmd.param(letter) {
                        self.pos[axis] = v;
                    }
                }
                if let Some(v) = cmd.param('E') {
                    self.e.insert(self.tool, v);
                }
                if !has_any {
                    self.pos = [0.0; 3];
                    self.e.insert(self.tool, 0.0);
                }
                None
            }
            code if code.starts_with('T') => {
                if let Ok(t) = code[1..].parse() {
                    self.tool = t;
                }
                None
            }
            _ => None,
        }
    }
}

#[derive(Default)]
struct LayerBuilder {
    layers: Vec<(f64, Vec<ExtrusionSegment>)>,
    pending: Vec<ExtrusionSegment>,
    pending_z: Option<f64>,
}

impl LayerBuilder {
    fn current_z(&self) -> Option<f64> {
        self.layers.last().map(|l| l.0)
    }

    fn push(&mut self, m: &Motion, width: f64, line_no: usize) {
        if m.tool != 0 {
            return;
        }
        let (dx, dy) = (m.to[0] - m.from[0], m.to[1] - m.from[1]);
        if dx.hypot(dy) <= XY_EPS {
            return;
        }
        let extruding = m.e_delta > 0.0;
        let seg = ExtrusionSegment {
            start: [m.from[0], m.from[1]],
            end: [m.to[0], m.to[1]],
            width,
            feedrate: m.feedrate,
            extruding,
            line_no,
        };
        let z = m.to[2];
        if extruding {
            match self.current_z() {
                Some(cz) if z <= cz + Z_EPS => {}
                _ => {
                    let mut segs = Vec::new();
                    if self.pending_z.is_some_and(|pz| (pz - z).abs() <= Z_EPS) {
                        segs.append(&mut self.pending);
                    }
                    self.layers.push((z, segs));
                }
            }
            self.pending.clear();
            self.pending_z = None;
            self.layers.last_mut().expect("layer exists").1.push(seg);
        } else {
            let in_layer = self.current_z().is_some_and(|cz| {
                (cz - z).abs() <= Z_EPS && (m.from[2] - z).abs() <= Z_EPS
            });
            if in_layer {
                self.layers.last_mut().expect("layer exists").1.push(seg);
            } else if self.current_z().map_or(true, |cz| z > cz + Z_EPS) {
                if !self.pending_z.is_some_and(|pz| (pz - z).abs() <= Z_EPS) {
                    self.pending.clear();
                    self.pending_z = Some(z);
                }
                self.pending.push(seg);
            }
        }
    }

    fn finish(self) -> Vec<LayerToolpath> {
        self.layers
            .into_iter()
            .enumerate()
            .map(|(i, (z, segs))| LayerToolpath::new(i, z, segs))
            .collect()
    }
}

/// Parameters of the interlayer snapshot block.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SnapshotParams {
    /// Vertical nozzle lift in mm.
    pub lift_mm: f64,
    /// Lateral nozzle offset in mm (applied to both X and Y).
    pub lateral_mm: f64,
    /// Filament retraction before lifting, mm.
    pub retract_mm: f64,
    /// Settling dwell after returning, ms.
    pub dwell_ms: u32,
}

impl Default for SnapshotParams {
    fn default() -> Self {
        Self {
            lift_mm: 80.0,
            lateral_mm: 20.0,
            retract_mm: 20.0,
            dwell_ms: 500,
        }
    }
}

/// Re-emits the program with a snapshot block after each layer's final
/// extruding command.
///
/// The block parks the nozzle, raises the lighting platform (tool 1) by one
/// layer height and writes the `; LAYER_SNAPSHOT <index>` sentinel. After the
/// block, the pre-block position is restated absolutely and positioning mode,
/// logical E and feedrate are restored so the rest of the program keeps its
/// meaning.
pub fn inject_snapshot_block(
    program: &GCodeProgram,
    params: &SnapshotParams,
) -> Result<String, GcodeError> {
    if !(params.lift_mm > 0.0) {
        return Err(GcodeError::Parameter(format!(
            "lift must be positive, got {}",
            params.lift_mm
        )));
    }
    if !(params.lateral_mm >= 0.0) || !(params.retract_mm >= 0.0) {
        return Err(GcodeError::Parameter(
            "lateral offset and retraction must be non-negative".into(),
        ));
    }
    if program.layers.is_empty() {
        return Err(GcodeError::EmptyProgram);
    }

    let mut layer_end: BTreeMap<usize, usize> = BTreeMap::new();
    for layer in &program.layers {
        if let Some(last) = layer.extruding().map(|s| s.line_no).max() {
            layer_end.insert(last, layer.index);
        }
    }
    let by_line: BTreeMap<usize, &GCodeCommand> =
        program.commands.iter().map(|c| (c.line_no, c)).collect();

    let mut machine = Machine::default();
    let mut out = String::new();
    for (i, line) in program.source.iter().enumerate() {
        let line_no = i + 1;
        out.push_str(line);
        out.push('\n');
        if let Some(cmd) = by_line.get(&line_no) {
            machine.apply(cmd);
        }
        if let Some(&layer) = layer_end.get(&line_no) {
            write_block(&mut out, &machine, layer, program.layer_height, params);
        }
    }
    Ok(out)
}

fn write_block(
    out: &mut String,
    m: &Machine,
    layer: usize,
    layer_height: f64,
    p: &SnapshotParams,
) {
    let lines = [
        "M400".to_owned(),
        "G91".to_owned(),
        format!("G1 E{} F1000", -p.retract_mm),
        format!("G1 Z{}", p.lift_mm),
        format!("G1 X{0} Y{0}", p.lateral_mm),
        "T1".to_owned(),
        format!("G1 E{} F600", -layer_height),
        "M400".to_owned(),
        "M42 P57 S200".to_owned(),
        format!("{SNAPSHOT_SENTINEL} {layer}"),
        format!("G1 X{0} Y{0}", -p.lateral_mm),
        format!("G1 Z{}", -p.lift_mm),
        format!("G4 P{}", p.dwell_ms),
        format!("T{}", m.tool),
        "G90".to_owned(),
        "M42 P57 S0".to_owned(),
        format!("G1 X{} Y{} Z{}", m.pos[0], m.pos[1], m.pos[2]),
    ];
    for l in lines {
        let _ = writeln!(out, "{l}");
    }
    if m.axes_relative {
        let _ = writeln!(out, "G91");
    }
    if !m.e_relative() {
        let _ = writeln!(out, "G92 E{}", m.e_value());
    }
    let _ = writeln!(out, "G1 F{}", m.feedrate);
}

/// Parses `; LAYER_SNAPSHOT <index>` sentinel lines, returning the layer index.
pub fn parse_snapshot_sentinel(line: &str) -> Option<usize> {
    line.trim()
        .strip_prefix(SNAPSHOT_SENTINEL)?
        .trim()
        .parse()
        .ok()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square(z: f64, e0: f64) -> String {
        format!(
            "G1 X0 Y0 Z{z}\nG1 X10 Y0 E{}\nG1 X10 Y10 E{}\nG1 X0 Y10 E{}\nG1 X0 Y0 E{}\n",
            e0 + 1.0,
            e0 + 2.0,
            e0 + 3.0,
            e0 + 4.0
        )
    }

    #[test]
    fn minimal_straight_move() {
        let p = parse_gcode("G90\nG1 X0 Y0 Z0.2 E0\nG1 X10 Y0 E1").unwrap();
        assert_eq!(p.layers.len(), 1);
        let segs: Vec<_> = p.layers[0].extruding().collect();
        assert_eq!(segs.len(), 1);
        assert_eq!(segs[0].start, [0.0, 0.0]);
        assert_eq!(segs[0].end, [10.0, 0.0]);
        assert_eq!(segs[0].width, DEFAULT_EXTRUSION_WIDTH_MM);
        assert!((p.layers[0].z - 0.2).abs() < 1e-12);
    }

    #[test]
    fn two_layer_square() {
        let text = format!("G90\n{}{}", square(0.2, 0.0), square(0.4, 4.0));
        let p = parse_gcode(&text).unwrap();
        assert_eq!(p.layers.len(), 2);
        assert!((p.layer_height - 0.2).abs() < 1e-12);
        let corners = [[0.0, 0.0], [10.0, 0.0], [10.0, 10.0], [0.0, 10.0]];
        for layer in &p.layers {
            let segs: Vec<_> = layer.extruding().collect();
            assert_eq!(segs.len(), 4);
            for (k, s) in segs.iter().enumerate() {
                assert_eq!(s.start, corners[k]);
                assert_eq!(s.end, corners[(k + 1) % 4]);
            }
        }
        assert_eq!(p.layers[1].index, 1);
        assert!((p.layers[1].z - 0.4).abs() < 1e-12);
    }

    #[test]
    fn retraction_and_travel_make_no_extrusion() {
        let text = "G1 Z0.2\nG1 X5 Y5 E1\nG1 E0.2\nG1 X8 Y5\nG1 X9 Y5 E1.5\n";
        let p = parse_gcode(text).unwrap();
        let segs = &p.layers[0].segments;
        assert_eq!(segs.iter().filter(|s| s.extruding).count(), 2);
        assert_eq!(segs.iter().filter(|s| !s.extruding).count(), 1);
    }

    #[test]
    fn tool_one_moves_have_no_geometry() {
        let text = "G1 Z0.2\nG1 X5 E1\nT1\nG1 X20 Y20 E5\nT0\nG1 X5 Y0\nG1 X6 E2\n";
        let p = parse_gcode(text).unwrap();
        assert_eq!(p.layers.len(), 1);
        assert_eq!(p.layers[0].extruding().count(), 2);
        assert!(p.layers[0].bbox.max[0] <= 6.0);
    }

    #[test]
    fn relative_mode_and_g92() {
        let text = "G91\nG1 Z0.2\nG1 X10 E1\nG1 Y10 E1\nG90\nG92 X0 Y0\nG1 X1 E3\n";
        let p = parse_gcode(text).unwrap();
        let segs: Vec<_> = p.layers[0].extruding().collect();
        assert_eq!(segs[0].end, [10.0, 0.0]);
        assert_eq!(segs[1].end, [10.0, 10.0]);
        assert_eq!(segs[2].start, [0.0, 0.0]);
        assert_eq!(segs[2].end, [1.0, 0.0]);
    }

    #[test]
    fn case_comments_and_opaque_lines() {
        let text = "; header\nm104 S200 ; heat\ng1 z0.2 (inline) \nM117 Hello World\ng1 x3 e1 ; go\n";
        let p = parse_gcode(text).unwrap();
        assert_eq!(p.commands.len(), 4);
        assert_eq!(p.commands[0].code, "M104");
        assert!(p.commands[0].params.is_empty());
        assert_eq!(p.commands[0].comment.as_deref(), Some("heat"));
        assert_eq!(p.commands[2].code, "M117");
        assert_eq!(p.layers[0].extruding().count(), 1);
        assert!(p.commands.windows(2).all(|w| w[0].line_no < w[1].line_no));
    }

    #[test]
    fn errors() {
        assert_eq!(
            parse_gcode("G1 Z0.2\nG1 X1.2.3 E1"),
            Err(GcodeError::MalformedNumber {
                line: 2,
                word: "X1.2.3".into()
            })
        );
        assert!(matches!(
            parse_gcode("G1 Z0.2\nG1 Xa E1"),
            Err(GcodeError::MalformedNumber { line: 2, .. })
        ));
        assert_eq!(
            parse_gcode("G1 Z0.2\nG1 X1 E1\nG2 X2 Y2 I1 J0 E2"),
            Err(GcodeError::UnsupportedArc {
                line: 3,
                code: "G2".into()
            })
        );
        assert_eq!(parse_gcode("G28\nG1 X10\n"), Err(GcodeError::EmptyProgram));
        assert_eq!(parse_gcode(""), Err(GcodeError::EmptyProgram));
    }

    #[test]
    fn z_hop_does_not_create_layers() {
        let text = "G1 Z0.2\nG1 X5 E1\nG1 Z0.6\nG1 X0 Y5\nG1 Z0.2\nG1 X5 Y5 E2\n";
        let p = parse_gcode(text).unwrap();
        assert_eq!(p.layers.len(), 1);
        assert_eq!(p.layers[0].extruding().count(), 2);
    }

    #[test]
    fn table_block_contributes_no_geometry() {
        let block = "M400\nG91\nG1 E-20 F1000\nG1 Z80\nG1 X20 Y20\nT1\nG1 E-0.25 F600\nM400\nM42 P57 S200\n\
                     G1 X-20 Y-20\nG1 Z-80\nG4 P500\nT0\nG90\nM42 P57 S0\n";
        let plain = format!("M83\n{}{}", rel_square(0.2), rel_square(0.4));
        let with_block = format!("M83\n{}{block}{}", rel_square(0.2), rel_square(0.4));
        let a = parse_gcode(&plain).unwrap();
        let b = parse_gcode(&with_block).unwrap();
        assert_eq!(a.layers.len(), b.layers.len());
        for (la, lb) in a.layers.iter().zip(&b.layers) {
            let ga: Vec<_> = la.extruding().map(|s| (s.start, s.end)).collect();
            let gb: Vec<_> = lb.extruding().map(|s| (s.start, s.end)).collect();
            assert_eq!(ga, gb);
        }
    }

    fn rel_square(z: f64) -> String {
        format!("G1 X0 Y0 Z{z}\nG1 X10 E1\nG1 Y10 E1\nG1 X0 E1\nG1 Y0 E1\n")
    }

    #[test]
    fn inject_defaults_emit_table_sequence() {
        let text = format!("G90\n{}{}", square(0.2, 0.0), square(0.4, 4.0));
        let p = parse_gcode(&text).unwrap();
        let out = inject_snapshot_block(&p, &SnapshotParams::default()).unwrap();
        for needle in ["G1 Z80", "G1 X20 Y20", "G4 P500", "T1", "T0", "G1 E-20 F1000"] {
            assert!(out.lines().any(|l| l == needle), "missing {needle}");
        }
        let sentinels: Vec<_> = out.lines().filter_map(parse_snapshot_sentinel).collect();
        assert_eq!(sentinels, vec![0, 1]);
        let q = parse_gcode(&out).unwrap();
        assert_eq!(q.layers, p.layers.iter().map(|l| relined(l, &q)).collect::<Vec<_>>());
    }

    // segments carry line numbers, which shift after injection
    fn relined(l: &LayerToolpath, q: &GCodeProgram) -> LayerToolpath {
        let mut l = l.clone();
        let target = &q.layers[l.index];
        for (s, t) in l.segments.iter_mut().zip(&target.segments) {
            s.line_no = t.line_no;
        }
        l
    }

    #[test]
    fn single_layer_gets_one_block() {
        let p = parse_gcode(&square(0.2, 0.0)).unwrap();
        let out = inject_snapshot_block(&p, &SnapshotParams::default()).unwrap();
        assert_eq!(out.matches(SNAPSHOT_SENTINEL).count(), 1);
        assert_eq!(out.lines().filter(|l| *l == "G1 Z80").count(), 1);
    }

    #[test]
    fn inject_rejects_bad_lift() {
        let p = parse_gcode(&square(0.2, 0.0)).unwrap();
        let params = SnapshotParams {
            lift_mm: 0.0,
            ..Default::default()
        };
        assert!(matches!(
            inject_snapshot_block(&p, &params),
            Err(GcodeError::Parameter(_))
        ));
    }

    #[test]
    fn sentinel_parse() {
        assert_eq!(parse_snapshot_sentinel("; LAYER_SNAPSHOT 12"), Some(12));
        assert_eq!(parse_snapshot_sentinel("; something"), None);
    }
}
