#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use layerlens::calibration::{camera_view, marker_image};
use layerlens::geometry::ActivePlane;
use layerlens::io::{read_top_view, write_json, write_layer_image};
use layerlens::perturb::Defect;
use layerlens::sample::SquarePart;
use layerlens::{CameraModel, LayerImage};

pub const SCALE: f64 = 4.0;

pub fn camera() -> CameraModel {
    CameraModel::look_at([0.0, -140.0, 260.0], [0.0, 0.0, 0.0], [0.0, 0.0, 1.0], 2200.0, (1600, 1200)).unwrap()
}

pub fn part() -> SquarePart {
    SquarePart {
        hole: 10.0,
        ..SquarePart::default()
    }
}

pub fn layerlens(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_layerlens"))
        .args(args)
        .current_dir(dir)
        .env_remove("LAYERLENS_OUTPUT")
        .output()
        .expect("binary runs")
}

pub fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

/// A job directory with G-code, camera file, bed image and config.
pub struct Job {
    pub dir: tempfile::TempDir,
}

impl Job {
    pub fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path();
        std::fs::write(root.join("part.gcode"), part().gcode()).unwrap();
        let cam = camera();
        write_json(&root.join("camera.json"), &cam.to_file()).unwrap();
        let bed = marker_image(&cam, &ActivePlane::default(), 20).unwrap();
        write_layer_image(&root.join("bed.png"), &bed).unwrap();
        let cfg = serde_json::json!({
            "gcode_path": "part.gcode",
            "calibration_path": "out/calibration.json",
            "output_dir": "out",
            "scale_px_per_mm": SCALE,
            "metrics": ["cosine", "dice"],
        });
        write_json(&root.join("job.json"), &cfg).unwrap();
        Self { dir }
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.dir.path().join(rel)
    }

    pub fn run(&self, args: &[&str]) -> Output {
        let mut full = args.to_vec();
        full.extend(["--config", "job.json"]);
        layerlens(self.dir.path(), &full)
    }

    /// Calibrates and renders references; panics on failure.
    pub fn prepare(&self) {
        let out = self.run(&["calibrate", "--image", "bed.png", "--camera", "camera.json", "--marker-threshold", "60"]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        let out = self.run(&["render-ref"]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    }

    pub fn reference(&self, layer: usize) -> (LayerImage, f64) {
        let (img, side) = read_top_view(&self.path(&format!("out/refs/ref_{layer}.png"))).unwrap();
        (img, side.z)
    }

    /// Camera frame of layer `layer`, optionally damaged in the top view.
    pub fn snapshot(&self, layer: usize, defect: Option<&Defect>) -> LayerImage {
        let (mut top, z) = self.reference(layer);
        if let Some(d) = defect {
            top = d.apply(&top).unwrap().image;
        }
        camera_view(&camera(), &top, &ActivePlane::default(), z, 30).unwrap()
    }

    pub fn write_snapshot(&self, rel: &str, layer: usize, defect: Option<&Defect>) {
        write_layer_image(&self.path(rel), &self.snapshot(layer, defect)).unwrap();
    }
}

pub fn patch() -> Defect {
    Defect::ErasePatch {
        center: [-8.0, 8.0],
        size: 14.0,
    }
}
