//! Base-plane calibration from four bright markers on the print bed.

use serde::{Deserialize, Serialize};

use crate::geometry::{
    active_plane_homography, detect_markers, estimate_homography, warp_point, ActivePlane, CameraFile, CameraModel,
    GeometryError, Homography, PixelRect, Point2, project_point, warp_image,
};
use crate::layer_image::{Frame, LayerImage};

/// Markers sit this far from the plane center along both axes, inside the
/// observation square so they stay whole in the top view.
pub const MARKER_OFFSET_MM: f64 = 40.0;
pub const DEFAULT_MARKER_THRESHOLD: u8 = 200;

/// Contents of a calibration file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    /// Detected marker centroids in camera pixels, TL, TR, BR, BL.
    pub markers_px: [Point2; 4],
    /// Marker positions on the bed in world mm, same order.
    pub markers_mm: [Point2; 4],
    /// Camera pixels → top-view pixels of the bed plane, row-major.
    pub homography: [f64; 9],
    pub scale: f64,
    pub plane: ActivePlane,
    /// Full camera model, when known; enables per-layer plane lifting.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub camera: Option<CameraFile>,
    pub rms_residual_px: f64,
}

/// World positions of the four markers, TL, TR, BR, BL.
pub fn marker_positions(plane: &ActivePlane, offset: f64) -> [Point2; 4] {
    let [ox, oy] = plane.origin;
    [
        [ox - offset, oy + offset],
        [ox + offset, oy + offset],
        [ox + offset, oy - offset],
        [ox - offset, oy - offset],
    ]
}

/// The four image quadrants, one search window per marker.
pub fn quadrant_windows(width: usize, height: usize) -> [PixelRect; 4] {
    let (mx, my) = (width / 2, height / 2);
    [
        PixelRect::new(0, 0, mx, my),
        PixelRect::new(mx, 0, width, my),
        PixelRect::new(mx, my, width, height),
        PixelRect::new(0, my, mx, height),
    ]
}

/// Detects the markers and fits the bed-plane homography onto the metric
/// top view of `plane` at `scale` px/mm.
pub fn calibrate(
    img: &LayerImage,
    windows: &[PixelRect; 4],
    threshold: u8,
    plane: &ActivePlane,
    scale: f64,
) -> Result<Calibration, GeometryError> {
    let markers_px = detect_markers(img, windows, threshold)?;
    let markers_mm = marker_positions(plane, MARKER_OFFSET_MM);
    let frame = plane.top_view_frame(scale)?;
    let target = markers_mm.map(|p| frame.world_to_pixel(p));
    let h = estimate_homography(&markers_px, &target)?;
    let mut sq = 0.0;
    for (p, t) in markers_px.iter().zip(&target) {
        let q = warp_point(&h, *p)?;
        sq += (q[0] - t[0]).powi(2) + (q[1] - t[1]).powi(2);
    }
    Ok(Calibration {
        markers_px,
        markers_mm,
        homography: h.to_row_major(),
        scale,
        plane: *plane,
        camera: None,
        rms_residual_px: (sq / 4.0).sqrt(),
    })
}

/// Synthetic camera frame of an empty bed: `background` with a Gaussian spot
/// at each marker.
pub fn marker_image(cam: &CameraModel, plane: &ActivePlane, background: u8) -> Result<LayerImage, GeometryError> {
    let (w, h) = cam.image_dims;
    let frame = Frame::new(w, h, 1.0, [0.0, 0.0]).map_err(|e| GeometryError::Degenerate(e.to_string()))?;
    let mut img = LayerImage::filled(frame, background);
    let centers = marker_positions(plane, MARKER_OFFSET_MM)
        .iter()
        .map(|p| project_point(cam, [p[0], p[1], plane.z]))
        .collect::<Result<Vec<_>, _>>()?;
    for row in 0..h {
        for col in 0..w {
            for c in &centers {
                let d = (col as f64 + 0.5 - c[0]).hypot(row as f64 + 0.5 - c[1]);
                if d < 6.0 {
                    let v = 255.0 * (-(d * d) / 8.0).exp();
                    img.set(col, row, img.get(col, row).max(v.round() as u8));
                }
            }
        }
    }
    Ok(img)
}

/// Synthetic camera frame of a top view lying on the plane at height `z`.
/// Pixels outside the observation square get `background`.
pub fn camera_view(
    cam: &CameraModel,
    top: &LayerImage,
    plane: &ActivePlane,
    z: f64,
    background: u8,
) -> Result<LayerImage, GeometryError> {
    let (w, h) = cam.image_dims;
    let frame = Frame::new(w, h, 1.0, [0.0, 0.0]).map_err(|e| GeometryError::Degenerate(e.to_string()))?;
    let lifted = ActivePlane { z, ..*plane };
    let to_top = active_plane_homography(cam, &lifted, top.frame.scale)?;
    let mut img = warp_image(top, &to_top.inverse()?, frame)?;
    for row in 0..h {
        for col in 0..w {
            if !img.is_valid(col, row) {
                img.set(col, row, background);
            }
        }
    }
    img.clear_validity();
    Ok(img)
}

impl Calibration {
    pub fn with_camera(mut self, cam: &CameraModel) -> Self {
        self.camera = Some(cam.to_file());
        self
    }

    pub fn base_homography(&self) -> Result<Homography, GeometryError> {
        Homography::from_row_major(&self.homography)
    }

    pub fn top_view_frame(&self) -> Result<Frame, GeometryError> {
        self.plane.top_view_frame(self.scale)
    }

    /// Camera → top-view map for the plane at height `z`. Without a camera
    /// model the bed-plane fit is used for every height.
    pub fn layer_homography(&self, z: f64) -> Result<Homography, GeometryError> {
        match &self.camera {
            Some(file) => {
                let cam = CameraModel::from_file(file)?;
                let plane = ActivePlane { z, ..self.plane };
                active_plane_homography(&cam, &plane, self.scale)
            }
            None => self.base_homography(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::warp_image;

    #[test]
    fn recovers_plane_homography() {
        let cam = CameraModel::look_at([0.0, -150.0, 250.0], [0.0, 0.0, 0.0], [0.0, 0.0, 1.0], 900.0, (800, 600)).unwrap();
        let plane = ActivePlane::default();
        let img = marker_image(&cam, &plane, 20).unwrap();
        let cal = calibrate(&img, &quadrant_windows(800, 600), 60, &plane, 6.67).unwrap();
        assert!(cal.rms_residual_px < 1e-6);
        let frame = cal.top_view_frame().unwrap();
        let h = cal.base_homography().unwrap();
        for p in marker_positions(&plane, MARKER_OFFSET_MM) {
            let truth = frame.world_to_pixel(p);
            let got = warp_point(&h, project_point(&cam, [p[0], p[1], 0.0]).unwrap()).unwrap();
            assert!((got[0] - truth[0]).hypot(got[1] - truth[1]) < 0.5);
        }
        let cal = cal.with_camera(&cam);
        let lifted = cal.layer_homography(0.0).unwrap();
        let c = project_point(&cam, [10.0, -5.0, 0.0]).unwrap();
        let a = warp_point(&lifted, c).unwrap();
        let b = warp_point(&h, c).unwrap();
        assert!((a[0] - b[0]).hypot(a[1] - b[1]) < 0.5);
    }

    #[test]
    fn recalibrating_rectified_view_is_near_identity() {
        let cam = CameraModel::look_at([20.0, -160.0, 240.0], [0.0, 0.0, 0.0], [0.0, 0.0, 1.0], 1000.0, (900, 700)).unwrap();
        let plane = ActivePlane::default();
        let img = marker_image(&cam, &plane, 20).unwrap();
        let cal = calibrate(&img, &quadrant_windows(900, 700), 60, &plane, 6.67).unwrap();
        let frame = cal.top_view_frame().unwrap();
        let top = warp_image(&img, &cal.base_homography().unwrap(), frame).unwrap();
        let again = calibrate(&top, &quadrant_windows(frame.width, frame.height), 60, &plane, 6.67).unwrap();
        let m = again.homography;
        for (i, v) in m.iter().enumerate() {
            let expect = if i % 4 == 0 { 1.0 } else { 0.0 };
            if i == 2 || i == 5 {
                assert!((v - expect).abs() < 0.5, "translation {i}: {v}");
            } else {
                assert!((v - expect).abs() < 1e-3, "entry {i}: {v}");
            }
        }
    }

    #[test]
    fn camera_view_unwarps_back() {
        let cam = CameraModel::look_at([0.0, -150.0, 250.0], [0.0, 0.0, 0.0], [0.0, 0.0, 1.0], 1400.0, (1200, 900)).unwrap();
        let plane = ActivePlane::default();
        let bed = marker_image(&cam, &plane, 20).unwrap();
        let cal = calibrate(&bed, &quadrant_windows(1200, 900), 60, &plane, 2.0).unwrap().with_camera(&cam);
        let frame = cal.top_view_frame().unwrap();
        let mut top = LayerImage::filled(frame, 30);
        for row in 60..120 {
            for col in 40..100 {
                top.set(col, row, 220);
            }
        }
        let z = 2.0;
        let shot = camera_view(&cam, &top, &plane, z, 30).unwrap();
        let back = warp_image(&shot, &cal.layer_homography(z).unwrap(), frame).unwrap();
        let mut worst = 0i32;
        for row in 10..170 {
            for col in 10..170 {
                let edge = [59, 60, 119, 120].contains(&row) || [39, 40, 99, 100].contains(&col);
                if !edge {
                    worst = worst.max((i32::from(back.get(col, row)) - i32::from(top.get(col, row))).abs());
                }
            }
        }
        assert!(worst < 60, "max deviation {worst}");
        let flat = warp_image(&shot, &cal.base_homography().unwrap(), frame).unwrap();
        assert_ne!(flat.pixels(), back.pixels());
    }

    #[test]
    fn missing_marker_names_window() {
        let frame = Frame::new(100, 100, 1.0, [0.0, 0.0]).unwrap();
        let mut img = LayerImage::filled(frame, 0);
        for (x, y) in [(20, 20), (80, 20), (80, 80)] {
            img.set(x, y, 255);
        }
        let err = calibrate(&img, &quadrant_windows(100, 100), 200, &ActivePlane::default(), 6.67).unwrap_err();
        assert_eq!(err, GeometryError::MarkerMissing { window: 3 });
    }

    #[test]
    fn calibration_json_roundtrip() {
        let cal = Calibration {
            markers_px: [[1.0, 2.0]; 4],
            markers_mm: marker_positions(&ActivePlane::default(), 40.0),
            homography: Homography::identity().to_row_major(),
            scale: 6.67,
            plane: ActivePlane::default(),
            camera: None,
            rms_residual_px: 0.0,
        };
        let s = serde_json::to_string(&cal).unwrap();
        assert!(!s.contains("camera"));
        assert_eq!(serde_json::from_str::<Calibration>(&s).unwrap(), cal);
    }
}
