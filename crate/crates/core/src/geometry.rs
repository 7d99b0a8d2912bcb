//! Pinhole camera model, planar homographies and top-view unwrapping.
//!
//! A [`Homography`] maps continuous pixel coordinates of one image onto
//! continuous pixel coordinates of another (see [`crate::layer_image`] for the
//! pixel convention). [`active_plane_homography`] lifts the observation square
//! to the height of the current layer before fitting, so every layer unwraps
//! into the same metric top-view frame.

use nalgebra::{Matrix3, SMatrix, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::layer_image::{Frame, LayerImage};

pub type Point2 = [f64; 2];

/// Default top-view scale, px/mm.
pub const DEFAULT_TOP_VIEW_SCALE: f64 = 6.67;
/// Half side of the 90 x 90 mm observation area.
pub const DEFAULT_HALF_EXTENT_MM: f64 = 45.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("point is behind the camera (depth {depth})")]
    BehindCamera { depth: f64 },
    #[error("degenerate configuration: {0}")]
    Degenerate(String),
    #[error("point maps to infinity")]
    PointAtInfinity,
    #[error("singular homography")]
    Singular,
    #[error("invalid camera: {0}")]
    InvalidCamera(String),
    #[error("marker missing in window {window}")]
    MarkerMissing { window: usize },
    #[error("window {window} lies outside the image")]
    WindowOutOfBounds { window: usize },
    #[error("ambiguous marker ordering: {0}")]
    AmbiguousMarkers(String),
}

/// Planar projective map, stored with canonical scaling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Homography {
    m: Matrix3<f64>,
}

impl Homography {
    pub fn new(m: Matrix3<f64>) -> Result<Self, GeometryError> {
        if !m.iter().all(|v| v.is_finite()) {
            return Err(GeometryError::Singular);
        }
        let scale = m.norm();
        if scale == 0.0 || m.determinant().abs() <= 1e-14 * scale.powi(3) {
            return Err(GeometryError::Singular);
        }
        Ok(Self {
            m: canonicalize(m),
        })
    }

    pub fn identity() -> Self {
        Self {
            m: Matrix3::identity(),
        }
    }

    pub fn from_row_major(v: &[f64; 9]) -> Result<Self, GeometryError> {
        Self::new(Matrix3::from_row_slice(v))
    }

    pub fn to_row_major(&self) -> [f64; 9] {
        let mut out = [0.0; 9];
        for r in 0..3 {
            for c in 0..3 {
                out[r * 3 + c] = self.m[(r, c)];
            }
        }
        out
    }

    pub fn translation(dx: f64, dy: f64) -> Self {
        Self {
            m: Matrix3::new(1.0, 0.0, dx, 0.0, 1.0, dy, 0.0, 0.0, 1.0),
        }
    }

    pub fn scaling_about(center: Point2, factor: f64) -> Self {
        let (cx, cy) = (center[0], center[1]);
        Self {
            m: Matrix3::new(
                factor,
                0.0,
                cx * (1.0 - factor),
                0.0,
                factor,
                cy * (1.0 - factor),
                0.0,
                0.0,
                1.0,
            ),
        }
    }

    pub fn rotation_about(center: Point2, angle_rad: f64) -> Self {
        let (s, c) = angle_rad.sin_cos();
        let (cx, cy) = (center[0], center[1]);
        Self {
            m: Matrix3::new(
                c,
                -s,
                cx - c * cx + s * cy,
                s,
                c,
                cy - s * cx - c * cy,
                0.0,
                0.0,
                1.0,
            ),
        }
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.m
    }

    pub fn inverse(&self) -> Result<Self, GeometryError> {
        let inv = self.m.try_inverse().ok_or(GeometryError::Singular)?;
        Self::new(inv)
    }

    /// `self` followed by `next`.
    pub fn then(&self, next: &Homography) -> Homography {
        Homography {
            m: canonicalize(next.m * self.m),
        }
    }

    pub fn apply(&self, p: Point2) -> Result<Point2, GeometryError> {
        warp_point(self, p)
    }
}

fn canonicalize(m: Matrix3<f64>) -> Matrix3<f64> {
    let norm = m.norm();
    let m22 = m[(2, 2)];
    if m22.abs() > 1e-12 * norm {
        m / m22
    } else {
        m / norm
    }
}

/// Evaluates the rational planar map at `p`.
pub fn warp_point(h: &Homography, p: Point2) -> Result<Point2, GeometryError> {
    let m = &h.m;
    let (x, y) = (p[0], p[1]);
    let w = m[(2, 0)] * x + m[(2, 1)] * y + m[(2, 2)];
    let w_scale = (m[(2, 0)] * x).abs() + (m[(2, 1)] * y).abs() + m[(2, 2)].abs();
    if w.abs() <= 1e-12 * w_scale.max(f64::MIN_POSITIVE) || !w.is_finite() {
        return Err(GeometryError::PointAtInfinity);
    }
    Ok([
        (m[(0, 0)] * x + m[(0, 1)] * y + m[(0, 2)]) / w,
        (m[(1, 0)] * x + m[(1, 1)] * y + m[(1, 2)]) / w,
    ])
}

fn cross2(o: Point2, a: Point2, b: Point2) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

fn check_no_three_collinear(pts: &[Point2; 4], which: &str) -> Result<(), GeometryError> {
    let mut diam2: f64 = 0.0;
    for i in 0..4 {
        for j in i + 1..4 {
            let d = (pts[i][0] - pts[j][0]).powi(2) + (pts[i][1] - pts[j][1]).powi(2);
            diam2 = diam2.max(d);
        }
    }
    if !(diam2 > 0.0) {
        return Err(GeometryError::Degenerate(format!("{which} points coincide")));
    }
    for (a, b, c) in [(0, 1, 2), (0, 1, 3), (0, 2, 3), (1, 2, 3)] {
        if cross2(pts[a], pts[b], pts[c]).abs() <= 1e-10 * diam2 {
            return Err(GeometryError::Degenerate(format!(
                "{which} points {a}, {b}, {c} are collinear"
            )));
        }
    }
    Ok(())
}

/// Similarity transform moving the centroid to the origin with mean
/// distance √2.
fn conditioning(pts: &[Point2; 4]) -> Matrix3<f64> {
    let cx = pts.iter().map(|p| p[0]).sum::<f64>() / 4.0;
    let cy = pts.iter().map(|p| p[1]).sum::<f64>() / 4.0;
    let mean = pts
        .iter()
        .map(|p| (p[0] - cx).hypot(p[1] - cy))
        .sum::<f64>()
        / 4.0;
    let k = std::f64::consts::SQRT_2 / mean;
    Matrix3::new(k, 0.0, -k * cx, 0.0, k, -k * cy, 0.0, 0.0, 1.0)
}

fn apply_raw(m: &Matrix3<f64>, p: Point2) -> Point2 {
    let v = m * Vector3::new(p[0], p[1], 1.0);
    [v.x / v.z, v.y / v.z]
}

/// Exact homography from four point correspondences (8×8 linear solve).
pub fn estimate_homography(src: &[Point2; 4], dst: &[Point2; 4]) -> Result<Homography, GeometryError> {
    check_no_three_collinear(src, "source")?;
    check_no_three_collinear(dst, "destination")?;
    let ts = conditioning(src);
    let td = conditioning(dst);

    let mut a = SMatrix::<f64, 9, 9>::zeros();
    for i in 0..4 {
        let [x, y] = apply_raw(&ts, src[i]);
        let [u, v] = apply_raw(&td, dst[i]);
        let r = 2 * i;
        a.row_mut(r)
            .copy_from_slice(&[x, y, 1.0, 0.0, 0.0, 0.0, -x * u, -y * u, -u]);
        a.row_mut(r + 1)
            .copy_from_slice(&[0.0, 0.0, 0.0, x, y, 1.0, -x * v, -y * v, -v]);
    }
    let svd = a.svd(false, true);
    let v_t = svd.v_t.ok_or_else(|| GeometryError::Degenerate("SVD did not converge".into()))?;
    let (null, _) = svd.singular_values.argmin();
    let h = v_t.row(null);
    let hn = Matrix3::new(h[0], h[1], h[2], h[3], h[4], h[5], h[6], h[7], h[8]);
    if hn.determinant().abs() <= 1e-12 * hn.norm().powi(3) {
        return Err(GeometryError::Singular);
    }
    let td_inv = td.try_inverse().ok_or(GeometryError::Singular)?;
    let m = td_inv * hn * ts;
    if !m.iter().all(|v| v.is_finite()) {
        return Err(GeometryError::Singular);
    }
    Ok(Homography { m: canonicalize(m) })
}

/// Calibrated pinhole camera (no lens distortion).
#[derive(Debug, Clone, PartialEq)]
pub struct CameraModel {
    pub k: Matrix3<f64>,
    /// World → camera rotation.
    pub r: Matrix3<f64>,
    /// Translation in camera frame, mm.
    pub t: Vector3<f64>,
    pub image_dims: (usize, usize),
}

/// On-disk camera calibration layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CameraFile {
    #[serde(rename = "K")]
    pub k: [f64; 9],
    #[serde(rename = "R")]
    pub r: [f64; 9],
    pub t: [f64; 3],
    pub image_dims: [usize; 2],
}

impl CameraModel {
    pub fn new(
        k: Matrix3<f64>,
        r: Matrix3<f64>,
        t: Vector3<f64>,
        image_dims: (usize, usize),
    ) -> Result<Self, GeometryError> {
        let ortho = (r.transpose() * r - Matrix3::identity()).amax();
        if ortho > 1e-9 {
            return Err(GeometryError::InvalidCamera(format!(
                "rotation is not orthonormal (deviation {ortho:e})"
            )));
        }
        if r.determinant() <= 0.0 {
            return Err(GeometryError::InvalidCamera("rotation has negative determinant".into()));
        }
        if k[(1, 0)] != 0.0 || k[(2, 0)] != 0.0 || k[(2, 1)] != 0.0 {
            return Err(GeometryError::InvalidCamera("intrinsics are not upper-triangular".into()));
        }
        if !(k[(0, 0)] > 0.0 && k[(1, 1)] > 0.0 && k[(2, 2)] > 0.0) {
            return Err(GeometryError::InvalidCamera("focal entries must be positive".into()));
        }
        Ok(Self {
            k,
            r,
            t,
            image_dims,
        })
    }

    /// Camera at `eye` looking at `target`; image y runs opposite to `up`.
    pub fn look_at(
        eye: [f64; 3],
        target: [f64; 3],
        up: [f64; 3],
        focal_px: f64,
        image_dims: (usize, usize),
    ) -> Result<Self, GeometryError> {
        let eye = Vector3::from(eye);
        let fwd = (Vector3::from(target) - eye).normalize();
        let right = fwd.cross(&Vector3::from(up));
        if right.norm() < 1e-9 {
            return Err(GeometryError::Degenerate("view direction parallel to up vector".into()));
        }
        let right = right.normalize();
        let down = fwd.cross(&right);
        let r = Matrix3::from_rows(&[right.transpose(), down.transpose(), fwd.transpose()]);
        let t = -(r * eye);
        let k = Matrix3::new(
            focal_px,
            0.0,
            image_dims.0 as f64 / 2.0,
            0.0,
            focal_px,
            image_dims.1 as f64 / 2.0,
            0.0,
            0.0,
            1.0,
        );
        Self::new(k, r, t, image_dims)
    }

    pub fn from_file(f: &CameraFile) -> Result<Self, GeometryError> {
        Self::new(
            Matrix3::from_row_slice(&f.k),
            Matrix3::from_row_slice(&f.r),
            Vector3::from(f.t),
            (f.image_dims[0], f.image_dims[1]),
        )
    }

    pub fn to_file(&self) -> CameraFile {
        let rm = |m: &Matrix3<f64>| {
            let mut o = [0.0; 9];
            for r in 0..3 {
                for c in 0..3 {
                    o[r * 3 + c] = m[(r, c)];
                }
            }
            o
        };
        CameraFile {
            k: rm(&self.k),
            r: rm(&self.r),
            t: [self.t.x, self.t.y, self.t.z],
            image_dims: [self.image_dims.0, self.image_dims.1],
        }
    }

    /// Depth of a world point along the optical axis.
    pub fn depth(&self, x: [f64; 3]) -> f64 {
        (self.r * Vector3::from(x) + self.t).z
    }

    /// Projects a world point (mm) to continuous pixel coordinates.
    pub fn project_point(&self, x: [f64; 3]) -> Result<Point2, GeometryError> {
        project_point(self, x)
    }
}

pub fn project_point(cam: &CameraModel, x: [f64; 3]) -> Result<Point2, GeometryError> {
    let pc = cam.r * Vector3::from(x) + cam.t;
    if !(pc.z > 0.0) {
        return Err(GeometryError::BehindCamera { depth: pc.z });
    }
    let p = cam.k * pc;
    Ok([p.x / p.z, p.y / p.z])
}

/// The observation square at the height of the layer being printed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ActivePlane {
    /// Plane height in mm.
    pub z: f64,
    pub half_extent: f64,
    /// World XY of the square's center.
    pub origin: [f64; 2],
}

impl Default for ActivePlane {
    fn default() -> Self {
        Self {
            z: 0.0,
            half_extent: DEFAULT_HALF_EXTENT_MM,
            origin: [0.0, 0.0],
        }
    }
}

impl ActivePlane {
    pub fn at_height(z: f64) -> Self {
        Self {
            z,
            ..Self::default()
        }
    }

    /// Corners TL, TR, BR, BL as seen in the top view (world +Y is up).
    pub fn corners(&self) -> [[f64; 3]; 4] {
        let (ox, oy, h, z) = (self.origin[0], self.origin[1], self.half_extent, self.z);
        [
            [ox - h, oy + h, z],
            [ox + h, oy + h, z],
            [ox + h, oy - h, z],
            [ox - h, oy - h, z],
        ]
    }

    /// Metric top-view frame of this plane.
    pub fn top_view_frame(&self, scale: f64) -> Result<Frame, GeometryError> {
        if !(self.half_extent > 0.0) {
            return Err(GeometryError::Degenerate("half extent must be positive".into()));
        }
        Frame::centered_square(self.origin, self.half_extent, scale)
            .map_err(|e| GeometryError::Degenerate(e.to_string()))
    }
}

/// Homography from camera pixels of the plane at `plane.z` to the metric
/// top-view frame of that plane.
pub fn active_plane_homography(
    cam: &CameraModel,
    plane: &ActivePlane,
    out_scale: f64,
) -> Result<Homography, GeometryError> {
    let frame = plane.top_view_frame(out_scale)?;
    let corners = plane.corners();
    let mut src = [[0.0; 2]; 4];
    let mut dst = [[0.0; 2]; 4];
    for i in 0..4 {
        src[i] = project_point(cam, corners[i])?;
        dst[i] = frame.world_to_pixel([corners[i][0], corners[i][1]]);
    }
    estimate_homography(&src, &dst)
}

/// Inverse-mapped bilinear resampling of `img` into `out`.
///
/// `h` maps source pixel coordinates to output pixel coordinates. Output
/// pixels whose preimage falls outside the source, or touches invalid source
/// pixels, are flagged invalid.
pub fn warp_image(img: &LayerImage, h: &Homography, out: Frame) -> Result<LayerImage, GeometryError> {
    let inv = h.inverse()?;
    let (sw, sh) = (img.width(), img.height());
    let mut pixels = vec![0u8; out.len()];
    let mut valid = vec![false; out.len()];
    for row in 0..out.height {
        for col in 0..out.width {
            let idx = row * out.width + col;
            let Ok([sx, sy]) = warp_point(&inv, [col as f64 + 0.5, row as f64 + 0.5]) else {
                continue;
            };
            if !(sx >= 0.0 && sy >= 0.0 && sx <= sw as f64 && sy <= sh as f64) {
                continue;
            }
            let fx = (sx - 0.5).clamp(0.0, (sw - 1) as f64);
            let fy = (sy - 0.5).clamp(0.0, (sh - 1) as f64);
            let (x0, y0) = (fx.floor() as usize, fy.floor() as usize);
            let (x1, y1) = ((x0 + 1).min(sw - 1), (y0 + 1).min(sh - 1));
            let (ax, ay) = (fx - x0 as f64, fy - y0 as f64);
            let taps = [
                (x0, y0, (1.0 - ax) * (1.0 - ay)),
                (x1, y0, ax * (1.0 - ay)),
                (x0, y1, (1.0 - ax) * ay),
                (x1, y1, ax * ay),
            ];
            let mut acc = 0.0;
            let mut ok = true;
            for (x, y, w) in taps {
                if w > 0.0 {
                    ok &= img.is_valid(x, y);
                    acc += w * f64::from(img.get(x, y));
                }
            }
            pixels[idx] = acc.round().clamp(0.0, 255.0) as u8;
            valid[idx] = ok;
        }
    }
    let out_img = LayerImage::from_pixels(out, pixels).expect("sized to frame");
    if valid.iter().all(|&v| v) {
        Ok(out_img)
    } else {
        Ok(out_img.with_validity(valid).expect("sized to frame"))
    }
}

/// Search rectangle in pixel indices, `x1`/`y1` exclusive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PixelRect {
    pub x0: usize,
    pub y0: usize,
    pub x1: usize,
    pub y1: usize,
}

impl PixelRect {
    pub fn new(x0: usize, y0: usize, x1: usize, y1: usize) -> Self {
        Self { x0, y0, x1, y1 }
    }

    /// Square window of half side `r` around `(cx, cy)`.
    pub fn around(center: Point2, r: f64) -> Self {
        let lo = |v: f64| (v - r).floor().max(0.0) as usize;
        let hi = |v: f64| (v + r).ceil().max(0.0) as usize;
        Self::new(lo(center[0]), lo(center[1]), hi(center[0]), hi(center[1]))
    }

    fn center(&self) -> Point2 {
        [
            (self.x0 + self.x1) as f64 / 2.0,
            (self.y0 + self.y1) as f64 / 2.0,
        ]
    }
}

/// Intensity-weighted centroids of bright markers, one per window, returned
/// in TL, TR, BR, BL order (decided by window placement).
pub fn detect_markers(
    img: &LayerImage,
    windows: &[PixelRect; 4],
    intensity_threshold: u8,
) -> Result<[Point2; 4], GeometryError> {
    let order = quadrant_order(windows)?;
    let mut out = [[0.0; 2]; 4];
    for (slot, &wi) in order.iter().enumerate() {
        let w = windows[wi];
        if w.x1 > img.width() || w.y1 > img.height() || w.x0 >= w.x1 || w.y0 >= w.y1 {
            return Err(GeometryError::WindowOutOfBounds { window: wi });
        }
        let (mut sx, mut sy, mut sw) = (0.0, 0.0, 0.0);
        for row in w.y0..w.y1 {
            for col in w.x0..w.x1 {
                let v = img.get(col, row);
                if v > intensity_threshold {
                    let wt = f64::from(v);
                    sx += wt * (col as f64 + 0.5);
                    sy += wt * (row as f64 + 0.5);
                    sw += wt;
                }
            }
        }
        if sw == 0.0 {
            return Err(GeometryError::MarkerMissing { window: wi });
        }
        out[slot] = [sx / sw, sy / sw];
    }
    Ok(out)
}

/// Window indices sorted into TL, TR, BR, BL by quadrant around their mean.
fn quadrant_order(windows: &[PixelRect; 4]) -> Result<[usize; 4], GeometryError> {
    let centers: Vec<Point2> = windows.iter().map(PixelRect::center).collect();
    let mx = centers.iter().map(|c| c[0]).sum::<f64>() / 4.0;
    let my = centers.iter().map(|c| c[1]).sum::<f64>() / 4.0;
    let mut slots = [usize::MAX; 4];
    for (i, c) in centers.iter().enumerate() {
        if c[0] == mx || c[1] == my {
            return Err(GeometryError::AmbiguousMarkers(format!(
                "window {i} is centered on a quadrant boundary"
            )));
        }
        let slot = match (c[1] < my, c[0] < mx) {
            (true, true) => 0,
            (true, false) => 1,
            (false, false) => 2,
            (false, true) => 3,
        };
        if slots[slot] != usize::MAX {
            return Err(GeometryError::AmbiguousMarkers(format!(
                "windows {} and {i} share a quadrant",
                slots[slot]
            )));
        }
        slots[slot] = i;
    }
    Ok(slots)
}
