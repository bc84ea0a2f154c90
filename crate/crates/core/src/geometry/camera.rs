use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const ORTHO_TOL: f64 = 1e-9;

/// A world-space ray whose direction has unit camera-frame z.
///
/// `origin + direction * d` is the point at z-depth `d`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray {
    pub origin: Vector3<f64>,
    pub direction: Vector3<f64>,
}

impl Ray {
    pub fn at(&self, depth: f64) -> Vector3<f64> {
        self.origin + self.direction * depth
    }
}

/// Pinhole camera with a world-to-camera pose.
#[derive(Debug, Clone, PartialEq)]
pub struct Camera {
    fx: f64,
    fy: f64,
    cx: f64,
    cy: f64,
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
    width: usize,
    height: usize,
    frame_index: usize,
}

impl Camera {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        fx: f64,
        fy: f64,
        cx: f64,
        cy: f64,
        rotation: Matrix3<f64>,
        translation: Vector3<f64>,
        width: usize,
        height: usize,
        frame_index: usize,
    ) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidCamera(format!(
                "raster size {width}x{height} must be positive"
            )));
        }
        if !(fx > 0.0 && fy > 0.0 && fx.is_finite() && fy.is_finite()) {
            return Err(Error::InvalidCamera(format!(
                "focal lengths must be positive, got fx={fx} fy={fy}"
            )));
        }
        if !(cx >= 0.0 && cx < width as f64 && cy >= 0.0 && cy < height as f64) {
            return Err(Error::InvalidCamera(format!(
                "principal point ({cx}, {cy}) outside {width}x{height} raster"
            )));
        }
        if rotation
            .iter()
            .chain(translation.iter())
            .any(|v| !v.is_finite())
        {
            return Err(Error::InvalidCamera("non-finite pose".into()));
        }
        let ortho = (rotation.transpose() * rotation - Matrix3::identity()).amax();
        let det = rotation.determinant();
        if ortho >= ORTHO_TOL || (det - 1.0).abs() > ORTHO_TOL {
            return Err(Error::InvalidCamera(format!(
                "rotation is not a proper orthonormal matrix (|RtR-I|={ortho:e}, det={det})"
            )));
        }
        Ok(Self {
            fx,
            fy,
            cx,
            cy,
            rotation,
            translation,
            width,
            height,
            frame_index,
        })
    }

    /// Camera at `eye` looking at `target`, with image +y along world `down`
    /// as far as possible.
    #[allow(clippy::too_many_arguments)]
    pub fn look_at(
        eye: Vector3<f64>,
        target: Vector3<f64>,
        down: Vector3<f64>,
        fx: f64,
        fy: f64,
        cx: f64,
        cy: f64,
        width: usize,
        height: usize,
        frame_index: usize,
    ) -> Result<Self> {
        let z = (target - eye)
            .try_normalize(1e-12)
            .ok_or_else(|| Error::InvalidCamera("eye coincides with target".into()))?;
        let x = down
            .cross(&z)
            .try_normalize(1e-12)
            .ok_or_else(|| Error::InvalidCamera("view direction parallel to down".into()))?;
        let y = z.cross(&x);
        let rotation = Matrix3::from_rows(&[x.transpose(), y.transpose(), z.transpose()]);
        let translation = -(rotation * eye);
        Self::new(
            fx,
            fy,
            cx,
            cy,
            rotation,
            translation,
            width,
            height,
            frame_index,
        )
    }

    pub fn fx(&self) -> f64 {
        self.fx
    }
    pub fn fy(&self) -> f64 {
        self.fy
    }
    pub fn cx(&self) -> f64 {
        self.cx
    }
    pub fn cy(&self) -> f64 {
        self.cy
    }
    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }
    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }
    pub fn width(&self) -> usize {
        self.width
    }
    pub fn height(&self) -> usize {
        self.height
    }
    pub fn frame_index(&self) -> usize {
        self.frame_index
    }

    pub fn with_frame_index(mut self, frame_index: usize) -> Self {
        self.frame_index = frame_index;
        self
    }

    /// Camera center in world coordinates, `-Rᵀ t`.
    pub fn center(&self) -> Vector3<f64> {
        -(self.rotation.transpose() * self.translation)
    }

    pub fn world_to_camera(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    /// Ray through the center of pixel `(u, v)`.
    pub fn pixel_ray(&self, u: usize, v: usize) -> Ray {
        debug_assert!(u < self.width && v < self.height);
        self.ray_through(u as f64 + 0.5, v as f64 + 0.5)
    }

    /// Ray through continuous image coordinates `(x, y)`.
    pub fn ray_through(&self, x: f64, y: f64) -> Ray {
        let dir_cam = Vector3::new((x - self.cx) / self.fx, (y - self.cy) / self.fy, 1.0);
        Ray {
            origin: self.center(),
            direction: self.rotation.transpose() * dir_cam,
        }
    }

    /// Continuous image coordinates and camera-z of a world point.
    ///
    /// Returns `None` when the point is not strictly in front of the camera.
    /// The pixel containing the projection is `(x.floor(), y.floor())`.
    pub fn project(&self, p: &Vector3<f64>) -> Option<(f64, f64, f64)> {
        let c = self.world_to_camera(p);
        if !(c.z > 0.0) {
            return None;
        }
        Some((
            self.fx * c.x / c.z + self.cx,
            self.fy * c.y / c.z + self.cy,
            c.z,
        ))
    }

    pub fn to_record(&self) -> CameraRecord {
        let r = &self.rotation;
        CameraRecord {
            frame: self.frame_index,
            fx: self.fx,
            fy: self.fy,
            cx: self.cx,
            cy: self.cy,
            rotation: [
                r[(0, 0)],
                r[(0, 1)],
                r[(0, 2)],
                r[(1, 0)],
                r[(1, 1)],
                r[(1, 2)],
                r[(2, 0)],
                r[(2, 1)],
                r[(2, 2)],
            ],
            translation: [self.translation.x, self.translation.y, self.translation.z],
            width: self.width,
            height: self.height,
        }
    }
}

/// On-disk camera form: `{frame, fx, fy, cx, cy, R: [9 row-major], t: [3], width, height}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CameraRecord {
    pub frame: usize,
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    #[serde(rename = "R")]
    pub rotation: [f64; 9],
    #[serde(rename = "t")]
    pub translation: [f64; 3],
    pub width: usize,
    pub height: usize,
}

impl TryFrom<CameraRecord> for Camera {
    type Error = Error;

    fn try_from(r: CameraRecord) -> Result<Self> {
        Camera::new(
            r.fx,
            r.fy,
            r.cx,
            r.cy,
            Matrix3::from_row_slice(&r.rotation),
            Vector3::from_column_slice(&r.translation),
            r.width,
            r.height,
            r.frame,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{Matrix4, Rotation3, Vector4};

    fn identity(f: f64, c: f64, w: usize, h: usize) -> Camera {
        Camera::new(f, f, c, c, Matrix3::identity(), Vector3::zeros(), w, h, 0).unwrap()
    }

    #[test]
    fn principal_point_ray_is_optical_axis() {
        let cam = identity(1.0, 0.5, 1, 1);
        let ray = cam.pixel_ray(0, 0);
        assert_eq!(ray.origin, Vector3::zeros());
        assert_eq!(ray.direction, Vector3::new(0.0, 0.0, 1.0));
    }

    #[test]
    fn pinhole_direction() {
        let cam = identity(100.0, 50.0, 100, 100);
        let d = cam.pixel_ray(60, 50).direction;
        assert!((d - Vector3::new(0.105, 0.005, 1.0)).amax() < 1e-15);
    }

    #[test]
    fn rotated_pose_matches_homogeneous_matrix_oracle() {
        // oracle: invert the 4x4 world-to-camera matrix and push the
        // camera-frame point (x_n, y_n, 1, 1) and the center (0,0,0,1) through it
        let rot = Rotation3::from_axis_angle(&Vector3::y_axis(), std::f64::consts::FRAC_PI_2);
        let t = Vector3::new(0.3, -1.0, 2.0);
        let cam = Camera::new(80.0, 90.0, 32.0, 24.0, *rot.matrix(), t, 64, 48, 3).unwrap();
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(rot.matrix());
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&t);
        let inv = m.try_inverse().unwrap();
        for &(u, v) in &[(0usize, 0usize), (10, 40), (63, 47), (32, 24)] {
            let ray = cam.pixel_ray(u, v);
            let xn = (u as f64 + 0.5 - 32.0) / 80.0;
            let yn = (v as f64 + 0.5 - 24.0) / 90.0;
            let o = inv * Vector4::new(0.0, 0.0, 0.0, 1.0);
            let p = inv * Vector4::new(xn, yn, 1.0, 1.0);
            let dir = (p - o).xyz();
            assert!((ray.origin - o.xyz()).amax() < 1e-12);
            assert!((ray.direction - dir).amax() < 1e-12);
            // identity-pose direction rotated by Rᵀ
            let ident = Vector3::new(xn, yn, 1.0);
            assert!((ray.direction - rot.matrix().transpose() * ident).amax() < 1e-12);
            assert!((ray.direction.norm() - ident.norm()).abs() < 1e-12);
        }
    }

    #[test]
    fn project_inverts_pixel_ray() {
        let rot = Rotation3::from_euler_angles(0.1, -0.2, 0.3);
        let cam = Camera::new(
            70.0,
            75.0,
            31.0,
            20.0,
            *rot.matrix(),
            Vector3::new(1.0, 2.0, 3.0),
            64,
            48,
            0,
        )
        .unwrap();
        let ray = cam.pixel_ray(17, 9);
        let (x, y, z) = cam.project(&ray.at(4.25)).unwrap();
        assert!((x - 17.5).abs() < 1e-9 && (y - 9.5).abs() < 1e-9);
        assert!((z - 4.25).abs() < 1e-12);
    }

    #[test]
    fn points_behind_are_not_projected() {
        let cam = identity(10.0, 5.0, 10, 10);
        assert!(cam.project(&Vector3::new(0.0, 0.0, -1.0)).is_none());
        assert!(cam.project(&Vector3::new(0.0, 0.0, 0.0)).is_none());
    }

    #[test]
    fn rejects_bad_intrinsics_and_rotation() {
        let r = Matrix3::identity();
        let t = Vector3::zeros();
        assert!(Camera::new(0.0, 1.0, 0.5, 0.5, r, t, 1, 1, 0).is_err());
        assert!(Camera::new(1.0, 1.0, 1.0, 0.5, r, t, 1, 1, 0).is_err());
        assert!(Camera::new(1.0, 1.0, 0.5, 0.5, r * 2.0, t, 1, 1, 0).is_err());
        let mut refl = Matrix3::identity();
        refl[(0, 0)] = -1.0;
        assert!(Camera::new(1.0, 1.0, 0.5, 0.5, refl, t, 1, 1, 0).is_err());
    }

    #[test]
    fn look_at_identity() {
        let cam = Camera::look_at(
            Vector3::zeros(),
            Vector3::new(0.0, 0.0, 5.0),
            Vector3::new(0.0, 1.0, 0.0),
            10.0,
            10.0,
            5.0,
            5.0,
            10,
            10,
            0,
        )
        .unwrap();
        assert!((cam.rotation() - Matrix3::identity()).amax() < 1e-15);
    }

    #[test]
    fn record_round_trip() {
        let rot = Rotation3::from_euler_angles(0.2, 0.4, -0.1);
        let cam = Camera::new(
            50.0,
            60.0,
            10.0,
            12.0,
            *rot.matrix(),
            Vector3::new(1.0, 0.0, -2.0),
            20,
            24,
            7,
        )
        .unwrap();
        let json = serde_json::to_string(&cam.to_record()).unwrap();
        assert!(json.contains("\"R\":[") && json.contains("\"t\":["));
        let back: CameraRecord = serde_json::from_str(&json).unwrap();
        assert_eq!(Camera::try_from(back).unwrap(), cam);
    }
}
