use nalgebra::{Matrix3, Vector3};

use super::{Camera, DepthMap, Image, Mask};
use crate::error::Result;
use crate::par;

/// Colored world-space points with their source pixel.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointCloud {
    positions: Vec<Vector3<f64>>,
    colors: Vec<[f32; 3]>,
    source_pixel: Vec<(u32, u32)>,
}

impl PointCloud {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity(n: usize) -> Self {
        Self {
            positions: Vec::with_capacity(n),
            colors: Vec::with_capacity(n),
            source_pixel: Vec::with_capacity(n),
        }
    }

    pub fn push(&mut self, position: Vector3<f64>, color: [f32; 3], source: (u32, u32)) {
        debug_assert!(position.iter().all(|c| c.is_finite()));
        self.positions.push(position);
        self.colors.push(color);
        self.source_pixel.push(source);
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }
    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }
    pub fn positions(&self) -> &[Vector3<f64>] {
        &self.positions
    }
    pub fn colors(&self) -> &[[f32; 3]] {
        &self.colors
    }
    pub fn source_pixels(&self) -> &[(u32, u32)] {
        &self.source_pixel
    }

    pub fn extend(&mut self, other: PointCloud) {
        self.positions.extend(other.positions);
        self.colors.extend(other.colors);
        self.source_pixel.extend(other.source_pixel);
    }

    /// Applies `x ↦ R x + t` to every point.
    pub fn transformed(&self, rotation: &Matrix3<f64>, translation: &Vector3<f64>) -> PointCloud {
        PointCloud {
            positions: self
                .positions
                .iter()
                .map(|p| rotation * p + translation)
                .collect(),
            colors: self.colors.clone(),
            source_pixel: self.source_pixel.clone(),
        }
    }
}

/// Lifts every selected pixel with valid, positive depth to
/// `origin + direction * depth`, colored by `image`.
///
/// Points are emitted in row-major pixel order.
pub fn backproject(
    depth: &DepthMap,
    image: &Image,
    camera: &Camera,
    select: Option<&Mask>,
) -> Result<PointCloud> {
    let (w, h) = (camera.width(), camera.height());
    depth.check_size("depth", w, h)?;
    image.check_size("image", w, h)?;
    if let Some(m) = select {
        m.check_size("selection mask", w, h)?;
    }
    let rows = par::map_range(h, |y| {
        let mut row = PointCloud::with_capacity(w);
        for x in 0..w {
            if select.is_some_and(|m| !m.get(x, y)) {
                continue;
            }
            match depth.get(x, y) {
                Some(d) if d > 0.0 => {
                    let p = camera.pixel_ray(x, y).at(d);
                    row.push(p, image.get(x, y), (x as u32, y as u32));
                }
                _ => {}
            }
        }
        row
    });
    let mut cloud = PointCloud::with_capacity(rows.iter().map(|r| r.len()).sum());
    for r in rows {
        cloud.extend(r);
    }
    Ok(cloud)
}

/// Z-buffered nearest-depth raster of the cloud; unhit pixels are invalid.
pub fn project_depth(cloud: &PointCloud, camera: &Camera) -> DepthMap {
    crate::splat::render_cloud(cloud, camera, 0).depth
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Rotation3;

    fn ident(f: f64, w: usize, h: usize) -> Camera {
        Camera::new(
            f,
            f,
            w as f64 / 2.0,
            h as f64 / 2.0,
            Matrix3::identity(),
            Vector3::zeros(),
            w,
            h,
            0,
        )
        .unwrap()
    }

    #[test]
    fn single_pixel() {
        let cam = Camera::new(
            1.0,
            1.0,
            0.5,
            0.5,
            Matrix3::identity(),
            Vector3::zeros(),
            1,
            1,
            0,
        )
        .unwrap();
        let c = backproject(
            &DepthMap::constant(1, 1, 2.0),
            &Image::filled(1, 1, [0.2, 0.4, 0.6]),
            &cam,
            None,
        )
        .unwrap();
        assert_eq!(c.positions(), &[Vector3::new(0.0, 0.0, 2.0)]);
        assert_eq!(c.colors(), &[[0.2, 0.4, 0.6]]);
        assert_eq!(c.source_pixels(), &[(0, 0)]);
    }

    #[test]
    fn all_invalid_is_empty() {
        let cam = ident(10.0, 8, 8);
        let c = backproject(&DepthMap::invalid(8, 8), &Image::black(8, 8), &cam, None).unwrap();
        assert!(c.is_empty());
    }

    #[test]
    fn plane_points_lie_on_plane() {
        let cam = ident(10.0, 8, 8);
        let c = backproject(
            &DepthMap::constant(8, 8, 3.0),
            &Image::black(8, 8),
            &cam,
            None,
        )
        .unwrap();
        assert_eq!(c.len(), 64);
        assert!(c.positions().iter().all(|p| (p.z - 3.0).abs() < 1e-9));
    }

    #[test]
    fn selection_mask_limits_points() {
        let cam = ident(10.0, 8, 8);
        let sel = Mask::rect(8, 8, 2, 2, 5, 4);
        let c = backproject(
            &DepthMap::constant(8, 8, 1.0),
            &Image::black(8, 8),
            &cam,
            Some(&sel),
        )
        .unwrap();
        assert_eq!(c.len(), 6);
        assert!(c
            .source_pixels()
            .iter()
            .all(|&(x, y)| sel.get(x as usize, y as usize)));
    }

    #[test]
    fn size_mismatch_is_an_error() {
        let cam = ident(10.0, 8, 8);
        let err = backproject(
            &DepthMap::constant(7, 8, 1.0),
            &Image::black(8, 8),
            &cam,
            None,
        );
        assert!(matches!(err, Err(crate::Error::Dimension { .. })));
    }

    #[test]
    fn ray_depth_consistency() {
        let rot = Rotation3::from_euler_angles(0.3, -0.7, 1.1);
        let cam = Camera::new(
            40.0,
            45.0,
            15.0,
            11.0,
            *rot.matrix(),
            Vector3::new(-2.0, 0.5, 4.0),
            32,
            24,
            0,
        )
        .unwrap();
        for (x, y, d) in [(0, 0, 0.5), (31, 23, 7.0), (12, 5, 100.0)] {
            let p = cam.pixel_ray(x, y).at(d);
            let z = (cam.rotation() * (p - cam.center())).z;
            assert!((z - d).abs() < 1e-9 * d.max(1.0));
        }
    }
}
