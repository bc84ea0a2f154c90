//! Z-buffered point splatting of a colored cloud into guidance frames.
//!
//! Each point covers the pixel containing its projection plus every pixel
//! whose center lies within `radius` pixels of it. The nearest camera-z wins
//! per pixel; on exactly equal depth the lower point index wins.
//!
//! The raster is split into horizontal bands. Points are bucketed per band in
//! index order and each band is z-buffered independently, so the result is
//! the same for any number of threads.

use crate::geometry::{Camera, DepthMap, Image, Mask, PointCloud};
use crate::par;

pub const DEFAULT_SPLAT_RADIUS: u32 = 1;

const BAND_ROWS: usize = 16;

/// One rendered guidance frame.
#[derive(Debug, Clone, PartialEq)]
pub struct RenderedFrame {
    pub color: Image,
    pub depth: DepthMap,
    /// `true` where at least one splat landed.
    pub coverage: Mask,
}

impl RenderedFrame {
    pub fn coverage_fraction(&self) -> f64 {
        self.coverage.count() as f64 / (self.coverage.width() * self.coverage.height()) as f64
    }
}

#[derive(Clone, Copy)]
struct Splat {
    x: f64,
    y: f64,
    z: f64,
}

#[derive(Clone, Copy)]
struct ZCell {
    z: f64,
    point: u32,
}

const EMPTY: ZCell = ZCell {
    z: f64::INFINITY,
    point: u32::MAX,
};

/// Integer pixel bounds `[x0, x1] x [y0, y1]` touched by a splat, unclipped.
fn footprint(s: &Splat, radius: f64) -> (i64, i64, i64, i64) {
    let (px, py) = (s.x.floor() as i64, s.y.floor() as i64);
    if radius <= 0.0 {
        return (px, px, py, py);
    }
    let x0 = ((s.x - radius - 0.5).ceil() as i64).min(px);
    let x1 = ((s.x + radius - 0.5).floor() as i64).max(px);
    let y0 = ((s.y - radius - 0.5).ceil() as i64).min(py);
    let y1 = ((s.y + radius - 0.5).floor() as i64).max(py);
    (x0, x1, y0, y1)
}

#[inline]
fn covers(s: &Splat, radius: f64, ix: i64, iy: i64) -> bool {
    if ix == s.x.floor() as i64 && iy == s.y.floor() as i64 {
        return true;
    }
    let dx = ix as f64 + 0.5 - s.x;
    let dy = iy as f64 + 0.5 - s.y;
    dx * dx + dy * dy <= radius * radius
}

/// Renders `cloud` under `camera` with circular splats of `radius` pixels.
pub fn render_cloud(cloud: &PointCloud, camera: &Camera, radius: u32) -> RenderedFrame {
    let (w, h) = (camera.width(), camera.height());
    let r = radius as f64;
    assert!(cloud.len() < u32::MAX as usize, "point cloud too large");

    let splats: Vec<Option<Splat>> = par::map_slice(cloud.positions(), |p| {
        camera.project(p).and_then(|(x, y, z)| {
            // far outside the raster: skip before integer conversion
            let margin = r + 2.0;
            if x < -margin || y < -margin || x > w as f64 + margin || y > h as f64 + margin {
                None
            } else {
                Some(Splat { x, y, z })
            }
        })
    });

    let bands = h.div_ceil(BAND_ROWS);
    let mut buckets: Vec<Vec<u32>> = vec![Vec::new(); bands];
    for (i, s) in splats.iter().enumerate() {
        let Some(s) = s else { continue };
        let (x0, x1, y0, y1) = footprint(s, r);
        if x1 < 0 || y1 < 0 || x0 >= w as i64 || y0 >= h as i64 {
            continue;
        }
        let b0 = (y0.max(0) as usize) / BAND_ROWS;
        let b1 = (y1.min(h as i64 - 1) as usize) / BAND_ROWS;
        for bucket in &mut buckets[b0..=b1] {
            bucket.push(i as u32);
        }
    }

    let mut zbuf = vec![EMPTY; w * h];
    par::for_each_chunk_mut(&mut zbuf, BAND_ROWS * w, |band, cells| {
        let row0 = (band * BAND_ROWS) as i64;
        let rows = (cells.len() / w) as i64;
        for &pi in &buckets[band] {
            let s = splats[pi as usize].as_ref().expect("bucketed splat exists");
            let (x0, x1, y0, y1) = footprint(s, r);
            for iy in y0.max(row0)..=y1.min(row0 + rows - 1) {
                for ix in x0.max(0)..=x1.min(w as i64 - 1) {
                    if !covers(s, r, ix, iy) {
                        continue;
                    }
                    let cell = &mut cells[(iy - row0) as usize * w + ix as usize];
                    // strict: an equal depth keeps the earlier (lower) index
                    if s.z < cell.z {
                        *cell = ZCell { z: s.z, point: pi };
                    }
                }
            }
        }
    });

    let colors = cloud.colors();
    let mut color = Image::black(w, h);
    let mut depth = DepthMap::invalid(w, h);
    let mut coverage = Mask::new(w, h);
    for (i, cell) in zbuf.iter().enumerate() {
        if cell.point != u32::MAX {
            let (x, y) = (i % w, i / w);
            color.set(x, y, colors[cell.point as usize]);
            depth.set(x, y, Some(cell.z));
            coverage.set(x, y, true);
        }
    }
    RenderedFrame {
        color,
        depth,
        coverage,
    }
}

/// [`render_cloud`] for every camera, order preserved.
pub fn render_sequence(cloud: &PointCloud, cameras: &[Camera], radius: u32) -> Vec<RenderedFrame> {
    par::map_slice(cameras, |cam| render_cloud(cloud, cam, radius))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::backproject;
    use nalgebra::{Matrix3, Vector3};
    use proptest::prelude::*;

    fn cam(w: usize, h: usize) -> Camera {
        Camera::new(
            20.0,
            20.0,
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
    fn empty_cloud_renders_black() {
        let f = render_cloud(&PointCloud::new(), &cam(8, 6), 1);
        assert!(f.coverage.is_empty());
        assert_eq!(f.color, Image::black(8, 6));
        assert_eq!(f.depth.valid_count(), 0);
    }

    #[test]
    fn nearer_point_on_same_ray_wins() {
        let c = cam(8, 6);
        let ray = c.pixel_ray(3, 2);
        let mut cloud = PointCloud::new();
        cloud.push(ray.at(2.0), [1.0, 0.0, 0.0], (0, 0));
        cloud.push(ray.at(1.0), [0.0, 1.0, 0.0], (0, 0));
        let f = render_cloud(&cloud, &c, 0);
        assert_eq!(f.depth.get(3, 2), Some(1.0));
        assert_eq!(f.color.get(3, 2), [0.0, 1.0, 0.0]);
        assert_eq!(f.coverage.count(), 1);
    }

    #[test]
    fn equal_depth_tie_goes_to_lower_index() {
        let c = cam(8, 6);
        let ray = c.pixel_ray(1, 1);
        let mut cloud = PointCloud::new();
        cloud.push(ray.at(2.0), [1.0, 0.0, 0.0], (0, 0));
        cloud.push(ray.at(2.0), [0.0, 0.0, 1.0], (0, 0));
        assert_eq!(render_cloud(&cloud, &c, 0).color.get(1, 1), [1.0, 0.0, 0.0]);
    }

    #[test]
    fn round_trip_colors_exact_at_radius_zero() {
        let c = cam(40, 36);
        let img = Image::from_fn(40, 36, |x, y| [x as f32 / 40.0, y as f32 / 36.0, 0.25]);
        let depth = DepthMap::from_fn(40, 36, |x, y| Some(2.0 + 0.01 * x as f64 + 0.02 * y as f64));
        let cloud = backproject(&depth, &img, &c, None).unwrap();
        let f = render_cloud(&cloud, &c, 0);
        assert_eq!(f.coverage.count(), 40 * 36);
        assert_eq!(f.color, img);
    }

    #[test]
    fn splat_across_band_boundary() {
        let c = cam(32, 40);
        let mut cloud = PointCloud::new();
        // pixel row 15 is the last row of band 0
        cloud.push(c.pixel_ray(10, 15).at(1.0), [1.0; 3], (0, 0));
        let f = render_cloud(&cloud, &c, 2);
        assert!(f.coverage.get(10, 17) && f.coverage.get(10, 13));
        assert!(!f.coverage.get(10, 18));
        assert_eq!(f.coverage.count(), 13);
    }

    #[test]
    fn behind_camera_is_culled() {
        let c = cam(8, 8);
        let mut cloud = PointCloud::new();
        cloud.push(Vector3::new(0.0, 0.0, -1.0), [1.0; 3], (0, 0));
        assert!(render_cloud(&cloud, &c, 3).coverage.is_empty());
    }

    proptest! {
        #[test]
        fn zbuffer_keeps_minimum_depth(
            px in 0usize..16, py in 0usize..12, d1 in 0.1f64..50.0, d2 in 0.1f64..50.0
        ) {
            let c = cam(16, 12);
            let ray = c.pixel_ray(px, py);
            let mut cloud = PointCloud::new();
            cloud.push(ray.at(d1), [0.5; 3], (0, 0));
            cloud.push(ray.at(d2), [0.5; 3], (0, 0));
            let f = render_cloud(&cloud, &c, 0);
            let got = f.depth.get(px, py).unwrap();
            prop_assert!((got - d1.min(d2)).abs() < 1e-9 * d1.max(d2));
        }

        #[test]
        fn coverage_grows_with_radius(seed in any::<u64>(), r in 0u32..4) {
            let c = cam(24, 20);
            let mut cloud = PointCloud::new();
            let mut s = seed;
            for _ in 0..20 {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                let x = (s >> 33) as f64 / (1u64 << 31) as f64 * 24.0;
                let y = ((s >> 11) & 0xfffff) as f64 / (1u64 << 20) as f64 * 20.0;
                cloud.push(c.ray_through(x, y).at(1.0 + (s % 7) as f64), [1.0; 3], (0, 0));
            }
            let a = render_cloud(&cloud, &c, r).coverage;
            let b = render_cloud(&cloud, &c, r + 1).coverage;
            prop_assert!(a.is_subset_of(&b));
        }
    }
}
