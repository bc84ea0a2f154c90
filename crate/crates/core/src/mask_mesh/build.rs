use std::collections::VecDeque;

use nalgebra::Vector3;

use super::{MaskMesh, Surface};
use crate::error::{Error, Result};
use crate::geometry::{Camera, DepthMap, Mask};

const MIN_AREA: f64 = 1e-12;

/// 4-connected component labels in row-major discovery order.
fn label_components(mask: &Mask) -> Vec<Vec<usize>> {
    let (w, h) = (mask.width(), mask.height());
    let mut seen = vec![false; w * h];
    let mut comps = Vec::new();
    for start in 0..w * h {
        if !mask.get_index(start) || seen[start] {
            continue;
        }
        let mut comp = Vec::new();
        let mut queue = VecDeque::from([start]);
        seen[start] = true;
        while let Some(i) = queue.pop_front() {
            comp.push(i);
            let (x, y) = (i % w, i / w);
            let mut visit = |j: usize| {
                if mask.get_index(j) && !seen[j] {
                    seen[j] = true;
                    queue.push_back(j);
                }
            };
            if x > 0 {
                visit(i - 1);
            }
            if x + 1 < w {
                visit(i + 1);
            }
            if y > 0 {
                visit(i - w);
            }
            if y + 1 < h {
                visit(i + w);
            }
        }
        comp.sort_unstable();
        comps.push(comp);
    }
    comps
}

fn area(a: &Vector3<f64>, b: &Vector3<f64>, c: &Vector3<f64>) -> f64 {
    0.5 * (b - a).cross(&(c - a)).norm()
}

struct Builder {
    mesh: MaskMesh,
}

impl Builder {
    fn tri(&mut self, t: [u32; 3], surface: Surface) {
        let v = &self.mesh.vertices;
        if area(&v[t[0] as usize], &v[t[1] as usize], &v[t[2] as usize]) >= MIN_AREA {
            self.mesh.triangles.push(t);
            self.mesh.surfaces.push(surface);
        }
    }
}

/// Builds the closed mask mesh for `mask` seen from `camera`.
///
/// * frontal: every masked pixel lifted to `merged_front`; each fully masked
///   2x2 block becomes two triangles split along the top-left to
///   bottom-right diagonal;
/// * back: the same grid at the uniform depth
///   `max(d_ori, d_edit over the mask) + epsilon`;
/// * side: one quad (two triangles) per 4-neighbor mask edge that is not
///   interior to two blocks, i.e. every contour edge including holes and
///   one-pixel-wide strands.
///
/// Each 4-connected component gets its own contiguous vertex range.
pub fn build_mask_mesh(
    mask: &Mask,
    merged_front: &DepthMap,
    d_ori: &DepthMap,
    d_edit: &DepthMap,
    camera: &Camera,
    epsilon: f64,
) -> Result<MaskMesh> {
    let (w, h) = (camera.width(), camera.height());
    mask.check_size("mask", w, h)?;
    merged_front.check_size("merged depth", w, h)?;
    d_ori.check_size("original depth", w, h)?;
    d_edit.check_size("edited depth", w, h)?;
    if mask.is_empty() {
        return Err(Error::EmptyMask);
    }

    let mut far = f64::NEG_INFINITY;
    for i in (0..w * h).filter(|&i| mask.get_index(i)) {
        for v in [d_ori.get_index(i), d_edit.get_index(i)]
            .into_iter()
            .flatten()
        {
            far = far.max(v);
        }
        if merged_front.get_index(i).is_none() {
            return Err(Error::IncompleteDepth {
                source_name: "merged",
                x: i % w,
                y: i / w,
            });
        }
    }
    let back_depth = far + epsilon;

    let mut b = Builder {
        mesh: MaskMesh::default(),
    };
    let inside = |x: isize, y: isize| {
        x >= 0 && y >= 0 && (x as usize) < w && (y as usize) < h && mask.get(x as usize, y as usize)
    };
    // top-left corner (x, y) of a fully masked 2x2 block
    let block = |x: isize, y: isize| {
        inside(x, y) && inside(x + 1, y) && inside(x, y + 1) && inside(x + 1, y + 1)
    };

    for comp in label_components(mask) {
        let base = b.mesh.vertices.len() as u32;
        let n = comp.len() as u32;
        let local = |i: usize| -> u32 {
            base + comp.binary_search(&i).expect("neighbor in same component") as u32
        };
        for &i in &comp {
            let ray = camera.pixel_ray(i % w, i / w);
            b.mesh
                .vertices
                .push(ray.at(merged_front.get_index(i).expect("checked above")));
        }
        for &i in &comp {
            b.mesh
                .vertices
                .push(camera.pixel_ray(i % w, i / w).at(back_depth));
        }
        b.mesh.frontal_vertices += comp.len();
        b.mesh.back_vertices += comp.len();

        for &i in &comp {
            let (x, y) = ((i % w) as isize, (i / w) as isize);
            let right = i + 1;
            let down = i + w;

            if block(x, y) {
                let (tl, tr, bl, br) = (local(i), local(right), local(down), local(down + 1));
                b.tri([tl, tr, br], Surface::Frontal);
                b.tri([tl, br, bl], Surface::Frontal);
                b.tri([tl + n, br + n, tr + n], Surface::Back);
                b.tri([tl + n, bl + n, br + n], Surface::Back);
            }

            // horizontal edge to the right neighbor: blocks above and below
            if inside(x + 1, y) {
                let shared = block(x, y - 1) as u8 + block(x, y) as u8;
                if shared < 2 {
                    side_quad(&mut b, local(i), local(right), n);
                }
            }
            // vertical edge to the lower neighbor: blocks left and right
            if inside(x, y + 1) {
                let shared = block(x - 1, y) as u8 + block(x, y) as u8;
                if shared < 2 {
                    side_quad(&mut b, local(i), local(down), n);
                }
            }
            if !inside(x - 1, y) && !inside(x + 1, y) && !inside(x, y - 1) && !inside(x, y + 1) {
                let f = local(i);
                b.mesh.spikes.push([f, f + n]);
            }
        }
    }
    Ok(b.mesh)
}

fn side_quad(b: &mut Builder, fa: u32, fb: u32, n: u32) {
    let (ba, bb) = (fa + n, fb + n);
    b.tri([fa, fb, bb], Surface::Side);
    b.tri([fa, bb, ba], Surface::Side);
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Matrix3;

    fn cam(w: usize, h: usize) -> Camera {
        Camera::new(
            50.0,
            50.0,
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

    fn build(mask: &Mask, depth: f64, eps: f64) -> MaskMesh {
        let (w, h) = (mask.width(), mask.height());
        let d = DepthMap::constant(w, h, depth);
        let front = super::super::merge_mask_depth(&d, &d, mask, eps).unwrap();
        build_mask_mesh(mask, &front, &d, &d, &cam(w, h), eps).unwrap()
    }

    /// Independent count of 4-neighbor edges not shared by two full blocks.
    fn contour_edges(mask: &Mask) -> usize {
        let (w, h) = (mask.width() as isize, mask.height() as isize);
        let m = |x: isize, y: isize| {
            x >= 0 && y >= 0 && x < w && y < h && mask.get(x as usize, y as usize)
        };
        let full = |x: isize, y: isize| m(x, y) && m(x + 1, y) && m(x, y + 1) && m(x + 1, y + 1);
        let mut n = 0;
        for y in 0..h {
            for x in 0..w {
                if m(x, y) && m(x + 1, y) && !(full(x, y - 1) && full(x, y)) {
                    n += 1;
                }
                if m(x, y) && m(x, y + 1) && !(full(x - 1, y) && full(x, y)) {
                    n += 1;
                }
            }
        }
        n
    }

    #[test]
    fn two_by_two_hand_count() {
        let mesh = build(&Mask::rect(6, 6, 2, 2, 4, 4), 3.0, 0.02);
        assert_eq!(mesh.frontal_vertex_count(), 4);
        assert_eq!(mesh.back_vertex_count(), 4);
        assert_eq!(mesh.vertices().len(), 8);
        assert_eq!(mesh.triangle_count(Surface::Frontal), 2);
        assert_eq!(mesh.triangle_count(Surface::Back), 2);
        assert_eq!(mesh.triangle_count(Surface::Side), 8);
        assert!(mesh.spikes().is_empty());
    }

    #[test]
    fn single_pixel_is_a_spike() {
        let mesh = build(&Mask::rect(4, 4, 1, 1, 2, 2), 3.0, 0.02);
        assert_eq!(mesh.vertices().len(), 2);
        assert!(mesh.triangles().is_empty());
        assert_eq!(mesh.spikes(), &[[0, 1]]);
    }

    #[test]
    fn empty_mask_is_rejected() {
        let d = DepthMap::constant(4, 4, 1.0);
        let r = build_mask_mesh(&Mask::new(4, 4), &d, &d, &d, &cam(4, 4), 0.02);
        assert!(matches!(r, Err(Error::EmptyMask)));
    }

    #[test]
    fn planar_frontal_square() {
        let mesh = build(&Mask::rect(20, 20, 5, 5, 15, 15), 4.0, 0.02);
        let nf = mesh.frontal_vertex_count();
        assert_eq!(nf, 100);
        assert!(mesh.vertices()[..nf]
            .iter()
            .all(|v| (v.z - 3.98).abs() < 1e-12));
        assert!(mesh.vertices()[nf..]
            .iter()
            .all(|v| (v.z - 4.02).abs() < 1e-12));
        // 9x9 blocks, two triangles each
        assert_eq!(mesh.triangle_count(Surface::Frontal), 162);
        assert_eq!(mesh.triangle_count(Surface::Side), 2 * 36);
    }

    #[test]
    fn side_quads_match_contour_count_on_irregular_masks() {
        let masks = [
            Mask::from_fn(12, 9, |x, y| (x * 7 + y * 3) % 5 != 0 && x > 0 && y < 8),
            Mask::from_fn(12, 9, |x, y| x == 4 || y == 3),
            // ring with a hole
            Mask::from_fn(12, 9, |x, y| (2..10).contains(&x) && (1..8).contains(&y))
                .and(&Mask::rect(12, 9, 4, 3, 7, 6).complement()),
        ];
        for m in &masks {
            let mesh = build(m, 2.0, 0.05);
            assert_eq!(mesh.triangle_count(Surface::Side), 2 * contour_edges(m));
            let isolated = (0..m.width() * m.height())
                .filter(|&i| {
                    let (x, y) = ((i % m.width()) as isize, (i / m.width()) as isize);
                    let g = |x: isize, y: isize| {
                        x >= 0
                            && y >= 0
                            && (x as usize) < m.width()
                            && (y as usize) < m.height()
                            && m.get(x as usize, y as usize)
                    };
                    g(x, y) && !g(x - 1, y) && !g(x + 1, y) && !g(x, y - 1) && !g(x, y + 1)
                })
                .count();
            assert_eq!(mesh.spikes().len(), isolated);
            assert!(mesh
                .triangles()
                .iter()
                .flatten()
                .all(|&i| (i as usize) < mesh.vertices().len()));
        }
    }

    #[test]
    fn components_get_contiguous_vertex_ranges() {
        let m = Mask::rect(10, 4, 0, 0, 2, 2).or(&Mask::rect(10, 4, 5, 1, 8, 3));
        let mesh = build(&m, 1.0, 0.02);
        assert_eq!(mesh.vertices().len(), 2 * (4 + 6));
        // first component uses vertices 0..8, second 8..20
        for t in mesh.triangles() {
            let lo = t.iter().all(|&i| i < 8);
            let hi = t.iter().all(|&i| (8..20).contains(&i));
            assert!(lo ^ hi);
        }
    }

    #[test]
    fn zero_epsilon_flat_scene_drops_degenerate_walls() {
        let mesh = build(&Mask::rect(6, 6, 1, 1, 4, 4), 2.0, 0.0);
        assert_eq!(mesh.triangle_count(Surface::Side), 0);
        assert_eq!(mesh.triangle_count(Surface::Frontal), 8);
    }

    #[test]
    fn obj_export_lists_everything() {
        let mesh = build(&Mask::rect(6, 6, 2, 2, 4, 4), 3.0, 0.02);
        let obj = mesh.to_obj();
        assert_eq!(obj.lines().filter(|l| l.starts_with("v ")).count(), 8);
        assert_eq!(obj.lines().filter(|l| l.starts_with("f ")).count(), 12);
        assert!(obj.contains("g frontal") && obj.contains("g back") && obj.contains("g side"));
    }
}
