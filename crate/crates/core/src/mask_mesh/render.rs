use nalgebra::{Vector2, Vector3};

use super::MaskMesh;
use crate::geometry::{Camera, Mask};
use crate::par;

/// Near clipping distance in camera-z.
const NEAR: f64 = 1e-6;
/// Pixel centers within this many pixels outside an edge still count as inside.
const EDGE_TOL: f64 = 1e-7;
const BAND_ROWS: usize = 16;

type P2 = Vector2<f64>;

/// Sutherland-Hodgman against `z >= NEAR`.
fn clip_near(poly: &[Vector3<f64>]) -> Vec<Vector3<f64>> {
    let mut out = Vec::with_capacity(poly.len() + 1);
    for i in 0..poly.len() {
        let a = poly[i];
        let b = poly[(i + 1) % poly.len()];
        let (ain, bin) = (a.z >= NEAR, b.z >= NEAR);
        if ain {
            out.push(a);
        }
        if ain != bin {
            let t = (NEAR - a.z) / (b.z - a.z);
            out.push(a + (b - a) * t);
        }
    }
    out
}

fn to_image(camera: &Camera, c: &Vector3<f64>) -> P2 {
    P2::new(
        camera.fx() * c.x / c.z + camera.cx(),
        camera.fy() * c.y / c.z + camera.cy(),
    )
}

#[inline]
fn cross(a: P2, b: P2) -> f64 {
    a.x * b.y - a.y * b.x
}

fn near_segment(p: P2, a: P2, b: P2) -> bool {
    let ab = b - a;
    let len2 = ab.norm_squared();
    let t = if len2 > 0.0 {
        ((p - a).dot(&ab) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    (a + ab * t - p).norm() <= EDGE_TOL
}

/// Screen-space primitive after clipping and projection.
enum Prim {
    Tri([P2; 3]),
    Line(P2, P2),
}

impl Prim {
    fn rows(&self) -> (f64, f64) {
        match self {
            Prim::Tri(t) => (
                t.iter().map(|p| p.y).fold(f64::INFINITY, f64::min),
                t.iter().map(|p| p.y).fold(f64::NEG_INFINITY, f64::max),
            ),
            Prim::Line(a, b) => (a.y.min(b.y), a.y.max(b.y)),
        }
    }
}

fn project_primitives(mesh: &MaskMesh, camera: &Camera) -> Vec<Prim> {
    let cam_verts: Vec<Vector3<f64>> = mesh
        .vertices
        .iter()
        .map(|v| camera.world_to_camera(v))
        .collect();
    let mut prims = Vec::new();
    for t in &mesh.triangles {
        let poly = [
            cam_verts[t[0] as usize],
            cam_verts[t[1] as usize],
            cam_verts[t[2] as usize],
        ];
        if poly.iter().all(|v| v.z < NEAR) {
            continue;
        }
        let clipped = clip_near(&poly);
        if clipped.len() < 3 {
            continue;
        }
        let pts: Vec<P2> = clipped.iter().map(|c| to_image(camera, c)).collect();
        for k in 1..pts.len() - 1 {
            prims.push(Prim::Tri([pts[0], pts[k], pts[k + 1]]));
        }
    }
    for s in &mesh.spikes {
        let seg = [cam_verts[s[0] as usize], cam_verts[s[1] as usize]];
        let (a, b) = match (seg[0].z >= NEAR, seg[1].z >= NEAR) {
            (false, false) => continue,
            (true, true) => (seg[0], seg[1]),
            (ain, _) => {
                let (inside, outside) = if ain {
                    (seg[0], seg[1])
                } else {
                    (seg[1], seg[0])
                };
                let t = (NEAR - inside.z) / (outside.z - inside.z);
                (inside, inside + (outside - inside) * t)
            }
        };
        prims.push(Prim::Line(to_image(camera, &a), to_image(camera, &b)));
    }
    prims
}

/// Marks pixel centers inside (or on the boundary of) a screen triangle.
fn fill_triangle(t: &[P2; 3], w: usize, row0: usize, rows: usize, cells: &mut [bool]) {
    let (mut a, mut b, c) = (t[0], t[1], t[2]);
    let area2 = cross(b - a, c - a);
    if area2 < 0.0 {
        std::mem::swap(&mut a, &mut b);
    }
    let degenerate = area2.abs() < 1e-12;
    let edges = [(a, b), (b, c), (c, a)];
    let lens = edges.map(|(p, q)| (q - p).norm());

    let minx = a.x.min(b.x).min(c.x) - EDGE_TOL;
    let maxx = a.x.max(b.x).max(c.x) + EDGE_TOL;
    let miny = a.y.min(b.y).min(c.y) - EDGE_TOL;
    let maxy = a.y.max(b.y).max(c.y) + EDGE_TOL;
    let x0 = ((minx - 0.5).ceil().max(0.0)) as usize;
    let y0 = ((miny - 0.5).ceil().max(row0 as f64)) as usize;
    let x1 = (maxx - 0.5).floor();
    let y1 = (maxy - 0.5).floor();
    if x1 < 0.0 || y1 < row0 as f64 {
        return;
    }
    let x1 = (x1 as usize).min(w - 1);
    let y1 = (y1 as usize).min(row0 + rows - 1);
    for y in y0..=y1 {
        for x in x0..=x1 {
            let p = P2::new(x as f64 + 0.5, y as f64 + 0.5);
            let hit = if degenerate {
                edges.iter().any(|(q, r)| near_segment(p, *q, *r))
            } else {
                edges
                    .iter()
                    .zip(lens)
                    .all(|((q, r), len)| cross(r - q, p - q) >= -EDGE_TOL * len)
            };
            if hit {
                cells[(y - row0) * w + x] = true;
            }
        }
    }
}

/// Marks every pixel cell the segment passes through.
fn fill_line(a: P2, b: P2, w: usize, row0: usize, rows: usize, cells: &mut [bool]) {
    let steps = ((b - a).abs().max() * 4.0).ceil().max(1.0) as usize;
    for k in 0..=steps {
        let p = a + (b - a) * (k as f64 / steps as f64);
        let (x, y) = (p.x.floor(), p.y.floor());
        if x >= 0.0 && y >= row0 as f64 && (x as usize) < w && (y as usize) < row0 + rows {
            cells[(y as usize - row0) * w + x as usize] = true;
        }
    }
}

/// Binary coverage of every mesh surface under `camera`.
///
/// A pixel is set when its center lies in any projected triangle, edges
/// inclusive, or a spike passes through it. No depth test: the result is
/// the silhouette of the whole mask solid, regardless of scene occlusion.
pub fn render_mask(mesh: &MaskMesh, camera: &Camera) -> Mask {
    let (w, h) = (camera.width(), camera.height());
    let prims = project_primitives(mesh, camera);
    let bands = h.div_ceil(BAND_ROWS);
    let mut buckets: Vec<Vec<usize>> = vec![Vec::new(); bands];
    for (i, p) in prims.iter().enumerate() {
        let (lo, hi) = p.rows();
        if !(hi >= -1.0 && lo <= h as f64 + 1.0) {
            continue;
        }
        let b0 = (lo.max(0.0) as usize / BAND_ROWS).min(bands - 1);
        let b1 = (hi.max(0.0) as usize / BAND_ROWS).min(bands - 1);
        for bucket in &mut buckets[b0..=b1] {
            bucket.push(i);
        }
    }
    let mut bits = vec![false; w * h];
    par::for_each_chunk_mut(&mut bits, BAND_ROWS * w, |band, cells| {
        let row0 = band * BAND_ROWS;
        let rows = cells.len() / w;
        for &i in &buckets[band] {
            match &prims[i] {
                Prim::Tri(t) => fill_triangle(t, w, row0, rows, cells),
                Prim::Line(a, b) => fill_line(*a, *b, w, row0, rows, cells),
            }
        }
    });
    Mask::from_bits(w, h, bits)
}

/// [`render_mask`] for each camera, order preserved.
pub fn propagate_masks(mesh: &MaskMesh, cameras: &[Camera]) -> Vec<Mask> {
    par::map_slice(cameras, |cam| render_mask(mesh, cam))
}
