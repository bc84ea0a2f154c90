use std::path::Path;

use nalgebra::Vector3;

use super::scene::{Primitive, RelativeDepth, SceneSpec, Texture};
use crate::align::normalize_depth;
use crate::error::{Error, Result};
use crate::geometry::{backproject, io};
use crate::geometry::{Camera, DepthMap, Image, Mask};
use crate::par;
use crate::pipeline::{frame_name, EditSession, SessionConfig};
use crate::splat::render_sequence;

const MIN_T: f64 = 1e-9;

/// Rendered frames, z-depth and cameras of a scene.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub frames: Vec<Image>,
    pub depths: Vec<DepthMap>,
    pub cameras: Vec<Camera>,
}

/// Reference outputs for scoring a pipeline run on a synthetic session.
#[derive(Debug, Clone, PartialEq)]
pub struct Oracle {
    /// The edited scene rendered in every frame.
    pub edited_frames: Vec<Image>,
    pub edited_depths: Vec<DepthMap>,
    /// Silhouette of the edit solid per frame, occluders ignored.
    pub masks: Vec<Mask>,
    /// Splat renders of the cloud back-projected from the exact edited
    /// depth of frame 0: the guidance a perfect alignment would produce.
    pub guidance: Vec<Image>,
}

impl Oracle {
    /// Writes `edited/frame_NNNN.png`, `edited_depth/depth_NNNN.pfm` and
    /// `masks/mask_NNNN.png` under `dir`.
    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        for (i, f) in self.edited_frames.iter().enumerate() {
            io::write_png_rgb(&dir.join("edited").join(frame_name(i)), f)?;
        }
        for (i, d) in self.edited_depths.iter().enumerate() {
            io::write_pfm(
                &dir.join("edited_depth").join(format!("depth_{i:04}.pfm")),
                d,
            )?;
        }
        for (i, m) in self.masks.iter().enumerate() {
            io::write_png_mask(&dir.join("masks").join(format!("mask_{i:04}.png")), m)?;
        }
        for (i, g) in self.guidance.iter().enumerate() {
            io::write_png_rgb(&dir.join("guidance").join(frame_name(i)), g)?;
        }
        Ok(())
    }

    /// Reads an oracle written by [`Oracle::write_dir`] for `frames` frames.
    pub fn read_dir(dir: &Path, frames: usize) -> Result<Self> {
        let mut oracle = Oracle {
            edited_frames: Vec::with_capacity(frames),
            edited_depths: Vec::with_capacity(frames),
            masks: Vec::with_capacity(frames),
            guidance: Vec::with_capacity(frames),
        };
        for i in 0..frames {
            oracle
                .edited_frames
                .push(io::read_png_rgb(&dir.join("edited").join(frame_name(i)))?);
            oracle.edited_depths.push(io::read_pfm(
                &dir.join("edited_depth").join(format!("depth_{i:04}.pfm")),
            )?);
            oracle.masks.push(io::read_png_mask(
                &dir.join("masks").join(format!("mask_{i:04}.png")),
            )?);
            oracle
                .guidance
                .push(io::read_png_rgb(&dir.join("guidance").join(frame_name(i)))?);
        }
        Ok(oracle)
    }
}

/// Ray parameter (= z-depth, since directions have unit camera-z) of the
/// first hit in front of the origin, and the axis of the face hit.
fn intersect(p: &Primitive, o: &Vector3<f64>, d: &Vector3<f64>) -> Option<(f64, usize)> {
    match p {
        Primitive::Plane {
            axis,
            offset,
            min,
            max,
            ..
        } => {
            let a = axis.index();
            if d[a].abs() < 1e-15 {
                return None;
            }
            let t = (offset - o[a]) / d[a];
            if t <= MIN_T {
                return None;
            }
            let hit = o + d * t;
            let [b, c] = axis.others();
            let inside =
                hit[b] >= min[0] && hit[b] <= max[0] && hit[c] >= min[1] && hit[c] <= max[1];
            inside.then_some((t, a))
        }
        Primitive::Box {
            center,
            half_extent,
            ..
        } => {
            let (near, far, axis) = slab(center, half_extent, o, d)?;
            (near > MIN_T && near <= far).then_some((near, axis))
        }
    }
}

/// Entry/exit ray parameters of an axis-aligned box.
fn slab(
    center: &[f64; 3],
    half: &[f64; 3],
    o: &Vector3<f64>,
    d: &Vector3<f64>,
) -> Option<(f64, f64, usize)> {
    let (mut near, mut far, mut axis) = (f64::NEG_INFINITY, f64::INFINITY, 0);
    for k in 0..3 {
        let (lo, hi) = (center[k] - half[k], center[k] + half[k]);
        if d[k].abs() < 1e-15 {
            if o[k] < lo || o[k] > hi {
                return None;
            }
            continue;
        }
        let (t1, t2) = ((lo - o[k]) / d[k], (hi - o[k]) / d[k]);
        let (a, b) = if t1 < t2 { (t1, t2) } else { (t2, t1) };
        if a > near {
            near = a;
            axis = k;
        }
        far = far.min(b);
    }
    (near <= far).then_some((near, far, axis))
}

fn texture_of(p: &Primitive) -> &Texture {
    match p {
        Primitive::Plane { texture, .. } | Primitive::Box { texture, .. } => texture,
    }
}

fn shade(tex: &Texture, hit: &Vector3<f64>, face_axis: usize) -> [f32; 3] {
    let cell = |k: usize| ((hit[k] - tex.phase[k]) / tex.period).floor() as i64;
    let parity: i64 = (0..3).filter(|&k| k != face_axis).map(cell).sum();
    let c = if parity.rem_euclid(2) == 0 {
        tex.color_a
    } else {
        tex.color_b
    };
    c.map(|v| v as f32 / 255.0)
}

/// Renders `prims` from an arbitrary camera: color and exact z-depth.
pub fn render_view(prims: &[Primitive], camera: &Camera) -> (Image, DepthMap) {
    let (w, h) = (camera.width(), camera.height());
    let mut img = Image::black(w, h);
    let mut depth = DepthMap::invalid(w, h);
    for y in 0..h {
        for x in 0..w {
            let ray = camera.pixel_ray(x, y);
            let mut best: Option<(f64, usize, usize)> = None;
            for (i, p) in prims.iter().enumerate() {
                if let Some((t, axis)) = intersect(p, &ray.origin, &ray.direction) {
                    if best.is_none_or(|(bt, _, _)| t < bt) {
                        best = Some((t, i, axis));
                    }
                }
            }
            if let Some((t, i, axis)) = best {
                depth.set(x, y, Some(t));
                img.set(x, y, shade(texture_of(&prims[i]), &ray.at(t), axis));
            }
        }
    }
    (img, depth)
}

fn render_with(spec: &SceneSpec, prims: &[Primitive]) -> Result<GroundTruth> {
    spec.validate()?;
    let cameras = spec.cameras()?;
    let (frames, depths) = par::map_slice(&cameras, |cam| render_view(prims, cam))
        .into_iter()
        .unzip();
    Ok(GroundTruth {
        frames,
        depths,
        cameras,
    })
}

/// The unedited scene along the trajectory.
pub fn render_ground_truth(spec: &SceneSpec) -> Result<GroundTruth> {
    render_with(spec, &spec.primitives)
}

/// The scene with its edit applied along the trajectory.
pub fn render_edited(spec: &SceneSpec) -> Result<GroundTruth> {
    render_with(spec, &spec.edited_primitives())
}

fn silhouette(p: &Primitive, camera: &Camera) -> Mask {
    Mask::from_fn(camera.width(), camera.height(), |x, y| {
        let ray = camera.pixel_ray(x, y);
        match p {
            Primitive::Plane { .. } => intersect(p, &ray.origin, &ray.direction).is_some(),
            Primitive::Box {
                center,
                half_extent,
                ..
            } => slab(center, half_extent, &ray.origin, &ray.direction)
                .is_some_and(|(_, far, _)| far > MIN_T),
        }
    })
}

/// Per-frame silhouette of the edit solid, ignoring every occluder.
pub fn ground_truth_masks(spec: &SceneSpec) -> Result<Vec<Mask>> {
    spec.validate()?;
    let solid = spec
        .edit_primitive()
        .ok_or_else(|| Error::InvalidSpec("scene has no edit".into()))?;
    let cameras = spec.cameras()?;
    Ok(par::map_slice(&cameras, |cam| silhouette(&solid, cam)))
}

/// Turns a scene with an edit into a pipeline session plus its oracle.
///
/// The session carries the unedited frames, the first frame's true depth,
/// the edited first frame, its depth converted to relative units, and the
/// edit silhouette in frame 0 (optionally dilated) as the user mask.
pub fn build_session(spec: &SceneSpec) -> Result<(EditSession, Oracle)> {
    let original = render_ground_truth(spec)?;
    let edited = render_edited(spec)?;
    let masks = ground_truth_masks(spec)?;
    let true_edit_depth = &edited.depths[0];
    let edited_depth_raw = match spec.relative_depth {
        RelativeDepth::Normalized => normalize_depth(true_edit_depth)?,
        RelativeDepth::Affine { scale, shift } => {
            if !(scale != 0.0 && scale.is_finite() && shift.is_finite()) {
                return Err(Error::InvalidSpec(
                    "relative depth scale must be finite and nonzero".into(),
                ));
            }
            let mut d = DepthMap::invalid(spec.width, spec.height);
            for i in 0..d.len() {
                d.set_index(i, true_edit_depth.get_index(i).map(|v| (v - shift) / scale));
            }
            d
        }
    };
    let session = EditSession {
        d_ori: original.depths[0].clone(),
        frames: original.frames,
        cameras: original.cameras,
        edited_image: edited.frames[0].clone(),
        edited_depth_raw,
        mask: masks[0].dilate(spec.mask_dilate),
        config: SessionConfig {
            prompt: spec.prompt.clone(),
            ..SessionConfig::default()
        },
    };
    let cloud = backproject(
        true_edit_depth,
        &edited.frames[0],
        &session.cameras[0],
        None,
    )?;
    let guidance = render_sequence(&cloud, &session.cameras, session.config.splat_radius)
        .into_iter()
        .map(|f| f.color)
        .collect();
    let oracle = Oracle {
        guidance,
        edited_frames: edited.frames,
        edited_depths: edited.depths,
        masks,
    };
    Ok((session, oracle))
}

#[cfg(test)]
mod tests {
    use super::super::{Axis, Trajectory};
    use super::*;

    fn plane_z(z: f64) -> Primitive {
        Primitive::Plane {
            axis: Axis::Z,
            offset: z,
            min: [-100.0, -100.0],
            max: [100.0, 100.0],
            texture: Texture::new(1.0, [255, 255, 255], [0, 0, 0]),
        }
    }

    fn static_spec(prims: Vec<Primitive>) -> SceneSpec {
        SceneSpec {
            width: 32,
            height: 24,
            focal: 30.0,
            primitives: prims,
            trajectory: Trajectory::Static {
                frames: 2,
                eye: [0.0, 0.0, 0.0],
                target: [0.0, 0.0, 1.0],
            },
            edit: None,
            relative_depth: RelativeDepth::Normalized,
            mask_dilate: 0,
            prompt: String::new(),
        }
    }

    #[test]
    fn single_plane_constant_depth() {
        let gt = render_ground_truth(&static_spec(vec![plane_z(5.0)])).unwrap();
        for d in &gt.depths {
            assert!(d.iter().all(|v| (v.unwrap() - 5.0).abs() < 1e-12));
        }
    }

    #[test]
    fn box_occluder_takes_min_depth() {
        let b = Primitive::Box {
            center: [0.0, 0.0, 3.0],
            half_extent: [0.5, 0.5, 0.5],
            texture: Texture::new(1.0, [255, 0, 0], [0, 255, 0]),
        };
        let spec = static_spec(vec![plane_z(5.0), b]);
        let gt = render_ground_truth(&spec).unwrap();
        let cam = &gt.cameras[0];
        let d = &gt.depths[0];
        for y in 0..24 {
            for x in 0..32 {
                let r = cam.pixel_ray(x, y);
                // analytic: box front face at z=2.5 covers |x|,|y| <= 0.5
                let p = r.at(2.5);
                let want = if p.x.abs() <= 0.5 && p.y.abs() <= 0.5 {
                    2.5
                } else {
                    5.0
                };
                assert!((d.get(x, y).unwrap() - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let mut s = static_spec(vec![plane_z(5.0)]);
        s.trajectory = Trajectory::Static {
            frames: 0,
            eye: [0.0; 3],
            target: [0.0, 0.0, 1.0],
        };
        assert!(matches!(
            render_ground_truth(&s),
            Err(Error::InvalidSpec(_))
        ));
        let inside = static_spec(vec![Primitive::Box {
            center: [0.0; 3],
            half_extent: [1.0; 3],
            texture: Texture::new(1.0, [0; 3], [0; 3]),
        }]);
        assert!(render_ground_truth(&inside).is_err());
        let mut bad_tex = static_spec(vec![plane_z(5.0)]);
        if let Primitive::Plane { texture, .. } = &mut bad_tex.primitives[0] {
            texture.period = 0.0;
        }
        assert!(render_ground_truth(&bad_tex).is_err());
    }

    #[test]
    fn masks_need_an_edit() {
        assert!(ground_truth_masks(&static_spec(vec![plane_z(5.0)])).is_err());
    }

    #[test]
    fn hidden_edit_still_has_silhouette() {
        let mut s = static_spec(vec![plane_z(2.0)]);
        s.primitives.push(plane_z(10.0));
        s.edit = Some(super::super::Edit::InsertBox {
            center: [0.0, 0.0, 5.0],
            half_extent: [0.5, 0.5, 0.5],
            texture: Texture::new(1.0, [0; 3], [0; 3]),
        });
        let masks = ground_truth_masks(&s).unwrap();
        assert!(masks[0].count() > 0);
        assert_eq!(masks[0], masks[1]);
        // and the edited render is unchanged because the plane hides it
        assert_eq!(render_edited(&s).unwrap(), render_ground_truth(&s).unwrap());
    }

    #[test]
    fn default_session_is_consistent() {
        let spec = SceneSpec::insertion_orbit(64, 48, 3);
        let (session, oracle) = build_session(&spec).unwrap();
        assert_eq!(session.frames.len(), 3);
        assert_eq!(oracle.masks.len(), 3);
        assert_eq!(session.mask, oracle.masks[0]);
        assert!(session.mask.count() > 100);
        let (lo, hi) = session.edited_depth_raw.range(None).unwrap();
        assert_eq!((lo, hi), (0.0, 1.0));
        // outside the edit, the edited frame equals the original frame
        for i in 0..64 * 48 {
            if !session.mask.get_index(i) {
                assert_eq!(
                    session.edited_image.get_index(i),
                    session.frames[0].get_index(i)
                );
            }
        }
    }
}
