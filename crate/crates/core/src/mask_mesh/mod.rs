//! 3D mask mesh: a closed "cylinder" around the edited region, rendered under
//! every camera to propagate the first-frame mask through the video.
//!
//! The frontal surface follows the merged (nearest) depth of the edited
//! region pulled toward the camera by `epsilon`; the back surface is the same
//! pixel grid at one uniform depth, the farthest edited-region depth plus
//! `epsilon`; side walls join the two along the mask contour.

mod build;
mod render;

use std::fmt::Write as _;

use nalgebra::Vector3;

pub use build::build_mask_mesh;
pub use render::{propagate_masks, render_mask};

use crate::error::{Error, Result};
use crate::geometry::{DepthMap, Mask};

/// Default depth dilation in scene units.
pub const DEFAULT_EPSILON: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Surface {
    Frontal,
    Back,
    Side,
}

impl Surface {
    fn name(self) -> &'static str {
        match self {
            Surface::Frontal => "frontal",
            Surface::Back => "back",
            Surface::Side => "side",
        }
    }
}

/// Triangle mesh of the 3D mask.
///
/// Pixels with no 4-neighbor in the mask cannot form triangles; each one
/// contributes a front-to-back `spike` segment instead, rendered as a line.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MaskMesh {
    pub(crate) vertices: Vec<Vector3<f64>>,
    pub(crate) triangles: Vec<[u32; 3]>,
    pub(crate) surfaces: Vec<Surface>,
    pub(crate) spikes: Vec<[u32; 2]>,
    pub(crate) frontal_vertices: usize,
    pub(crate) back_vertices: usize,
}

impl MaskMesh {
    pub fn vertices(&self) -> &[Vector3<f64>] {
        &self.vertices
    }
    pub fn triangles(&self) -> &[[u32; 3]] {
        &self.triangles
    }
    pub fn surfaces(&self) -> &[Surface] {
        &self.surfaces
    }
    pub fn spikes(&self) -> &[[u32; 2]] {
        &self.spikes
    }
    pub fn frontal_vertex_count(&self) -> usize {
        self.frontal_vertices
    }
    pub fn back_vertex_count(&self) -> usize {
        self.back_vertices
    }

    pub fn triangle_count(&self, surface: Surface) -> usize {
        self.surfaces.iter().filter(|s| **s == surface).count()
    }

    /// Wavefront OBJ text, one group per surface; spikes become `l` lines.
    pub fn to_obj(&self) -> String {
        let mut out = String::from("# vedit mask mesh\n");
        for v in &self.vertices {
            let _ = writeln!(out, "v {} {} {}", v.x, v.y, v.z);
        }
        for surface in [Surface::Frontal, Surface::Back, Surface::Side] {
            let _ = writeln!(out, "g {}", surface.name());
            for (t, s) in self.triangles.iter().zip(&self.surfaces) {
                if *s == surface {
                    let _ = writeln!(out, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1);
                }
            }
            if surface == Surface::Side {
                for l in &self.spikes {
                    let _ = writeln!(out, "l {} {}", l[0] + 1, l[1] + 1);
                }
            }
        }
        out
    }
}

/// Per masked pixel: the nearer of the two depths, minus `epsilon`.
/// Unmasked pixels are invalid.
pub fn merge_mask_depth(
    d_ori: &DepthMap,
    d_edit: &DepthMap,
    mask: &Mask,
    epsilon: f64,
) -> Result<DepthMap> {
    let (w, h) = (mask.width(), mask.height());
    d_ori.check_size("original depth", w, h)?;
    d_edit.check_size("edited depth", w, h)?;
    let mut out = DepthMap::invalid(w, h);
    for i in 0..out.len() {
        if !mask.get_index(i) {
            continue;
        }
        let nearest = match (d_ori.get_index(i), d_edit.get_index(i)) {
            (Some(a), Some(b)) => a.min(b),
            (Some(a), None) | (None, Some(a)) => a,
            (None, None) => {
                return Err(Error::IncompleteDepth {
                    source_name: "original or edited",
                    x: i % w,
                    y: i / w,
                })
            }
        };
        out.set_index(i, Some(nearest - epsilon));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equal_depths_with_default_epsilon() {
        let d = DepthMap::constant(2, 2, 3.0);
        let m = Mask::filled(2, 2, true);
        let out = merge_mask_depth(&d, &d, &m, DEFAULT_EPSILON).unwrap();
        assert!(out.iter().all(|v| (v.unwrap() - 2.98).abs() < 1e-12));
    }

    #[test]
    fn zero_epsilon_is_identity_on_mask() {
        let d = DepthMap::from_fn(3, 1, |x, _| Some(1.0 + x as f64));
        let m = Mask::from_fn(3, 1, |x, _| x > 0);
        let out = merge_mask_depth(&d, &d, &m, 0.0).unwrap();
        assert_eq!(
            out.iter().collect::<Vec<_>>(),
            vec![None, Some(2.0), Some(3.0)]
        );
    }

    #[test]
    fn min_then_subtract() {
        let out = merge_mask_depth(
            &DepthMap::constant(1, 1, 2.0),
            &DepthMap::constant(1, 1, 1.5),
            &Mask::filled(1, 1, true),
            0.02,
        )
        .unwrap();
        assert!((out.get(0, 0).unwrap() - 1.48).abs() < 1e-12);
    }

    #[test]
    fn one_missing_source_is_fine_both_missing_is_not() {
        let a = DepthMap::from_options(2, 1, vec![Some(2.0), None]);
        let b = DepthMap::from_options(2, 1, vec![None, Some(4.0)]);
        let m = Mask::filled(2, 1, true);
        let out = merge_mask_depth(&a, &b, &m, 0.0).unwrap();
        assert_eq!(out.iter().collect::<Vec<_>>(), vec![Some(2.0), Some(4.0)]);
        let none = DepthMap::invalid(2, 1);
        assert!(matches!(
            merge_mask_depth(&none, &none, &m, 0.0),
            Err(Error::IncompleteDepth { x: 0, y: 0, .. })
        ));
    }
}
