use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Camera;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        }
    }

    /// The two remaining axes, in increasing order.
    pub fn others(self) -> [usize; 2] {
        match self {
            Axis::X => [1, 2],
            Axis::Y => [0, 2],
            Axis::Z => [0, 1],
        }
    }
}

/// Checkerboard with square cells of side `period` in world units.
///
/// Colors are 8-bit so that they survive a PNG round trip unchanged.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Texture {
    pub period: f64,
    #[serde(default)]
    pub phase: [f64; 3],
    pub color_a: [u8; 3],
    pub color_b: [u8; 3],
}

impl Texture {
    pub fn new(period: f64, color_a: [u8; 3], color_b: [u8; 3]) -> Self {
        Self {
            period,
            phase: [0.0; 3],
            color_a,
            color_b,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Primitive {
    /// Rectangle on the plane `axis = offset`, spanning `[min, max]` along
    /// the two other axes (in x, y, z order).
    Plane {
        axis: Axis,
        offset: f64,
        min: [f64; 2],
        max: [f64; 2],
        texture: Texture,
    },
    Box {
        center: [f64; 3],
        half_extent: [f64; 3],
        texture: Texture,
    },
}

impl Primitive {
    fn validate(&self, what: &str) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidSpec(format!("{what}: {m}")));
        let tex = match self {
            Primitive::Plane {
                offset,
                min,
                max,
                texture,
                ..
            } => {
                if !offset.is_finite()
                    || (0..2)
                        .any(|k| !(max[k] > min[k]) || !min[k].is_finite() || !max[k].is_finite())
                {
                    return bad("plane extent must be finite and positive".into());
                }
                texture
            }
            Primitive::Box {
                center,
                half_extent,
                texture,
            } => {
                if center.iter().any(|c| !c.is_finite())
                    || half_extent.iter().any(|e| !(*e > 0.0) || !e.is_finite())
                {
                    return bad("box half extents must be finite and positive".into());
                }
                texture
            }
        };
        if !(tex.period > 0.0) || !tex.period.is_finite() {
            return bad(format!("texture period {} must be positive", tex.period));
        }
        Ok(())
    }

    /// True when `p` is strictly inside a solid primitive.
    pub(crate) fn contains(&self, p: &Vector3<f64>) -> bool {
        match self {
            Primitive::Plane { .. } => false,
            Primitive::Box {
                center,
                half_extent,
                ..
            } => (0..3).all(|k| (p[k] - center[k]).abs() < half_extent[k]),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Trajectory {
    Static {
        frames: usize,
        eye: [f64; 3],
        target: [f64; 3],
    },
    /// Horizontal arc around `target`, symmetric about the `-z` direction:
    /// frame `i` sits at azimuth `-arc/2 + arc * i / (frames - 1)`.
    Orbit {
        frames: usize,
        target: [f64; 3],
        radius: f64,
        arc_degrees: f64,
    },
    /// Moves along the initial viewing direction by `step` per frame.
    Dolly {
        frames: usize,
        eye: [f64; 3],
        target: [f64; 3],
        step: f64,
    },
    /// Moves sideways (image +x) by `step` per frame, keeping the orientation.
    Truck {
        frames: usize,
        eye: [f64; 3],
        target: [f64; 3],
        step: f64,
    },
}

impl Trajectory {
    pub fn frames(&self) -> usize {
        match self {
            Trajectory::Static { frames, .. }
            | Trajectory::Orbit { frames, .. }
            | Trajectory::Dolly { frames, .. }
            | Trajectory::Truck { frames, .. } => *frames,
        }
    }

    /// `(eye, target)` per frame.
    pub(crate) fn poses(&self) -> Vec<(Vector3<f64>, Vector3<f64>)> {
        let v = |a: &[f64; 3]| Vector3::new(a[0], a[1], a[2]);
        let n = self.frames();
        match self {
            Trajectory::Static { eye, target, .. } => vec![(v(eye), v(target)); n],
            Trajectory::Orbit {
                target,
                radius,
                arc_degrees,
                ..
            } => {
                let t = v(target);
                (0..n)
                    .map(|i| {
                        let frac = if n > 1 {
                            i as f64 / (n - 1) as f64
                        } else {
                            0.5
                        };
                        let phi = (arc_degrees * (frac - 0.5)).to_radians();
                        let eye = t + Vector3::new(phi.sin(), 0.0, -phi.cos()) * *radius;
                        (eye, t)
                    })
                    .collect()
            }
            Trajectory::Dolly {
                eye, target, step, ..
            } => {
                let (e, t) = (v(eye), v(target));
                let fwd = (t - e).normalize();
                (0..n)
                    .map(|i| {
                        let o = fwd * (*step * i as f64);
                        (e + o, t + o)
                    })
                    .collect()
            }
            Trajectory::Truck {
                eye, target, step, ..
            } => {
                let (e, t) = (v(eye), v(target));
                let fwd = (t - e).normalize();
                let right = Vector3::new(0.0, 1.0, 0.0).cross(&fwd).normalize();
                (0..n)
                    .map(|i| {
                        let o = right * (*step * i as f64);
                        (e + o, t + o)
                    })
                    .collect()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Edit {
    InsertBox {
        center: [f64; 3],
        half_extent: [f64; 3],
        texture: Texture,
    },
    DeletePrimitive {
        index: usize,
    },
}

/// How the edited frame's relative depth is derived from its true depth.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RelativeDepth {
    /// Min-max normalized to `[0, 1]`.
    #[default]
    Normalized,
    /// `d̂ = (d - shift) / scale`.
    Affine { scale: f64, shift: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub width: usize,
    pub height: usize,
    /// Focal length in pixels (fx = fy); the principal point is the raster center.
    pub focal: f64,
    pub primitives: Vec<Primitive>,
    pub trajectory: Trajectory,
    #[serde(default)]
    pub edit: Option<Edit>,
    #[serde(default)]
    pub relative_depth: RelativeDepth,
    /// Extra dilation (pixels) of the first-frame mask handed to the pipeline.
    #[serde(default)]
    pub mask_dilate: usize,
    #[serde(default)]
    pub prompt: String,
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::InvalidSpec("raster size must be positive".into()));
        }
        if !(self.focal > 0.0) || !self.focal.is_finite() {
            return Err(Error::InvalidSpec("focal length must be positive".into()));
        }
        if self.trajectory.frames() == 0 {
            return Err(Error::InvalidSpec(
                "trajectory needs at least one frame".into(),
            ));
        }
        if let Trajectory::Orbit { radius, .. } = self.trajectory {
            if !(radius > 0.0) {
                return Err(Error::InvalidSpec("orbit radius must be positive".into()));
            }
        }
        for (i, p) in self.primitives.iter().enumerate() {
            p.validate(&format!("primitive {i}"))?;
        }
        let edit_solid = self.edit_primitive();
        match &self.edit {
            Some(Edit::DeletePrimitive { index }) if *index >= self.primitives.len() => {
                return Err(Error::InvalidSpec(format!(
                    "edit deletes primitive {index} but only {} exist",
                    self.primitives.len()
                )))
            }
            Some(Edit::InsertBox { .. }) => edit_solid.as_ref().unwrap().validate("edit box")?,
            _ => {}
        }
        for (k, (eye, target)) in self.trajectory.poses().iter().enumerate() {
            if (target - eye).norm() < 1e-9 {
                return Err(Error::InvalidSpec(format!("frame {k}: eye equals target")));
            }
            if self
                .primitives
                .iter()
                .chain(edit_solid.iter())
                .any(|p| p.contains(eye))
            {
                return Err(Error::InvalidSpec(format!(
                    "frame {k}: camera inside a solid"
                )));
            }
        }
        Ok(())
    }

    pub(crate) fn edit_primitive(&self) -> Option<Primitive> {
        match &self.edit {
            Some(Edit::InsertBox {
                center,
                half_extent,
                texture,
            }) => Some(Primitive::Box {
                center: *center,
                half_extent: *half_extent,
                texture: *texture,
            }),
            Some(Edit::DeletePrimitive { index }) => self.primitives.get(*index).cloned(),
            None => None,
        }
    }

    /// Primitives of the scene after the edit.
    pub fn edited_primitives(&self) -> Vec<Primitive> {
        match &self.edit {
            Some(Edit::DeletePrimitive { index }) => self
                .primitives
                .iter()
                .enumerate()
                .filter(|(i, _)| i != index)
                .map(|(_, p)| p.clone())
                .collect(),
            Some(Edit::InsertBox { .. }) => {
                let mut p = self.primitives.clone();
                p.extend(self.edit_primitive());
                p
            }
            None => self.primitives.clone(),
        }
    }

    pub fn cameras(&self) -> Result<Vec<Camera>> {
        let (cx, cy) = (self.width as f64 / 2.0, self.height as f64 / 2.0);
        self.trajectory
            .poses()
            .into_iter()
            .enumerate()
            .map(|(i, (eye, target))| {
                Camera::look_at(
                    eye,
                    target,
                    Vector3::new(0.0, 1.0, 0.0),
                    self.focal,
                    self.focal,
                    cx,
                    cy,
                    self.width,
                    self.height,
                    i,
                )
            })
            .collect()
    }

    /// Closed room `x ∈ [-4, 4]`, `y ∈ [-2.5, 1.5]` (y down, floor at 1.5),
    /// `z ∈ [-4, 4]`, plus a crate on the floor. Every ray from inside hits
    /// something.
    pub fn room_primitives() -> Vec<Primitive> {
        let wall = |axis, offset, min, max, a, b| Primitive::Plane {
            axis,
            offset,
            min,
            max,
            texture: Texture::new(0.5, a, b),
        };
        vec![
            wall(
                Axis::Z,
                4.0,
                [-4.0, -2.5],
                [4.0, 1.5],
                [200, 190, 170],
                [90, 80, 70],
            ),
            wall(
                Axis::Y,
                1.5,
                [-4.0, -4.0],
                [4.0, 4.0],
                [120, 140, 160],
                [40, 50, 60],
            ),
            wall(
                Axis::Y,
                -2.5,
                [-4.0, -4.0],
                [4.0, 4.0],
                [230, 230, 230],
                [180, 180, 180],
            ),
            wall(
                Axis::X,
                -4.0,
                [-2.5, -4.0],
                [1.5, 4.0],
                [170, 200, 170],
                [60, 100, 60],
            ),
            wall(
                Axis::X,
                4.0,
                [-2.5, -4.0],
                [1.5, 4.0],
                [200, 170, 170],
                [100, 60, 60],
            ),
            wall(
                Axis::Z,
                -4.0,
                [-4.0, -2.5],
                [4.0, 1.5],
                [150, 150, 200],
                [60, 60, 110],
            ),
            Primitive::Box {
                center: [-2.6, 1.0, 2.8],
                half_extent: [0.5, 0.5, 0.5],
                texture: Texture::new(0.25, [220, 160, 40], [110, 70, 10]),
            },
        ]
    }

    /// A flat panel inserted against the back wall.
    pub fn panel_insert() -> Edit {
        Edit::InsertBox {
            center: [0.0, -0.3, 3.9],
            half_extent: [1.1, 0.9, 0.1],
            texture: Texture::new(0.3, [230, 40, 40], [40, 40, 230]),
        }
    }

    /// Room + inserted panel, orbiting the panel front.
    pub fn insertion_orbit(width: usize, height: usize, frames: usize) -> Self {
        SceneSpec {
            width,
            height,
            focal: 0.86 * width as f64,
            primitives: Self::room_primitives(),
            trajectory: Trajectory::Orbit {
                frames,
                target: [0.0, -0.3, 3.8],
                radius: 3.8,
                arc_degrees: 24.0,
            },
            edit: Some(Self::panel_insert()),
            relative_depth: RelativeDepth::Normalized,
            mask_dilate: 0,
            prompt: "a framed painting on the wall".into(),
        }
    }

    /// Room + inserted panel, dollying toward the panel.
    pub fn insertion_dolly(width: usize, height: usize, frames: usize) -> Self {
        SceneSpec {
            trajectory: Trajectory::Dolly {
                frames,
                eye: [0.4, -0.5, 0.0],
                target: [0.4, 0.3, 3.8],
                step: 0.08,
            },
            ..Self::insertion_orbit(width, height, frames)
        }
    }
}
