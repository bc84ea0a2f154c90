//! Geometric pipeline for depth-guided, 3D-aware video edit propagation.
//!
//! Given the frames of a mostly static video, per-frame pinhole cameras, the
//! first frame's depth and an edited version of that first frame (image plus
//! relative depth), this crate:
//!
//! * aligns the edited relative depth to the scene with a closed-form
//!   scale/shift least-squares fit over the unedited pixels ([`align`]),
//! * back-projects the merged depth into an edited colored point cloud
//!   ([`geometry`]),
//! * builds a closed "cylindrical" mask mesh around the edit and renders it
//!   under every camera to propagate the 2D edit mask ([`mask_mesh`]),
//! * splats the edited cloud into per-frame guidance images ([`splat`]),
//! * and assembles the per-frame condition pack a video generator consumes
//!   ([`pipeline`]).
//!
//! [`synth`] generates analytic scenes used as ground truth throughout the
//! test suite.
//!
//! Per-pixel, per-point and per-frame loops run on rayon when the `parallel`
//! feature is enabled (the default). Outputs are bit-identical either way.

// `!(x > 0.0)` is used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod align;
pub mod error;
pub mod geometry;
pub mod mask_mesh;
pub mod par;
pub mod pipeline;
pub mod splat;
pub mod synth;

pub use error::{Error, ErrorKind, Result, Stage};
pub use geometry::{Camera, DepthMap, Image, Mask, PointCloud, Ray};
