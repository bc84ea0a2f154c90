//! Analytic synthetic scenes: textured axis-aligned planes and boxes seen
//! along a known camera trajectory.
//!
//! Everything here is computed by exact ray/primitive intersection, so the
//! outputs serve as ground truth for the rest of the crate: frames, z-depth,
//! the edited scene, and the silhouette of the edit solid in every frame.

mod scene;
mod trace;

pub use scene::{Axis, Edit, Primitive, RelativeDepth, SceneSpec, Texture, Trajectory};
pub use trace::{
    build_session, ground_truth_masks, render_edited, render_ground_truth, render_view,
    GroundTruth, Oracle,
};
