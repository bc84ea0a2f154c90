//! Camera model, raster containers, rays, back-projection and projection.
//!
//! Conventions used everywhere in the crate:
//!
//! * right-handed camera frame, +z forward, +y down, +x right;
//! * world-to-camera is `x_cam = R * x_world + t`;
//! * pixel `(u, v)` has its center at `(u + 0.5, v + 0.5)`;
//! * "depth" is z-depth (camera-frame z), never ray length.

mod camera;
mod cloud;
pub mod io;
mod raster;

pub use camera::{Camera, CameraRecord, Ray};
pub use cloud::{backproject, project_depth, PointCloud};
pub use raster::{DepthMap, Image, Mask};
