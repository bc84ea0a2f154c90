use log::{debug, info};

use super::pack::ConditionPack;
use super::session::{AlignmentMode, EditSession};
use crate::align::{self, Alignment};
use crate::error::{Result, Stage, StageExt};
use crate::geometry::{backproject, DepthMap, Mask, PointCloud};
use crate::mask_mesh::{self, MaskMesh};
use crate::splat::{self, RenderedFrame};

/// Alignment, merged depth and edited cloud of frame 0.
#[derive(Debug, Clone)]
pub struct EditedScene {
    pub alignment: Alignment,
    /// Normalized edited depth `D̂`.
    pub d_hat: DepthMap,
    /// `D_edit`: scene depth outside the mask, aligned edit depth inside.
    pub d_edit: DepthMap,
    pub cloud: PointCloud,
}

/// Every intermediate of a full run.
#[derive(Debug, Clone)]
pub struct SessionRun {
    pub scene: EditedScene,
    pub mask_mesh: MaskMesh,
    pub masks: Vec<Mask>,
    pub renders: Vec<RenderedFrame>,
}

/// Normalizes the edited depth and fits or accepts `(s, t)`.
pub fn resolve_alignment(session: &EditSession) -> Result<(Alignment, DepthMap)> {
    session.validate().stage(Stage::Load)?;
    let d_hat = align::normalize_depth(&session.edited_depth_raw).stage(Stage::Normalize)?;
    let unedited = align::unedited_region(&session.mask, session.config.erode_radius);
    let alignment = match session.config.alignment {
        AlignmentMode::Auto => align::solve_alignment(&d_hat, &session.d_ori, &unedited),
        AlignmentMode::Manual { scale, shift } => {
            align::manual_alignment(&d_hat, &session.d_ori, &unedited, scale, shift)
        }
    }
    .stage(Stage::Align)?;
    debug!(
        "alignment s={} t={} rmse={} over {} px",
        alignment.scale, alignment.shift, alignment.residual_rmse, alignment.pixel_count
    );
    Ok((alignment, d_hat))
}

pub fn edit_scene(session: &EditSession) -> Result<EditedScene> {
    let (alignment, d_hat) = resolve_alignment(session)?;
    let d_edit = align::merge_depth(&session.d_ori, &d_hat, &alignment, &session.mask)
        .stage(Stage::MergeDepth)?;
    let cloud = backproject(&d_edit, &session.edited_image, &session.cameras[0], None)
        .stage(Stage::Backproject)?;
    debug!("edited cloud: {} points", cloud.len());
    Ok(EditedScene {
        alignment,
        d_hat,
        d_edit,
        cloud,
    })
}

/// Builds the mask mesh in the editing view and renders it in every frame.
pub fn propagate(session: &EditSession, scene: &EditedScene) -> Result<(MaskMesh, Vec<Mask>)> {
    let eps = session.config.epsilon;
    let front = mask_mesh::merge_mask_depth(&session.d_ori, &scene.d_edit, &session.mask, eps)
        .stage(Stage::MaskDepth)?;
    let mesh = mask_mesh::build_mask_mesh(
        &session.mask,
        &front,
        &session.d_ori,
        &scene.d_edit,
        &session.cameras[0],
        eps,
    )
    .stage(Stage::MaskMesh)?;
    let masks = mask_mesh::propagate_masks(&mesh, &session.cameras);
    Ok((mesh, masks))
}

/// Runs every stage and keeps the intermediates.
pub fn execute(session: &EditSession) -> Result<SessionRun> {
    let scene = edit_scene(session)?;
    let (mask_mesh, masks) = propagate(session, &scene)?;
    let renders =
        splat::render_sequence(&scene.cloud, &session.cameras, session.config.splat_radius);
    info!(
        "ran session: {} frames, {} mesh triangles",
        masks.len(),
        mask_mesh.triangles().len()
    );
    Ok(SessionRun {
        scene,
        mask_mesh,
        masks,
        renders,
    })
}

/// The whole pipeline: edit, propagate, render, assemble.
pub fn run_session(session: &EditSession) -> Result<ConditionPack> {
    let run = execute(session)?;
    ConditionPack::assemble(session, &run).stage(Stage::Assemble)
}
