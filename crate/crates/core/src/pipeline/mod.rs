//! End-to-end session runs, the exported condition pack, evaluation
//! metrics and depth perturbation for robustness studies.

mod metrics;
mod pack;
mod perturb;
mod run;
mod session;

pub use metrics::{db_json, mask_iou, masked_psnr, IouReport};
pub use pack::{
    sha256_hex, AlignmentSource, ConditionPack, Manifest, PackFrame, CHANNEL_ORDER, MANIFEST_JSON,
};
pub use perturb::{perturb_depth, PerturbMode};
pub use run::{
    edit_scene, execute, propagate, resolve_alignment, run_session, EditedScene, SessionRun,
};
pub use session::{
    frame_name, AlignmentMode, EditSession, SessionConfig, CAMERAS_JSON, D_ORI_PFM,
    EDITED_DEPTH_PFM, EDITED_PNG, FRAMES_DIR, MASK_PNG, SESSION_JSON,
};
