use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::io;
use crate::geometry::{Camera, DepthMap, Image, Mask};
use crate::mask_mesh::DEFAULT_EPSILON;
use crate::splat::DEFAULT_SPLAT_RADIUS;

pub const SESSION_JSON: &str = "session.json";
pub const CAMERAS_JSON: &str = "cameras.json";
pub const FRAMES_DIR: &str = "frames";
pub const D_ORI_PFM: &str = "d_ori.pfm";
pub const EDITED_PNG: &str = "edited.png";
pub const EDITED_DEPTH_PFM: &str = "edited_depth.pfm";
pub const MASK_PNG: &str = "mask.png";

pub fn frame_name(i: usize) -> String {
    format!("frame_{i:04}.png")
}

/// How `(s, t)` is obtained. Serialized as `{"auto": true}` or
/// `{"scale": s, "shift": t}`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(try_from = "AlignmentModeRepr", into = "AlignmentModeRepr")]
pub enum AlignmentMode {
    #[default]
    Auto,
    Manual {
        scale: f64,
        shift: f64,
    },
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AlignmentModeRepr {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    auto: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    scale: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    shift: Option<f64>,
}

impl TryFrom<AlignmentModeRepr> for AlignmentMode {
    type Error = String;

    fn try_from(r: AlignmentModeRepr) -> std::result::Result<Self, String> {
        match (r.auto, r.scale, r.shift) {
            (Some(true), None, None) => Ok(AlignmentMode::Auto),
            (None | Some(false), Some(scale), Some(shift)) => {
                Ok(AlignmentMode::Manual { scale, shift })
            }
            _ => Err("alignment must be {\"auto\": true} or {\"scale\": s, \"shift\": t}".into()),
        }
    }
}

impl From<AlignmentMode> for AlignmentModeRepr {
    fn from(m: AlignmentMode) -> Self {
        match m {
            AlignmentMode::Auto => AlignmentModeRepr {
                auto: Some(true),
                scale: None,
                shift: None,
            },
            AlignmentMode::Manual { scale, shift } => AlignmentModeRepr {
                auto: None,
                scale: Some(scale),
                shift: Some(shift),
            },
        }
    }
}

/// Tunables of a session, stored as `session.json`. Missing keys take
/// their defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SessionConfig {
    pub alignment: AlignmentMode,
    pub epsilon: f64,
    pub splat_radius: u32,
    /// Extra pixels excluded around the mask when fitting `(s, t)`.
    pub erode_radius: usize,
    /// Passed through to the pack manifest untouched.
    pub prompt: String,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            alignment: AlignmentMode::Auto,
            epsilon: DEFAULT_EPSILON,
            splat_radius: DEFAULT_SPLAT_RADIUS,
            erode_radius: 0,
            prompt: String::new(),
        }
    }
}

impl SessionConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.epsilon.is_finite() || self.epsilon < 0.0 {
            return Err(Error::Validation(format!(
                "epsilon must be finite and non-negative, got {}",
                self.epsilon
            )));
        }
        if let AlignmentMode::Manual { scale, shift } = self.alignment {
            if !scale.is_finite() || scale == 0.0 || !shift.is_finite() {
                return Err(Error::Validation(format!(
                    "manual alignment needs finite nonzero scale and finite shift, got ({scale}, {shift})"
                )));
            }
        }
        Ok(())
    }
}

/// Everything needed to run the pipeline once.
#[derive(Debug, Clone, PartialEq)]
pub struct EditSession {
    pub frames: Vec<Image>,
    /// `cameras[0]` is the editing view.
    pub cameras: Vec<Camera>,
    /// Scene depth of frame 0.
    pub d_ori: DepthMap,
    pub edited_image: Image,
    /// Relative depth of the edited frame, before normalization.
    pub edited_depth_raw: DepthMap,
    pub mask: Mask,
    pub config: SessionConfig,
}

impl EditSession {
    pub fn width(&self) -> usize {
        self.d_ori.width()
    }

    pub fn height(&self) -> usize {
        self.d_ori.height()
    }

    pub fn validate(&self) -> Result<()> {
        if self.frames.is_empty() {
            return Err(Error::Validation("session has no frames".into()));
        }
        if self.frames.len() != self.cameras.len() {
            return Err(Error::Validation(format!(
                "{} frames but {} cameras",
                self.frames.len(),
                self.cameras.len()
            )));
        }
        let (w, h) = (self.width(), self.height());
        for f in &self.frames {
            f.check_size("frame", w, h)?;
        }
        for c in &self.cameras {
            if (c.width(), c.height()) != (w, h) {
                return Err(Error::Dimension {
                    what: "camera raster",
                    got_w: c.width(),
                    got_h: c.height(),
                    want_w: w,
                    want_h: h,
                });
            }
        }
        self.edited_image.check_size("edited image", w, h)?;
        self.edited_depth_raw.check_size("edited depth", w, h)?;
        self.mask.check_size("mask", w, h)?;
        self.config.validate()
    }

    /// Reads a session directory:
    ///
    /// ```text
    /// cameras.json        camera per frame
    /// frames/frame_0000.png ...
    /// d_ori.pfm           depth of frame 0
    /// edited.png          edited frame 0
    /// edited_depth.pfm    relative depth of edited.png
    /// mask.png            edit mask on frame 0
    /// session.json        optional SessionConfig
    /// ```
    pub fn read_dir(dir: &Path) -> Result<Self> {
        let cameras = io::read_cameras(&dir.join(CAMERAS_JSON))?;
        let frames_dir = dir.join(FRAMES_DIR);
        let mut names: Vec<String> = fs::read_dir(&frames_dir)
            .map_err(|e| Error::io(&frames_dir, e))?
            .filter_map(|e| e.ok())
            .map(|e| e.file_name().to_string_lossy().into_owned())
            .filter(|n| n.ends_with(".png"))
            .collect();
        names.sort();
        if names.is_empty() {
            return Err(Error::Validation(format!(
                "no frames in {}",
                frames_dir.display()
            )));
        }
        let frames = names
            .iter()
            .map(|n| io::read_png_rgb(&frames_dir.join(n)))
            .collect::<Result<Vec<_>>>()?;
        let config_path = dir.join(SESSION_JSON);
        let config = if config_path.exists() {
            let bytes = fs::read(&config_path).map_err(|e| Error::io(&config_path, e))?;
            serde_json::from_slice(&bytes)
                .map_err(|e| Error::format(&config_path, e.to_string()))?
        } else {
            SessionConfig::default()
        };
        let session = EditSession {
            frames,
            cameras,
            d_ori: io::read_pfm(&dir.join(D_ORI_PFM))?,
            edited_image: io::read_png_rgb(&dir.join(EDITED_PNG))?,
            edited_depth_raw: io::read_pfm(&dir.join(EDITED_DEPTH_PFM))?,
            mask: io::read_png_mask(&dir.join(MASK_PNG))?,
            config,
        };
        session.validate()?;
        Ok(session)
    }

    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        io::write_cameras(&dir.join(CAMERAS_JSON), &self.cameras)?;
        for (i, f) in self.frames.iter().enumerate() {
            io::write_png_rgb(&dir.join(FRAMES_DIR).join(frame_name(i)), f)?;
        }
        io::write_pfm(&dir.join(D_ORI_PFM), &self.d_ori)?;
        io::write_png_rgb(&dir.join(EDITED_PNG), &self.edited_image)?;
        io::write_pfm(&dir.join(EDITED_DEPTH_PFM), &self.edited_depth_raw)?;
        io::write_png_mask(&dir.join(MASK_PNG), &self.mask)?;
        let mut json = serde_json::to_vec_pretty(&self.config).expect("config serializes");
        json.push(b'\n');
        io::write_bytes(&dir.join(SESSION_JSON), &json)
    }
}
